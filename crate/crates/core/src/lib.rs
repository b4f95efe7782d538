//! Spatial-intelligence benchmark for image generation and editing models.
//!
//! Perception records (detections, masks, orientation frames, metric depth)
//! are lifted into a 3-D scene graph, checked against a target condition with
//! geometric predicates and scored on a 0–100 scale.

pub mod alignment;
pub mod bench;
pub mod canonical;
pub mod config;
pub mod geometry;
pub mod perception;
pub mod predicates;
pub mod report;
pub mod runner;
pub mod scene;
pub mod scoring;
pub mod synth;
