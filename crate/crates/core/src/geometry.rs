//! Coordinate conventions, pinhole camera and azimuth math.
//!
//! Camera frame: +X right, +Y down, +Z along the viewing direction, camera at
//! the origin. Azimuths are yaw angles about the gravity axis: 0° faces away
//! from the camera, 90° faces the viewer's right, 180° faces the viewer and
//! 270° faces the viewer's left.

use nalgebra::{Point2, Point3 as NPoint3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
/// Metric point in the camera frame.
pub type Point3 = NPoint3<f64>;
/// Continuous pixel coordinate `(u, v)`.
pub type Pixel = Point2<f64>;

/// Tolerance for unit-norm and orthogonality checks on values read back from
/// disk, where reals carry nine significant digits.
pub const STORED_UNIT_TOLERANCE: f64 = 1e-6;

const DEGENERATE_HORIZONTAL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("pixel ({u}, {v}) lies outside the {width}x{height} image")]
    OutOfBounds { u: f64, v: f64, width: u32, height: u32 },
    #[error("point has z = {0}; it is not in front of the camera")]
    BehindCamera(f64),
    #[error("direction is parallel to the gravity axis")]
    DegenerateVertical,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
}

/// Pinhole intrinsics plus the gravity direction expressed in the camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub up_hint: Vec3,
}

impl CameraModel {
    pub fn default_up() -> Vec3 {
        Vec3::new(0.0, -1.0, 0.0)
    }

    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let cam = Self { fx, fy, cx, cy, width, height, up_hint: Self::default_up() };
        cam.validate()?;
        Ok(cam)
    }

    /// Replaces the gravity hint. The vector is normalized here.
    pub fn with_up(mut self, up: Vec3) -> Result<Self, GeometryError> {
        let norm = up.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(GeometryError::InvalidCamera("up_hint has zero length".into()));
        }
        self.up_hint = up / norm;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |msg: String| Err(GeometryError::InvalidCamera(msg));
        if !(self.fx.is_finite() && self.fx > 0.0 && self.fy.is_finite() && self.fy > 0.0) {
            return bad(format!("focal lengths must be positive, got fx={} fy={}", self.fx, self.fy));
        }
        if self.width == 0 || self.height == 0 {
            return bad("image size must be non-zero".into());
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64) {
            return bad(format!("principal point ({}, {}) outside image", self.cx, self.cy));
        }
        let n = self.up_hint.norm();
        if !n.is_finite() || (n - 1.0).abs() > STORED_UNIT_TOLERANCE {
            return bad(format!("up_hint norm {n} is not 1"));
        }
        Ok(())
    }

    pub fn contains(&self, px: &Pixel) -> bool {
        px.x >= 0.0 && px.y >= 0.0 && px.x <= self.width as f64 && px.y <= self.height as f64
    }

    /// Ray through a pixel, scaled so that its z component is 1.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Lifts a pixel with metric z-depth to a camera-frame point.
    pub fn unproject(&self, px: Pixel, depth: f64) -> Result<Point3, GeometryError> {
        if !(depth > 0.0) || !depth.is_finite() {
            return Err(GeometryError::NonPositiveDepth(depth));
        }
        if !self.contains(&px) {
            return Err(GeometryError::OutOfBounds { u: px.x, v: px.y, width: self.width, height: self.height });
        }
        Ok(Point3::from(self.ray(px.x, px.y) * depth))
    }

    pub fn project(&self, p: &Point3) -> Result<Pixel, GeometryError> {
        if !(p.z > 0.0) {
            return Err(GeometryError::BehindCamera(p.z));
        }
        Ok(Pixel::new(self.cx + self.fx * p.x / p.z, self.cy + self.fy * p.y / p.z))
    }

    pub fn horizontal(&self) -> HorizontalBasis {
        HorizontalBasis::from_up(&self.up_hint).expect("camera up_hint is validated")
    }
}

/// Orthonormal basis of the gravity-aligned ground plane as seen by the camera.
///
/// `ahead` is the horizontal projection of camera +Z and `right = ahead × up`,
/// which equals the projection of camera +X whenever the camera has no roll.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizontalBasis {
    pub up: Vec3,
    pub right: Vec3,
    pub ahead: Vec3,
}

impl HorizontalBasis {
    pub fn from_up(up: &Vec3) -> Result<Self, GeometryError> {
        let n = up.norm();
        if !(n > 1e-12) {
            return Err(GeometryError::DegenerateVertical);
        }
        let up = up / n;
        let z = Vec3::z();
        let ahead = z - up * z.dot(&up);
        let len = ahead.norm();
        if len < DEGENERATE_HORIZONTAL {
            return Err(GeometryError::DegenerateVertical);
        }
        let ahead = ahead / len;
        let right = ahead.cross(&up);
        Ok(Self { up, right, ahead })
    }

    /// Removes the vertical component of `v`.
    pub fn flatten(&self, v: &Vec3) -> Vec3 {
        v - self.up * v.dot(&self.up)
    }

    /// Horizontal unit vector pointing along `azimuth`.
    pub fn direction(&self, azimuth: Azimuth) -> Vec3 {
        let r = azimuth.degrees().to_radians();
        self.ahead * r.cos() + self.right * r.sin()
    }

    /// Bearing of a horizontal vector in degrees, same convention as azimuths.
    /// Returns `None` when the horizontal part is shorter than `min_len`.
    pub fn bearing(&self, v: &Vec3, min_len: f64) -> Option<Azimuth> {
        let x = v.dot(&self.right);
        let z = v.dot(&self.ahead);
        if x.hypot(z) < min_len {
            return None;
        }
        Some(Azimuth::new(x.atan2(z).to_degrees()))
    }

    /// Rotation about the gravity axis that adds `degrees` to every azimuth.
    pub fn yaw(&self, degrees: f64) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Unit::new_normalize(-self.up), degrees.to_radians())
    }
}

/// Yaw angle in degrees, always in `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Azimuth(f64);

impl Azimuth {
    pub fn new(degrees: f64) -> Self {
        let d = degrees.rem_euclid(360.0);
        // rem_euclid can round up to exactly 360 for tiny negative inputs
        Self(if d >= 360.0 { 0.0 } else { d })
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    pub fn rotated(self, degrees: f64) -> Self {
        Self::new(self.0 + degrees)
    }
}

/// Azimuth of a forward vector about `up`.
pub fn azimuth_of(forward: &Vec3, up: &Vec3) -> Result<Azimuth, GeometryError> {
    let basis = HorizontalBasis::from_up(up)?;
    let n = forward.norm();
    if !(n > 0.0) {
        return Err(GeometryError::DegenerateVertical);
    }
    basis.bearing(&(forward / n), DEGENERATE_HORIZONTAL).ok_or(GeometryError::DegenerateVertical)
}

/// Smallest angle between two azimuths, in `[0, 180]`.
pub fn azimuth_diff(a: Azimuth, b: Azimuth) -> f64 {
    let d = (a.degrees() - b.degrees()).abs();
    d.min(360.0 - d)
}

/// Elevation of `forward` above the horizontal plane in degrees.
pub fn pitch_of(forward: &Vec3, up: &Vec3) -> f64 {
    let f = forward.normalize();
    f.dot(&up.normalize()).clamp(-1.0, 1.0).asin().to_degrees()
}

/// Right-handed object frame: `left = up × forward`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame3 {
    pub forward: Vec3,
    pub left: Vec3,
    pub up: Vec3,
}

impl Frame3 {
    /// Builds a frame from a forward direction and an up direction. `up` is
    /// kept; `forward` is orthogonalized against it.
    pub fn from_forward_up(forward: &Vec3, up: &Vec3) -> Result<Self, GeometryError> {
        let un = up.norm();
        if !(un > 0.0) || !un.is_finite() {
            return Err(GeometryError::InvalidFrame("up has zero length".into()));
        }
        let up = up / un;
        let f = forward - up * forward.dot(&up);
        let fnorm = f.norm();
        if !(fnorm > DEGENERATE_HORIZONTAL) {
            return Err(GeometryError::DegenerateVertical);
        }
        let forward = f / fnorm;
        let left = up.cross(&forward);
        Ok(Self { forward, left, up })
    }

    /// Upright frame facing `azimuth` about gravity.
    pub fn from_azimuth(azimuth: Azimuth, basis: &HorizontalBasis) -> Self {
        let forward = basis.direction(azimuth);
        Self { forward, left: basis.up.cross(&forward), up: basis.up }
    }

    /// Validates a frame read from storage.
    pub fn try_new(forward: Vec3, left: Vec3, up: Vec3) -> Result<Self, GeometryError> {
        let tol = STORED_UNIT_TOLERANCE;
        for (name, v) in [("forward", &forward), ("left", &left), ("up", &up)] {
            let n = v.norm();
            if !n.is_finite() || (n - 1.0).abs() > tol {
                return Err(GeometryError::InvalidFrame(format!("{name} has norm {n}")));
            }
        }
        if forward.dot(&left).abs() > tol || forward.dot(&up).abs() > tol || left.dot(&up).abs() > tol {
            return Err(GeometryError::InvalidFrame("axes are not orthogonal".into()));
        }
        if (up.cross(&forward) - left).norm() > 10.0 * tol {
            return Err(GeometryError::InvalidFrame("left != up x forward".into()));
        }
        Ok(Self { forward, left, up })
    }

    pub fn rotated(&self, rot: &Rotation3<f64>) -> Self {
        Self { forward: rot * self.forward, left: rot * self.left, up: rot * self.up }
    }

    pub fn axes(&self) -> [Vec3; 3] {
        [self.forward, self.left, self.up]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cam() -> CameraModel {
        CameraModel::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn unproject_principal_point_is_optical_axis() {
        let c = cam();
        let p = c.unproject(Pixel::new(c.cx, c.cy), 2.0).unwrap();
        assert_eq!(p, Point3::new(0.0, 0.0, 2.0));
        let p = c.unproject(Pixel::new(c.cx + c.fx / 2.0, c.cy), 2.0).unwrap();
        assert!((p - Point3::new(1.0, 0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn unproject_off_center() {
        // (100 - 320) / 500 * 3.5 = -1.54, (80 - 240) / 500 * 3.5 = -1.12
        let p = cam().unproject(Pixel::new(100.0, 80.0), 3.5).unwrap();
        assert!((p.x + 1.54).abs() < 1e-12);
        assert!((p.y + 1.12).abs() < 1e-12);
        assert_eq!(p.z, 3.5);
    }

    #[test]
    fn unproject_rejects_bad_input() {
        let c = cam();
        assert_eq!(c.unproject(Pixel::new(10.0, 10.0), 0.0), Err(GeometryError::NonPositiveDepth(0.0)));
        assert!(matches!(c.unproject(Pixel::new(10.0, 10.0), -1.0), Err(GeometryError::NonPositiveDepth(_))));
        assert!(matches!(c.unproject(Pixel::new(641.0, 10.0), 1.0), Err(GeometryError::OutOfBounds { .. })));
        assert!(matches!(c.unproject(Pixel::new(10.0, -0.5), 1.0), Err(GeometryError::OutOfBounds { .. })));
    }

    #[test]
    fn project_examples() {
        let c = cam();
        assert_eq!(c.project(&Point3::new(0.0, 0.0, 2.0)).unwrap(), Pixel::new(320.0, 240.0));
        assert_eq!(c.project(&Point3::new(1.0, 0.0, 1.0)).unwrap().x, 820.0);
        assert!(matches!(c.project(&Point3::new(0.0, 0.0, -1.0)), Err(GeometryError::BehindCamera(_))));
    }

    #[test]
    fn camera_validation() {
        assert!(CameraModel::new(0.0, 500.0, 320.0, 240.0, 640, 480).is_err());
        assert!(CameraModel::new(500.0, 500.0, 640.0, 240.0, 640, 480).is_err());
        let mut c = cam();
        c.up_hint = Vec3::new(0.0, -2.0, 0.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn azimuth_examples() {
        let up = CameraModel::default_up();
        let az = |f: Vec3| azimuth_of(&f, &up).unwrap().degrees();
        assert!((az(Vec3::new(0.0, 0.0, -1.0)) - 180.0).abs() < 1e-12);
        assert!((az(Vec3::new(1.0, 0.0, 0.0)) - 90.0).abs() < 1e-12);
        assert!((az(Vec3::new(0.0, 0.0, 1.0))).abs() < 1e-12);
        // atan2(-0.7071, -0.7071) = -135 deg -> 225
        assert!((az(Vec3::new(-0.7071, 0.0, -0.7071)) - 225.0).abs() < 1e-9);
        assert_eq!(azimuth_of(&Vec3::new(0.0, -1.0, 0.0), &up), Err(GeometryError::DegenerateVertical));
    }

    #[test]
    fn azimuth_diff_examples() {
        let d = |a: f64, b: f64| azimuth_diff(Azimuth::new(a), Azimuth::new(b));
        assert_eq!(d(180.0, 180.0), 0.0);
        assert_eq!(d(350.0, 10.0), 20.0);
        // brute force both wrap directions: |90-300| = 210, 360-210 = 150
        let brute = |a: f64, b: f64| {
            let cw = (b - a).rem_euclid(360.0);
            let ccw = (a - b).rem_euclid(360.0);
            cw.min(ccw)
        };
        assert_eq!(d(90.0, 300.0), brute(90.0, 300.0));
        assert_eq!(d(90.0, 300.0), 150.0);
    }

    #[test]
    fn azimuth_normalization() {
        assert_eq!(Azimuth::new(-90.0).degrees(), 270.0);
        assert_eq!(Azimuth::new(720.0).degrees(), 0.0);
        assert!(Azimuth::new(-1e-18).degrees() < 360.0);
    }

    #[test]
    fn frame_left_matches_convention() {
        let up = CameraModel::default_up();
        let facing_viewer = Frame3::from_forward_up(&Vec3::new(0.0, 0.0, -1.0), &up).unwrap();
        assert!((facing_viewer.left - Vec3::x()).norm() < 1e-12);
        let facing_away = Frame3::from_forward_up(&Vec3::new(0.0, 0.0, 1.0), &up).unwrap();
        assert!((facing_away.left + Vec3::x()).norm() < 1e-12);
    }

    #[test]
    fn stored_frame_validation() {
        let f = Frame3::from_forward_up(&Vec3::new(1.0, 0.2, 0.3), &Vec3::new(0.1, -1.0, 0.0)).unwrap();
        assert!(Frame3::try_new(f.forward, f.left, f.up).is_ok());
        assert!(Frame3::try_new(f.forward, -f.left, f.up).is_err());
        assert!(Frame3::try_new(f.forward * 1.1, f.left, f.up).is_err());
    }

    fn unit_up() -> impl Strategy<Value = Vec3> {
        (-0.4f64..0.4, -0.6f64..0.6).prop_map(|(roll, pitch)| {
            Vec3::new(roll.sin(), -roll.cos() * pitch.cos(), -pitch.sin()).normalize()
        })
    }

    proptest! {
        #[test]
        fn project_unproject_round_trip(u in 0.0f64..640.0, v in 0.0f64..480.0, d in 0.1f64..100.0) {
            let c = cam();
            let p = c.unproject(Pixel::new(u, v), d).unwrap();
            let back = c.project(&p).unwrap();
            prop_assert!((back.x - u).abs() < 1e-6 && (back.y - v).abs() < 1e-6);
        }

        #[test]
        fn azimuth_diff_is_a_metric(a in 0.0f64..360.0, b in 0.0f64..360.0, c in 0.0f64..360.0) {
            let (a, b, c) = (Azimuth::new(a), Azimuth::new(b), Azimuth::new(c));
            prop_assert_eq!(azimuth_diff(a, b), azimuth_diff(b, a));
            prop_assert_eq!(azimuth_diff(a, a), 0.0);
            prop_assert!(azimuth_diff(a, c) <= azimuth_diff(a, b) + azimuth_diff(b, c) + 1e-9);
            prop_assert!((0.0..=180.0).contains(&azimuth_diff(a, b)));
        }

        #[test]
        fn azimuth_scale_and_yaw(up in unit_up(), az in 0.0f64..360.0, theta in -360.0f64..360.0,
                                 scale in 0.01f64..100.0, tilt in -0.5f64..0.5) {
            let basis = HorizontalBasis::from_up(&up).unwrap();
            let f = basis.direction(Azimuth::new(az)) + basis.up * tilt;
            let a0 = azimuth_of(&f, &up).unwrap();
            prop_assert!(azimuth_diff(a0, Azimuth::new(az)) < 1e-9);
            let scaled = azimuth_of(&(f * scale), &up).unwrap();
            prop_assert!(azimuth_diff(a0, scaled) < 1e-9);
            let rotated = azimuth_of(&(basis.yaw(theta) * f), &up).unwrap();
            prop_assert!(azimuth_diff(rotated, a0.rotated(theta)) < 1e-9);
        }

        #[test]
        fn frame_is_right_handed(up in unit_up(), fx in -1.0f64..1.0, fy in -1.0f64..1.0, fz in -1.0f64..1.0) {
            let f = Vec3::new(fx, fy, fz);
            prop_assume!(HorizontalBasis::from_up(&up).unwrap().flatten(&f).norm() > 1e-3);
            let frame = Frame3::from_forward_up(&f, &up).unwrap();
            prop_assert!((frame.up.cross(&frame.forward) - frame.left).norm() < 1e-9);
            for v in frame.axes() {
                prop_assert!((v.norm() - 1.0).abs() < 1e-9);
            }
            prop_assert!(frame.forward.dot(&frame.left).abs() < 1e-6);
            prop_assert!(frame.forward.dot(&frame.up).abs() < 1e-6);
        }
    }
}
