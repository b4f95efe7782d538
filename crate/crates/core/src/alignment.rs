//! Agreement between metric scores and human judgments.

use std::collections::BTreeMap;
use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::scoring::{SampleResult, SubDomain};

#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error("score {0} outside [0, 100]")]
    OutOfRange(f64),
    #[error("no score for labeled sample {0}")]
    MissingScore(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("annotations: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Correct,
    PartiallyCorrect,
    Incorrect,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Correct => "Correct",
            Self::PartiallyCorrect => "Partially Correct",
            Self::Incorrect => "Incorrect",
        }
    }

    /// Accepts the display names and their snake/kebab spellings.
    pub fn parse(s: &str) -> Result<Self, AlignmentError> {
        let k: String = s.trim().to_lowercase().chars().filter(|c| c.is_ascii_alphabetic()).collect();
        match k.as_str() {
            "correct" => Ok(Self::Correct),
            "partiallycorrect" | "partial" => Ok(Self::PartiallyCorrect),
            "incorrect" => Ok(Self::Incorrect),
            _ => Err(AlignmentError::UnknownLabel(s.to_string())),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// 0 is incorrect, 100 correct, anything between partially correct.
pub fn categorize(score: f64) -> Result<Label, AlignmentError> {
    if !(0.0..=100.0).contains(&score) {
        return Err(AlignmentError::OutOfRange(score));
    }
    Ok(if score == 0.0 {
        Label::Incorrect
    } else if score == 100.0 {
        Label::Correct
    } else {
        Label::PartiallyCorrect
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HumanLabel {
    pub sample_id: String,
    pub annotator: String,
    pub label: Label,
}

#[derive(Deserialize)]
struct Row {
    sample_id: String,
    annotator: String,
    label: String,
}

/// Reads `sample_id,annotator,label` rows.
pub fn read_labels<R: io::Read>(reader: R) -> Result<Vec<HumanLabel>, AlignmentError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize::<Row>()
        .map(|row| {
            let row = row.map_err(|e| AlignmentError::Csv(e.to_string()))?;
            Ok(HumanLabel { sample_id: row.sample_id, annotator: row.annotator, label: Label::parse(&row.label)? })
        })
        .collect()
}

pub fn write_labels<W: io::Write>(labels: &[HumanLabel], out: W) -> Result<(), AlignmentError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| AlignmentError::Csv(e.to_string());
    w.write_record(["sample_id", "annotator", "label"]).map_err(err)?;
    for l in labels {
        w.write_record([l.sample_id.as_str(), l.annotator.as_str(), l.label.as_str()]).map_err(err)?;
    }
    w.flush().map_err(|e| AlignmentError::Csv(e.to_string()))
}

/// Label chosen by a strict majority of annotators.
pub fn consensus(labels: &[Label]) -> Option<Label> {
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(*l).or_default() += 1;
    }
    counts.into_iter().find(|(_, n)| 2 * n > labels.len()).map(|(l, _)| l)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub samples: usize,
    pub matched: usize,
    #[serde(serialize_with = "canonical::real")]
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub per_sub_domain: BTreeMap<SubDomain, Cell>,
    /// Mean of the per-sub-domain accuracies.
    #[serde(serialize_with = "canonical::real")]
    pub average: f64,
    /// Samples dropped because the annotators split.
    pub no_consensus: Vec<String>,
}

impl AgreementReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization is infallible");
        s.push('\n');
        s
    }

    /// One row per sub-domain in leaderboard order, then the average.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("sub_domain,samples,matched,accuracy\n");
        for d in SubDomain::ALL {
            if let Some(c) = self.per_sub_domain.get(&d) {
                s.push_str(&format!("{},{},{},{:.1}\n", d, c.samples, c.matched, 100.0 * c.accuracy));
            }
        }
        let total: usize = self.per_sub_domain.values().map(|c| c.samples).sum();
        let matched: usize = self.per_sub_domain.values().map(|c| c.matched).sum();
        s.push_str(&format!("average,{total},{matched},{:.1}\n", 100.0 * self.average));
        s
    }
}

/// Fraction of labeled samples whose categorized score equals the
/// annotators' consensus, per sub-domain and averaged.
pub fn agreement(labels: &[HumanLabel], scores: &[SampleResult]) -> Result<AgreementReport, AlignmentError> {
    let by_id: BTreeMap<&str, &SampleResult> = scores.iter().map(|r| (r.sample_id.as_str(), r)).collect();
    let mut grouped: BTreeMap<&str, BTreeMap<&str, Label>> = BTreeMap::new();
    for l in labels {
        grouped.entry(l.sample_id.as_str()).or_default().insert(l.annotator.as_str(), l.label);
    }
    let mut cells: BTreeMap<SubDomain, Cell> = BTreeMap::new();
    let mut no_consensus = Vec::new();
    for (id, votes) in grouped {
        let result = by_id.get(id).ok_or_else(|| AlignmentError::MissingScore(id.to_string()))?;
        let votes: Vec<Label> = votes.into_values().collect();
        let Some(truth) = consensus(&votes) else {
            no_consensus.push(id.to_string());
            continue;
        };
        let predicted = categorize(result.score.final_score)?;
        let cell = cells.entry(result.sub_domain).or_insert(Cell { samples: 0, matched: 0, accuracy: 0.0 });
        cell.samples += 1;
        cell.matched += usize::from(predicted == truth);
    }
    for c in cells.values_mut() {
        c.accuracy = c.matched as f64 / c.samples as f64;
    }
    let average = if cells.is_empty() {
        0.0
    } else {
        cells.values().map(|c| c.accuracy).sum::<f64>() / cells.len() as f64
    };
    Ok(AgreementReport { per_sub_domain: cells, average, no_consensus })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{SampleScore, Task};

    fn result(id: &str, d: SubDomain, f: f64) -> SampleResult {
        let mut score = SampleScore::failure("");
        score.final_score = f;
        SampleResult { sample_id: id.into(), sub_domain: d, task: Task::Generation, template_index: 0, target_value: None, score }
    }

    fn votes(id: &str, ls: &[Label]) -> Vec<HumanLabel> {
        ls.iter()
            .enumerate()
            .map(|(i, l)| HumanLabel { sample_id: id.into(), annotator: format!("a{i}"), label: *l })
            .collect()
    }

    #[test]
    fn categorize_endpoints() {
        assert_eq!(categorize(0.0).unwrap(), Label::Incorrect);
        assert_eq!(categorize(100.0).unwrap(), Label::Correct);
        assert_eq!(categorize(81.8).unwrap(), Label::PartiallyCorrect);
        assert_eq!(categorize(1e-12).unwrap(), Label::PartiallyCorrect);
        assert!(matches!(categorize(100.5), Err(AlignmentError::OutOfRange(_))));
        assert!(categorize(f64::NAN).is_err());
    }

    #[test]
    fn majority_rules() {
        use Label::*;
        assert_eq!(consensus(&[Correct, Correct, Incorrect]), Some(Correct));
        assert_eq!(consensus(&[Correct, PartiallyCorrect, Incorrect]), None);
        assert_eq!(consensus(&[Incorrect]), Some(Incorrect));
    }

    #[test]
    fn ninety_six_of_a_hundred() {
        let mut labels = Vec::new();
        let mut scores = Vec::new();
        for i in 0..100 {
            let id = format!("s{i:03}");
            scores.push(result(&id, SubDomain::Egocentric, 100.0));
            let l = if i < 96 { Label::Correct } else { Label::Incorrect };
            labels.extend(votes(&id, &[l, l, l]));
        }
        let r = agreement(&labels, &scores).unwrap();
        assert_eq!(r.per_sub_domain[&SubDomain::Egocentric].accuracy, 0.96);
        assert!(r.to_csv().contains("egocentric,100,96,96.0"));
    }

    #[test]
    fn splits_are_excluded_and_missing_scores_fail() {
        use Label::*;
        let mut labels = votes("a", &[Correct, PartiallyCorrect, Incorrect]);
        labels.extend(votes("b", &[Correct, Correct, Correct]));
        let scores = vec![result("a", SubDomain::ObjectPose, 0.0), result("b", SubDomain::ObjectPose, 100.0)];
        let r = agreement(&labels, &scores).unwrap();
        assert_eq!(r.no_consensus, vec!["a".to_string()]);
        assert_eq!(r.per_sub_domain[&SubDomain::ObjectPose].samples, 1);
        assert!(matches!(agreement(&labels, &scores[..1]), Err(AlignmentError::MissingScore(id)) if id == "b"));
    }

    #[test]
    fn csv_round_trip() {
        let labels = votes("x", &[Label::Correct, Label::PartiallyCorrect]);
        let mut buf = Vec::new();
        write_labels(&labels, &mut buf).unwrap();
        assert_eq!(read_labels(buf.as_slice()).unwrap(), labels);
        assert!(read_labels("sample_id,annotator,label\nx,a,Maybe\n".as_bytes()).is_err());
    }

    proptest::proptest! {
        #[test]
        fn agreement_ignores_order(seed in 0u64..1000) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut labels = Vec::new();
            let mut scores = Vec::new();
            for i in 0..30 {
                let id = format!("s{i}");
                let d = SubDomain::ALL[i % 9];
                scores.push(result(&id, d, [0.0, 50.0, 100.0][i % 3]));
                let l = [Label::Correct, Label::Incorrect, Label::PartiallyCorrect][(i / 3) % 3];
                labels.extend(votes(&id, &[l, l, Label::Correct]));
            }
            let base = agreement(&labels, &scores).unwrap();
            labels.shuffle(&mut rng);
            scores.shuffle(&mut rng);
            proptest::prop_assert_eq!(agreement(&labels, &scores).unwrap(), base);
        }
    }
}
