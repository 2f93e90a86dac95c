//! Subjective ratings: outlier screening and mean opinion scores.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnnotateError, Result};

/// Minimum kept scores per stimulus below which a warning is logged.
pub const DEFAULT_MIN_SCORES: usize = 16;
/// Kurtosis acceptance band for subjects.
pub const KURTOSIS_RANGE: (f64, f64) = (2.0, 4.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub stimulus_id: String,
    pub subject_id: String,
    pub score: f64,
}

/// Sparse stimulus × subject score table on the five-grade scale.
#[derive(Debug, Clone, Default)]
pub struct RatingMatrix {
    ratings: Vec<Rating>,
}

impl RatingMatrix {
    pub fn new(ratings: Vec<Rating>) -> Result<Self> {
        for r in &ratings {
            if !(1.0..=5.0).contains(&r.score) {
                return Err(AnnotateError::ScoreOutOfRange {
                    stimulus: r.stimulus_id.clone(),
                    subject: r.subject_id.clone(),
                    score: r.score,
                });
            }
        }
        Ok(Self { ratings })
    }

    /// CSV with columns `stimulus_id, subject_id, score`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let ratings = rdr.deserialize().collect::<std::result::Result<Vec<Rating>, _>>()?;
        Self::new(ratings)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    pub fn subjects(&self) -> BTreeSet<&str> {
        self.ratings.iter().map(|r| r.subject_id.as_str()).collect()
    }

    pub fn scores_of(&self, subject: &str) -> Vec<f64> {
        self.ratings
            .iter()
            .filter(|r| r.subject_id == subject)
            .map(|r| r.score)
            .collect()
    }
}

/// `m4 / m2^2` with population central moments; `None` for constant input.
pub fn kurtosis(v: &[f64]) -> Option<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = v.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    (m2 > 0.0).then(|| m4 / (m2 * m2))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Rejection {
    Kurtosis(f64),
    Degenerate,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Screening {
    pub kept: Vec<String>,
    pub rejected: Vec<(String, Rejection)>,
}

/// Keeps a subject iff the kurtosis of their own scores lies in `[2, 4]`.
pub fn screen_subjects(ratings: &RatingMatrix) -> Result<Screening> {
    let mut out = Screening::default();
    for subject in ratings.subjects() {
        let scores = ratings.scores_of(subject);
        if scores.len() < 4 {
            return Err(AnnotateError::TooFewSamples { need: 4, have: scores.len() });
        }
        match kurtosis(&scores) {
            None => out.rejected.push((subject.to_string(), Rejection::Degenerate)),
            Some(b2) if (KURTOSIS_RANGE.0..=KURTOSIS_RANGE.1).contains(&b2) => {
                out.kept.push(subject.to_string())
            }
            Some(b2) => out.rejected.push((subject.to_string(), Rejection::Kurtosis(b2))),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mos {
    pub mos: f64,
    pub count: usize,
}

/// Mean of the kept subjects' scores per stimulus. Every stimulus that has
/// any rating must keep at least one.
pub fn compute_mos(
    ratings: &RatingMatrix,
    kept: &[String],
    min_scores: usize,
) -> Result<BTreeMap<String, Mos>> {
    let kept: BTreeSet<&str> = kept.iter().map(String::as_str).collect();
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in ratings.ratings() {
        let e = acc.entry(r.stimulus_id.clone()).or_default();
        if kept.contains(r.subject_id.as_str()) {
            e.0 += r.score;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(id, (sum, count))| {
            if count == 0 {
                return Err(AnnotateError::NoKeptScores(id));
            }
            if count < min_scores {
                log::warn!("stimulus {id} has {count} kept scores (minimum {min_scores})");
            }
            Ok((id, Mos { mos: sum / count as f64, count }))
        })
        .collect()
}
