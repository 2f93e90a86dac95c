//! Subjective-score statistics and pseudo-MOS labeling.
//!
//! Ratings are screened per subject by kurtosis and averaged into MOS; for
//! each distortion type the full-reference metric that best ranks the MOS is
//! chosen and mapped onto the `[1,5]` scale by a fitted monotone curve.

mod correlation;
mod labels;
mod regression;
mod subjects;

pub use correlation::{fractional_ranks, plcc, srocc, srocc_closed_form};
pub use labels::{
    annotation_error_stats, calibrate, error_stats, error_stats_by_level, generate_pseudo_mos,
    pick_best, rank_candidates, select_best_metric, AnnotationRecord, Candidate, ErrorStats,
    ScoredSample, TypeCalibration, HISTOGRAM_BIN, HISTOGRAM_RANGE, MIN_SELECTION_SAMPLES,
};
pub use regression::{
    eval_regression, fit_regression, FitDiagnostics, RegressionKind, RegressionModel,
    MAX_ITERATIONS,
};
pub use subjects::{
    compute_mos, kurtosis, screen_subjects, Mos, Rating, RatingMatrix, Rejection, Screening,
    DEFAULT_MIN_SCORES, KURTOSIS_RANGE,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("undefined correlation: an input has zero variance")]
    UndefinedCorrelation,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} samples, have {have}")]
    TooFewSamples { need: usize, have: usize },
    #[error("non-finite input value")]
    NonFinite,
    #[error("score {score} by subject {subject} on {stimulus} outside [1,5]")]
    ScoreOutOfRange {
        stimulus: String,
        subject: String,
        score: f64,
    },
    #[error("stimulus {0} has no scores from kept subjects")]
    NoKeptScores(String),
    #[error("distortion type {0} has no applicable metric")]
    NoApplicableMetric(u8),
    #[error("distortion type {0} has no fitted model")]
    NoModel(u8),
    #[error("sample {degraded} lacks a score for metric {metric}")]
    MissingScore { degraded: String, metric: String },
    #[error("parameter vector does not match the regression form")]
    BadParameters,
    #[error("regression fit produced no finite solution")]
    FitFailed,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AnnotateError>;
