//! Manifest-driven batch stages: build, score, annotate, train, eval and the
//! ablation report. Every stage is deterministic under the dataset seed and
//! independent of the worker count.

mod annotate_stage;
mod build;
mod config;
mod learn;
mod manifest;
mod report;

pub use annotate_stage::{cmd_annotate, AnnotateSummary};
pub use build::{cmd_build, cmd_score, list_references, BuildSummary, ScoreSummary};
pub use config::{AblationConfig, Config, SplitSpec, ADAPTERS_ENV};
pub use learn::{
    cmd_eval, cmd_report, cmd_train, load_samples, AblationReport, AblationRow, EvalReport, EvalRow, Prediction,
    TrainSummary,
};
pub use manifest::{sample_id, Manifest, ManifestHeader, ReferenceEntry, SampleRecord, MANIFEST_FORMAT};
pub use report::{correlations, format_cell, TextTable};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("validation: {0}")]
    Validation(String),
    #[error("missing file {0}: {1}")]
    MissingFile(PathBuf, #[source] std::io::Error),
    #[error("distortion type {0} has no subjectively labeled samples")]
    UncoveredType(u8),
    #[error(transparent)]
    Distort(#[from] crate::distort::DistortError),
    #[error(transparent)]
    Metric(#[from] crate::frmetrics::MetricError),
    #[error(transparent)]
    Annotate(#[from] crate::annotate::AnnotateError),
    #[error(transparent)]
    Nn(#[from] crate::sparsenn::NnError),
    #[error(transparent)]
    Cloud(#[from] crate::pcio::PcioError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl PipelineError {
    /// 1 for bad input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) | PipelineError::MissingFile(..) | PipelineError::UncoveredType(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

pub(crate) fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?)
}
