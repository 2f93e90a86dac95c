//! Sub-manifold sparse convolution with hand-written reverse-mode gradients,
//! and ResSCNN, a residual sparse CNN that regresses a quality score from a
//! colored point cloud.
//!
//! ```no_run
//! use pcqa::sparsenn::{voxelize, ModelConfig, ResScnn};
//! # let cloud: pcqa::pcio::PointCloud = unimplemented!();
//! let model = ResScnn::new(&ModelConfig::default(), 7).unwrap();
//! let tensor = voxelize(&cloud, 1.0).unwrap();
//! let q = model.predict_tensor(&tensor).unwrap();
//! ```

mod checkpoint;
mod layers;
mod model;
mod tensor;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use layers::{global_pool, pool, pool_backward, BatchNorm, BnCache, ConvLayer, Dense, Mode, PoolMode};
pub use model::{FeatureSource, ForwardCache, Gradients, LayerSpec, ModelConfig, ResScnn, ResidualVariant};
pub use tensor::{build_kernel_map, kernel_offsets, voxelize, Coord, KernelMap, SparseTensor, CENTER_OFFSET, KERNEL_VOLUME};
pub use train::{
    augment, augment_with, predict, read_loss_csv, sgd_step, train, write_loss_csv, LossRecord, TrainConfig,
    TrainOutcome, TrainSample,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("sparse tensor has no rows")]
    EmptyTensor,
    #[error("width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("duplicate coordinate {0:?}")]
    DuplicateCoordinate(Coord),
    #[error("voxel size must be positive and finite, got {0}")]
    BadVoxelSize(f64),
    #[error("backward pass needs a training-mode forward cache")]
    MissingCache,
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("non-finite label {0}")]
    NonFiniteLabel(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Cloud(#[from] crate::pcio::PcioError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;

/// Smooth L1 loss of `prediction - label` and its derivative with respect to
/// the prediction.
pub fn smooth_l1(prediction: f64, label: f64) -> (f64, f64) {
    let x = prediction - label;
    if x.abs() < 1.0 {
        (0.5 * x * x, x)
    } else {
        (x.abs() - 0.5, x.signum())
    }
}
