//! Point cloud quality assessment workbench.
//!
//! - [`pcio`]: point clouds, PLY files, k-d tree, normals
//! - [`distort`]: the 31-type distortion catalogue at 7 levels
//! - [`frmetrics`]: full-reference geometry and color metrics
//! - [`annotate`]: correlation statistics, subject screening, curve fitting, pseudo-MOS
//! - [`sparsenn`]: sub-manifold sparse convolution engine and the ResSCNN regressor
//! - [`pipeline`]: manifest-driven batch stages behind the `pcqa` binary
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod annotate;
pub mod colorspace;
pub mod distort;
pub mod frmetrics;
pub mod pcio;
pub mod pipeline;
pub mod sparsenn;
