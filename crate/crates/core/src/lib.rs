//! Isolated sign recognition from hand and upper-body keypoints.
//!
//! The crate covers the whole experimental pipeline at desk scale:
//!
//! - [`data`]: the `kpseq/1` keypoint-sequence file format, dataset
//!   manifests, the wrist-height frame filter, stratified splitting and a
//!   synthetic generator whose classes share spatial "concept" anchors.
//! - [`nn`]: an MLP → GRU → softmax classifier with an analytic
//!   backpropagation-through-time pass and Adam.
//! - [`train`]: mini-batch training with patience-based early stopping and
//!   accuracy / macro-F1 evaluation.
//! - [`transfer`]: the `SLRM` checkpoint format and weight-initialization
//!   transfer of the MLP layer from a source model.
//! - [`grid`]: paired (MLP, GRU) size search with epoch-based tie breaking.
//! - [`heatmap`]: per-concept hand-activity histograms and their correlation.
//!
//! Internally all arithmetic is `f64`; files store `f32`.

pub mod data;
pub mod error;
pub mod grid;
pub mod heatmap;
pub mod nn;
pub mod train;
pub mod transfer;

pub use data::{
    KeypointSequence, LandmarkFrame, Manifest, SampleRecord, Split, SynthSpec, FRAME_WIDTH, LANDMARK_COUNT,
    LANDMARK_LAYOUT,
};
pub use error::{Error, Result};
pub use grid::{GridResult, GridSpec, SelectionMetric};
pub use heatmap::{ActivityGrid, LandmarkSelector};
pub use nn::{AdamState, Dims, Gradients, ModelParams};
pub use train::{ConfusionMatrix, Dataset, LabelMap, TrainConfig, TrainResult};
pub use transfer::{Checkpoint, TransferScope};
