//! Motion features, the learnable motion extractor, the distillation loss
//! and the flow-based motion score.
//!
//! Trajectories are rendered as alpha-blended discs seen through an
//! orthographic camera ([`render_frame`]). Each frame also carries a
//! screen-space velocity map. [`encode_motion_features`] pools coverage and
//! velocity into a coarse feature volume that ignores colour entirely, so
//! two trajectories that differ only in appearance encode identically.
//! A two-layer linear convolution ([`MotionExtractor`]) maps those volumes
//! before they are compared with a Charbonnier loss ([`lmd_loss`]).

mod extractor;
mod features;
mod flow;
mod io;
mod render;

use thiserror::Error;

pub use extractor::{ConvLayer, LmdConfig, MotionExtractor};
pub use features::{encode_motion_features, lmd_loss, FeatureVolume, FEATURE_CELL};
pub use flow::{ecms, flow_from_snapshots, FlowField, ECMS_GUARD};
pub use io::{read_tensor, write_ppm, write_tensor, TENSOR_MAGIC};
pub use render::{render_frame, render_trajectory, OrthoCamera, RenderedFrame};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MotionError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no frames to encode")]
    Empty,
}
