//! Keyframe sampling for LiDAR place recognition.
//!
//! The crate selects a compact set of keyframes from a pose/descriptor
//! stream by minimizing descriptor redundancy while preserving how
//! descriptors vary along the trajectory, evaluated over a sliding window.

// `!(x > y)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod descriptors;
pub mod eigen;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod model;
pub mod samplers;
pub mod spatial;
pub mod terms;
pub mod window;

pub use error::{Error, Result};
pub use evaluation::{EvalConfig, EvalReport, PrPoint};
pub use model::{
    cumulative_arclength, pose_distance, radius_query, Descriptor, Keyframe, KeyframeStore, KeyframeWindow, Point,
    PointCloud, Pose, ScanRef, Session,
};
pub use samplers::{Method, SamplerConfig, SamplerOutput};
pub use terms::{objective, preservation, redundancy, DescriptorMatrix, ObjectiveParams};
pub use window::{OptimizerState, SubsetSelection, WindowConfig};
