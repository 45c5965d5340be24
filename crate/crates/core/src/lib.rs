//! Training-free video object tracking by mask propagation over dense
//! per-frame feature maps.
//!
//! The pipeline is: read feature maps ([`store`]), propagate a first-frame
//! mask through the video ([`engine`]), score the result ([`metrics`]).
//! [`analysis`] renders features for inspection and [`synth`] generates
//! sequences with analytic ground truth.

pub mod analysis;
pub mod cli;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod record;
pub mod store;
pub mod synth;
pub mod tensor;

pub use engine::{track_video, MemoryMode, Tracker, TrackerConfig};
pub use error::{Error, ErrorCategory, Result};
pub use tensor::{argmax_labels, normalize_features, FeatureMap, LabelMask, SoftMask};
