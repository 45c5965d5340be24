//! Temporal mask propagation: windowed exponential affinity against a
//! bounded memory of past frames, followed by an argmax.

mod affinity;
mod config;
mod kernel;
mod memory;
mod resample;
mod tracker;
mod window;

pub use affinity::{
    compute_windowed_affinity, propagate, propagate_windowed, AffinityEntry, WindowedAffinity,
};
pub use config::{MemoryMode, TrackerConfig};
pub use memory::{update_memory, MemoryEntry, MemoryQueue};
pub use resample::{downsample_mask, upsample_soft_mask};
pub use tracker::{
    track_video, track_video_timed, track_video_with_threads, with_threads, StepOutput,
    TrackOutput, Tracker,
};
pub use window::{build_spatial_mask, SpatialWindowMask};
