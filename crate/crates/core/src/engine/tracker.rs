use std::time::{Duration, Instant};

use crate::engine::affinity::propagate_windowed;
use crate::engine::config::TrackerConfig;
use crate::engine::memory::MemoryQueue;
use crate::engine::resample::{downsample_mask, upsample_soft_mask};
use crate::error::{Error, Result};
use crate::tensor::{FeatureMap, LabelMask, SoftMask};

/// Result of tracking one frame.
#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Propagated class scores on the feature grid.
    pub soft: SoftMask,
    /// Final labels at mask resolution.
    pub labels: LabelMask,
}

/// Online tracking session. Each call to [`Tracker::step`] consumes the next
/// frame's features and only ever sees frames already pushed.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    memory: MemoryQueue,
    mask_height: usize,
    mask_width: usize,
    height: usize,
    width: usize,
    channels: usize,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig, first: &FeatureMap, first_mask: &LabelMask) -> Result<Self> {
        cfg.validate()?;
        if first_mask.height() < first.height() || first_mask.width() < first.width() {
            return Err(Error::Dimension(format!(
                "first mask {}x{} is smaller than feature grid {}x{}",
                first_mask.height(),
                first_mask.width(),
                first.height(),
                first.width()
            )));
        }
        let soft = downsample_mask(first_mask, first.height(), first.width())?;
        let mut memory = MemoryQueue::new(&cfg);
        memory.push(first.normalized(), soft)?;
        Ok(Self {
            cfg,
            memory,
            mask_height: first_mask.height(),
            mask_width: first_mask.width(),
            height: first.height(),
            width: first.width(),
            channels: first.channels(),
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn memory(&self) -> &MemoryQueue {
        &self.memory
    }

    pub fn step(&mut self, features: &FeatureMap) -> Result<StepOutput> {
        if features.height() != self.height
            || features.width() != self.width
            || features.channels() != self.channels
        {
            return Err(Error::Dimension(format!(
                "frame is {}x{}x{}, expected {}x{}x{}",
                features.height(),
                features.width(),
                features.channels(),
                self.height,
                self.width,
                self.channels
            )));
        }
        let normalized = features.normalized();
        let soft = propagate_windowed(&normalized, &self.memory, &self.cfg)?;
        let labels = upsample_soft_mask(&soft, self.mask_height, self.mask_width)?.argmax();
        self.memory.push(normalized, soft.clone())?;
        Ok(StepOutput { soft, labels })
    }
}

#[derive(Debug, Clone)]
pub struct TrackOutput {
    /// Masks for frames 2..N.
    pub masks: Vec<LabelMask>,
    pub frame_times: Vec<Duration>,
}

/// Propagates `first_mask` through `features[1..]`. Returns one mask per
/// frame after the first, at the first mask's resolution.
pub fn track_video(
    features: &[FeatureMap],
    first_mask: &LabelMask,
    cfg: &TrackerConfig,
) -> Result<Vec<LabelMask>> {
    track_video_timed(features, first_mask, cfg).map(|o| o.masks)
}

pub fn track_video_timed(
    features: &[FeatureMap],
    first_mask: &LabelMask,
    cfg: &TrackerConfig,
) -> Result<TrackOutput> {
    cfg.validate()?;
    let Some((first, rest)) = features.split_first() else {
        return Err(Error::Dimension("no frames to track".into()));
    };
    let mut tracker = Tracker::new(cfg.clone(), first, first_mask)?;
    let mut masks = Vec::with_capacity(rest.len());
    let mut frame_times = Vec::with_capacity(rest.len());
    for frame in rest {
        let start = Instant::now();
        masks.push(tracker.step(frame)?.labels);
        frame_times.push(start.elapsed());
    }
    Ok(TrackOutput { masks, frame_times })
}

/// Runs [`track_video`] on a dedicated pool of `threads` workers.
pub fn track_video_with_threads(
    features: &[FeatureMap],
    first_mask: &LabelMask,
    cfg: &TrackerConfig,
    threads: usize,
) -> Result<Vec<LabelMask>> {
    with_threads(threads, || track_video(features, first_mask, cfg))
}

/// Runs `f` inside a rayon pool of `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
