use std::collections::VecDeque;

use crate::engine::config::{MemoryMode, TrackerConfig};
use crate::error::{Error, Result};
use crate::tensor::{FeatureMap, SoftMask};

#[derive(Debug, Clone)]
pub struct MemoryEntry {
    pub frame: usize,
    pub features: FeatureMap,
    pub mask: SoftMask,
}

/// Bounded FIFO of past (features, mask) pairs, oldest first.
#[derive(Debug, Clone)]
pub struct MemoryQueue {
    capacity: usize,
    mode: MemoryMode,
    anchor_first: bool,
    next_frame: usize,
    entries: VecDeque<MemoryEntry>,
}

impl MemoryQueue {
    pub fn new(cfg: &TrackerConfig) -> Self {
        Self {
            capacity: cfg.memory.max(1),
            mode: cfg.memory_mode,
            anchor_first: cfg.anchor_first_frame,
            next_frame: 0,
            entries: VecDeque::with_capacity(cfg.memory.max(1) + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl ExactSizeIterator<Item = &MemoryEntry> {
        self.entries.iter()
    }

    pub fn get(&self, i: usize) -> Option<&MemoryEntry> {
        self.entries.get(i)
    }

    pub fn frames(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.frame).collect()
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.entries.front().map(|e| e.mask.classes())
    }

    /// Appends the next frame. `features` are stored as given; callers are
    /// expected to pass normalized features. In hard mode the mask is
    /// replaced by the one-hot of its argmax before storage.
    pub fn push(&mut self, features: FeatureMap, mask: SoftMask) -> Result<()> {
        if features.height() != mask.height() || features.width() != mask.width() {
            return Err(Error::Dimension(format!(
                "mask {}x{} does not match features {}x{}",
                mask.height(),
                mask.width(),
                features.height(),
                features.width()
            )));
        }
        let mask = match self.mode {
            MemoryMode::Hard => mask.hardened(),
            MemoryMode::Soft => mask,
        };
        self.entries.push_back(MemoryEntry {
            frame: self.next_frame,
            features,
            mask,
        });
        self.next_frame += 1;
        while self.entries.len() > self.capacity {
            let pinned = self.anchor_first
                && self.entries.front().is_some_and(|e| e.frame == 0)
                && self.capacity >= 2;
            if pinned {
                self.entries.remove(1);
            } else {
                self.entries.pop_front();
            }
        }
        Ok(())
    }
}

/// Functional form of [`MemoryQueue::push`].
pub fn update_memory(
    mut queue: MemoryQueue,
    features: FeatureMap,
    mask: SoftMask,
) -> Result<MemoryQueue> {
    queue.push(features, mask)?;
    Ok(queue)
}
