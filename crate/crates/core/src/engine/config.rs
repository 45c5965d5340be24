use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How predicted masks are stored in the memory queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryMode {
    /// One-hot of the per-pixel argmax.
    #[default]
    Hard,
    /// Propagated class scores as-is.
    Soft,
}

impl std::str::FromStr for MemoryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(MemoryMode::Hard),
            "soft" => Ok(MemoryMode::Soft),
            other => Err(Error::Config(format!(
                "unknown memory mode {other:?} (expected hard or soft)"
            ))),
        }
    }
}

/// Tracking hyperparameters. Defaults: temperature 0.2, window 50 feature
/// pixels, 10 memory frames, hard masks, no first-frame anchor.
///
/// Ties in the final argmax always resolve to the lowest class index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub tau: f64,
    pub window: usize,
    pub memory: usize,
    pub memory_mode: MemoryMode,
    pub anchor_first_frame: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            tau: 0.2,
            window: 50,
            memory: 10,
            memory_mode: MemoryMode::Hard,
            anchor_first_frame: false,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be > 0, got {}", self.tau)));
        }
        if self.memory == 0 {
            return Err(Error::Config("memory must be >= 1".into()));
        }
        if self.anchor_first_frame && self.memory < 2 {
            return Err(Error::Config(
                "anchor_first_frame needs memory >= 2".into(),
            ));
        }
        Ok(())
    }
}
