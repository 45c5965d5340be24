//! Synthetic sequences with analytic ground truth.
//!
//! Frame 1 is a class-0 background holding `K - 1` vertical object strips.
//! Every later frame translates the label field by a fixed per-frame motion;
//! uncovered pixels become background. Each pixel's feature is the standard
//! basis vector of its class plus optional Gaussian noise.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{
    write_feature_map, write_manifest, write_mask, DatasetManifest, FrameEntry, PaletteEntry,
    VideoEntry, FEATURE_EXT, MASK_EXT,
};
use crate::tensor::{FeatureMap, LabelMask};

pub const SYNTH_VIDEO_ID: &str = "synth";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub num_classes: u16,
    pub frames: usize,
    pub noise: f64,
    /// Per-frame translation `(dy, dx)` in feature pixels.
    pub motion: (i64, i64),
    pub seed: u64,
    /// Masks are emitted at `mask_scale` times the feature resolution.
    #[serde(default = "one")]
    pub mask_scale: usize,
}

fn one() -> usize {
    1
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            height: 32,
            width: 32,
            channels: 8,
            num_classes: 4,
            frames: 10,
            noise: 0.0,
            motion: (1, 1),
            seed: 0,
            mask_scale: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.height == 0 || self.width == 0 || self.channels == 0 || self.frames == 0 {
            return bad("height, width, channels and frames must be >= 1".into());
        }
        if self.num_classes == 0 || self.num_classes as usize > self.channels {
            return bad(format!(
                "need 1 <= classes <= channels, got {} classes for {} channels",
                self.num_classes, self.channels
            ));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return bad(format!("noise must be >= 0, got {}", self.noise));
        }
        if self.mask_scale == 0 {
            return bad("mask_scale must be >= 1".into());
        }
        let travel = |d: i64| d.unsigned_abs() as usize * (self.frames - 1);
        if travel(self.motion.0) >= self.height || travel(self.motion.1) >= self.width {
            return bad(format!(
                "motion {:?} over {} frames leaves the {}x{} grid",
                self.motion, self.frames, self.height, self.width
            ));
        }
        let objects = self.num_classes as usize - 1;
        if objects > 0 {
            let (rows, cols) = self.object_region();
            if rows.is_empty() || cols.len() < objects {
                return bad(format!(
                    "{}x{} grid too small for {objects} objects with motion {:?}",
                    self.height, self.width, self.motion
                ));
            }
        }
        Ok(())
    }

    /// Rows and columns of frame 1 that hold objects.
    fn object_region(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let span = |extent: usize, d: i64| {
            let travel = d.unsigned_abs() as usize * (self.frames - 1);
            let start = if d < 0 { travel } else { 0 };
            let len = extent - travel;
            let margin = len / 8;
            start + margin..start + len - margin
        };
        (
            span(self.height, self.motion.0),
            span(self.width, self.motion.1),
        )
    }

    fn base_label(&self, y: usize, x: usize) -> u16 {
        let objects = self.num_classes as usize - 1;
        if objects == 0 {
            return 0;
        }
        let (rows, cols) = self.object_region();
        if !rows.contains(&y) || !cols.contains(&x) {
            return 0;
        }
        let strip = (x - cols.start) * objects / cols.len();
        strip as u16 + 1
    }

    /// Ground-truth label of feature pixel `(y, x)` in 0-based frame `t`.
    pub fn label_at(&self, t: usize, y: usize, x: usize) -> u16 {
        let sy = y as i64 - t as i64 * self.motion.0;
        let sx = x as i64 - t as i64 * self.motion.1;
        if sy < 0 || sx < 0 || sy >= self.height as i64 || sx >= self.width as i64 {
            0
        } else {
            self.base_label(sy as usize, sx as usize)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthSequence {
    pub features: Vec<FeatureMap>,
    /// Ground truth at `mask_scale` times the feature resolution.
    pub masks: Vec<LabelMask>,
}

pub fn gen_sequence(cfg: &SynthConfig) -> Result<SynthSequence> {
    cfg.validate()?;
    let (h, w, c, s) = (cfg.height, cfg.width, cfg.channels, cfg.mask_scale);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut features = Vec::with_capacity(cfg.frames);
    let mut masks = Vec::with_capacity(cfg.frames);
    for t in 0..cfg.frames {
        let labels: Vec<u16> = (0..h * w).map(|i| cfg.label_at(t, i / w, i % w)).collect();
        let mut data = vec![0.0f32; h * w * c];
        for (px, &l) in data.chunks_exact_mut(c).zip(&labels) {
            px[l as usize] = 1.0;
            if cfg.noise > 0.0 {
                for v in px.iter_mut() {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    *v += (cfg.noise * n) as f32;
                }
            }
        }
        features.push(FeatureMap::new(h, w, c, data)?);
        let full: Vec<u16> = (0..h * s * w * s)
            .map(|i| labels[(i / (w * s)) / s * w + (i % (w * s)) / s])
            .collect();
        masks.push(LabelMask::new(h * s, w * s, cfg.num_classes, full)?);
    }
    Ok(SynthSequence { features, masks })
}

const PALETTE: [[u8; 3]; 8] = [
    [0, 0, 0],
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
];

/// Writes `seq` as a self-contained dataset under `dir`: feature and mask
/// files, `manifest.json` and a `synth.json` sidecar echoing `cfg`.
pub fn write_dataset(dir: &Path, cfg: &SynthConfig, seq: &SynthSequence) -> Result<PathBuf> {
    let mut frames = Vec::with_capacity(seq.features.len());
    for (t, (feat, mask)) in seq.features.iter().zip(&seq.masks).enumerate() {
        let fpath = PathBuf::from(format!("features/{SYNTH_VIDEO_ID}/{t:05}.{FEATURE_EXT}"));
        let mpath = PathBuf::from(format!("masks/{SYNTH_VIDEO_ID}/{t:05}.{MASK_EXT}"));
        write_feature_map(dir.join(&fpath), feat)?;
        write_mask(dir.join(&mpath), mask, cfg.num_classes)?;
        frames.push(FrameEntry {
            index: t as u64,
            image: None,
            features: fpath,
            mask: Some(mpath),
        });
    }
    let palette = (0..cfg.num_classes)
        .map(|id| PaletteEntry {
            id,
            name: if id == 0 {
                "background".into()
            } else {
                format!("object{id}")
            },
            color: PALETTE[id as usize % PALETTE.len()],
        })
        .collect();
    let manifest = DatasetManifest {
        dataset: "synth".into(),
        palette,
        videos: vec![VideoEntry {
            id: SYNTH_VIDEO_ID.into(),
            frames,
        }],
    };
    let path = dir.join("manifest.json");
    write_manifest(&path, &manifest)?;
    let sidecar = serde_json::to_string_pretty(cfg)? + "\n";
    std::fs::write(dir.join("synth.json"), sidecar).map_err(|e| Error::io(dir, e))?;
    Ok(path)
}
