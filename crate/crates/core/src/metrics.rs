//! Segmentation scores: per-class Jaccard, pixel and boundary F-measures,
//! pixel accuracy, and the frame → video → dataset aggregation.
//!
//! Per-class values are `None` when a class is absent from both masks (or,
//! for the boundary measure, has no boundary in either), and such classes
//! are left out of every mean.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::LabelMask;

pub type ClassScores = Vec<Option<f64>>;

fn check_dims(pred: &LabelMask, gt: &LabelMask) -> Result<()> {
    if !pred.same_dims(gt) {
        return Err(Error::Dimension(format!(
            "prediction is {}x{}, ground truth is {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    Ok(())
}

/// `(tp, fp, fn)` per class.
fn confusion(pred: &LabelMask, gt: &LabelMask, k: usize) -> Vec<(u64, u64, u64)> {
    let mut counts = vec![(0u64, 0u64, 0u64); k];
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        let (p, g) = (p as usize, g as usize);
        if p == g {
            if p < k {
                counts[p].0 += 1;
            }
        } else {
            if p < k {
                counts[p].1 += 1;
            }
            if g < k {
                counts[g].2 += 1;
            }
        }
    }
    counts
}

pub fn jaccard_per_class(pred: &LabelMask, gt: &LabelMask, k: usize) -> Result<ClassScores> {
    check_dims(pred, gt)?;
    Ok(confusion(pred, gt, k)
        .into_iter()
        .map(|(tp, fp, fn_)| {
            let union = tp + fp + fn_;
            (union > 0).then(|| tp as f64 / union as f64)
        })
        .collect())
}

/// Per-class F1 over pixels: `2·TP / (2·TP + FP + FN)`.
pub fn pixel_f_score(pred: &LabelMask, gt: &LabelMask, k: usize) -> Result<ClassScores> {
    check_dims(pred, gt)?;
    Ok(confusion(pred, gt, k)
        .into_iter()
        .map(|(tp, fp, fn_)| {
            let denom = 2 * tp + fp + fn_;
            (denom > 0).then(|| 2.0 * tp as f64 / denom as f64)
        })
        .collect())
}

pub fn pixel_accuracy(pred: &LabelMask, gt: &LabelMask) -> Result<f64> {
    check_dims(pred, gt)?;
    let hits = pred
        .labels()
        .iter()
        .zip(gt.labels())
        .filter(|(p, g)| p == g)
        .count();
    Ok(hits as f64 / gt.labels().len() as f64)
}

/// Pixels of class `c` with a 4-neighbour of a different label.
fn boundary(mask: &LabelMask, c: u16) -> Vec<bool> {
    let (h, w) = (mask.height(), mask.width());
    let mut out = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            if mask.get(y, x) != c {
                continue;
            }
            let differs = (y > 0 && mask.get(y - 1, x) != c)
                || (y + 1 < h && mask.get(y + 1, x) != c)
                || (x > 0 && mask.get(y, x - 1) != c)
                || (x + 1 < w && mask.get(y, x + 1) != c);
            out[y * w + x] = differs;
        }
    }
    out
}

/// Square (Chebyshev) dilation by `r`, done separably.
fn dilate(map: &[bool], h: usize, w: usize, r: usize) -> Vec<bool> {
    if r == 0 {
        return map.to_vec();
    }
    let mut rows = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            rows[y * w + x] = map[y * w + lo..=y * w + hi].iter().any(|&b| b);
        }
    }
    let mut out = vec![false; h * w];
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        for x in 0..w {
            out[y * w + x] = (lo..=hi).any(|yy| rows[yy * w + x]);
        }
    }
    out
}

/// Contour F-measure per class: boundary pixels match when a boundary pixel
/// of the other mask lies within Chebyshev distance `tolerance`.
pub fn boundary_f_score(
    pred: &LabelMask,
    gt: &LabelMask,
    k: usize,
    tolerance: usize,
) -> Result<ClassScores> {
    check_dims(pred, gt)?;
    let (h, w) = (gt.height(), gt.width());
    Ok((0..k)
        .map(|c| {
            let pb = boundary(pred, c as u16);
            let gb = boundary(gt, c as u16);
            let (np, ng) = (
                pb.iter().filter(|&&b| b).count(),
                gb.iter().filter(|&&b| b).count(),
            );
            if np == 0 && ng == 0 {
                return None;
            }
            if np == 0 || ng == 0 {
                return Some(0.0);
            }
            let gd = dilate(&gb, h, w, tolerance);
            let pd = dilate(&pb, h, w, tolerance);
            let mp = pb.iter().zip(&gd).filter(|(&b, &d)| b && d).count();
            let mg = gb.iter().zip(&pd).filter(|(&b, &d)| b && d).count();
            let precision = mp as f64 / np as f64;
            let recall = mg as f64 / ng as f64;
            Some(if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            })
        })
        .collect())
}

/// Mean over classes that have a value.
pub fn mean_present(scores: &[Option<f64>]) -> Option<f64> {
    let present: Vec<f64> = scores.iter().flatten().copied().collect();
    (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
#[derive(Default)]
pub enum FVariant {
    #[default]
    Pixel,
    Boundary { tolerance: usize },
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub index: u64,
    pub jaccard: ClassScores,
    pub f_score: ClassScores,
    pub pixel_accuracy: f64,
    /// Classes present in the ground truth.
    pub gt_classes: Vec<u16>,
}

impl FrameScore {
    pub fn j_mean(&self) -> Option<f64> {
        mean_present(&self.jaccard)
    }

    pub fn f_mean(&self) -> Option<f64> {
        mean_present(&self.f_score)
    }
}

pub fn score_frame(
    index: u64,
    pred: &LabelMask,
    gt: &LabelMask,
    k: usize,
    variant: FVariant,
) -> Result<FrameScore> {
    let jaccard = jaccard_per_class(pred, gt, k)?;
    let f_score = match variant {
        FVariant::Pixel => pixel_f_score(pred, gt, k)?,
        FVariant::Boundary { tolerance } => boundary_f_score(pred, gt, k, tolerance)?,
    };
    let mut present = vec![false; k.max(gt.num_classes() as usize)];
    for &l in gt.labels() {
        present[l as usize] = true;
    }
    let gt_classes = (0..present.len() as u16)
        .filter(|&c| present[c as usize])
        .collect();
    Ok(FrameScore {
        index,
        jaccard,
        f_score,
        pixel_accuracy: pixel_accuracy(pred, gt)?,
        gt_classes,
    })
}

/// Frame scores of one video. Frames whose index equals `first_index` carry
/// the given first-frame mask and are not scored.
#[derive(Debug, Clone)]
pub struct VideoScores {
    pub id: String,
    pub first_index: u64,
    pub frames: Vec<FrameScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub j_mean: Option<f64>,
    pub f_mean: Option<f64>,
    pub pixel_accuracy: Option<f64>,
    pub videos: usize,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoReport {
    pub id: String,
    pub j_mean: Option<f64>,
    pub f_mean: Option<f64>,
    pub pixel_accuracy: Option<f64>,
    pub frames: Vec<FrameScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default)]
    pub config: serde_json::Value,
    pub dataset: Summary,
    pub videos: Vec<VideoReport>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Per-video means over scored frames, then an unweighted mean over videos.
/// Videos with nothing to score are dropped with a warning.
pub fn aggregate(videos: &[VideoScores]) -> Result<EvalReport> {
    let mut warnings = Vec::new();
    let mut reports = Vec::new();
    for video in videos {
        let frames: Vec<FrameScore> = video
            .frames
            .iter()
            .filter(|f| f.index != video.first_index)
            .cloned()
            .collect();
        if frames.is_empty() {
            warnings.push(format!(
                "video {} has no frames after the first; excluded",
                video.id
            ));
            continue;
        }
        reports.push(VideoReport {
            id: video.id.clone(),
            j_mean: mean(frames.iter().map(FrameScore::j_mean)),
            f_mean: mean(frames.iter().map(FrameScore::f_mean)),
            pixel_accuracy: mean(frames.iter().map(|f| Some(f.pixel_accuracy))),
            frames,
        });
    }
    if reports.is_empty() {
        return Err(Error::Dimension("no frames to evaluate".into()));
    }
    let dataset = Summary {
        j_mean: mean(reports.iter().map(|v| v.j_mean)),
        f_mean: mean(reports.iter().map(|v| v.f_mean)),
        pixel_accuracy: mean(reports.iter().map(|v| v.pixel_accuracy)),
        videos: reports.len(),
        frames: reports.iter().map(|v| v.frames.len()).sum(),
    };
    Ok(EvalReport {
        config: serde_json::Value::Null,
        dataset,
        videos: reports,
        warnings,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

impl EvalReport {
    /// One row per scored frame: `video,frame,j_mean,f_mean,pixel_accuracy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("video,frame,j_mean,f_mean,pixel_accuracy\n");
        for v in &self.videos {
            for f in &v.frames {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:.6}",
                    v.id,
                    f.index,
                    fmt_opt(f.j_mean()),
                    fmt_opt(f.f_mean()),
                    f.pixel_accuracy
                );
            }
        }
        out
    }

    pub fn summary_line(&self) -> String {
        format!(
            "J_m {} F_m {} P_acc {} ({} {}, {} {})",
            fmt_opt(self.dataset.j_mean),
            fmt_opt(self.dataset.f_mean),
            fmt_opt(self.dataset.pixel_accuracy),
            self.dataset.videos,
            plural(self.dataset.videos, "video"),
            self.dataset.frames,
            plural(self.dataset.frames, "frame"),
        )
    }
}

fn plural(n: usize, noun: &str) -> String {
    if n == 1 {
        noun.to_string()
    } else {
        format!("{noun}s")
    }
}
