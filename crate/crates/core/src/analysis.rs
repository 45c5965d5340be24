//! Feature inspection: principal-component RGB rendering and a per-class
//! temporal consistency score.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{FeatureMap, LabelMask};

/// Top principal directions of pixel features, fit jointly over frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    pub mean: Vec<f64>,
    /// Unit directions, strongest first. Each direction's largest-magnitude
    /// coordinate is positive.
    pub directions: Vec<Vec<f64>>,
    /// Fraction of total variance along each direction.
    pub explained: Vec<f64>,
}

impl PcaBasis {
    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn project(&self, v: &[f32]) -> Vec<f64> {
        self.directions
            .iter()
            .map(|d| {
                d.iter()
                    .zip(v.iter().zip(&self.mean))
                    .map(|(a, (&x, m))| a * (f64::from(x) - m))
                    .sum()
            })
            .collect()
    }

    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (d, &a) in self.directions.iter().zip(coords) {
            for (o, &v) in out.iter_mut().zip(d) {
                *o += a * v;
            }
        }
        out
    }
}

const CHUNK: usize = 4096;

/// Fits the top-`k` eigenvectors of the pixel feature covariance over every
/// pixel of every grid.
pub fn fit_pca(grids: &[FeatureMap], k: usize) -> Result<PcaBasis> {
    let first = grids
        .first()
        .ok_or_else(|| Error::Config("no feature maps to fit".into()))?;
    let c = first.channels();
    if grids.iter().any(|g| g.channels() != c) {
        return Err(Error::Dimension("feature maps differ in channel count".into()));
    }
    let n: usize = grids.iter().map(FeatureMap::num_pixels).sum();
    if k == 0 || c < k || n < k {
        return Err(Error::Config(format!(
            "need k >= 1, channels >= k and pixels >= k (k={k}, channels={c}, pixels={n})"
        )));
    }

    let mut mean = vec![0.0f64; c];
    for px in grids.iter().flat_map(|g| g.pixels()) {
        for (m, &v) in mean.iter_mut().zip(px) {
            *m += f64::from(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = DMatrix::<f64>::zeros(c, c);
    let mut pixels = grids.iter().flat_map(|g| g.pixels()).peekable();
    while pixels.peek().is_some() {
        let block: Vec<&[f32]> = pixels.by_ref().take(CHUNK).collect();
        let centered = DMatrix::from_fn(block.len(), c, |r, j| f64::from(block[r][j]) - mean[j]);
        cov += centered.transpose() * &centered;
    }
    cov /= n as f64;

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0)).sum();

    let mut directions = Vec::with_capacity(k);
    let mut explained = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let mut d: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let lead = d
            .iter()
            .enumerate()
            .fold(0, |best, (j, v)| if v.abs() > d[best].abs() { j } else { best });
        if d[lead] < 0.0 {
            d.iter_mut().for_each(|v| *v = -*v);
        }
        directions.push(d);
        let lambda = eig.eigenvalues[i].max(0.0);
        explained.push(if total > 0.0 { lambda / total } else { 0.0 });
    }
    Ok(PcaBasis {
        mean,
        directions,
        explained,
    })
}

/// `height × width` RGB image with channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl RgbImage {
    /// Binary PPM (P6), 8 bits per channel.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(
            self.data
                .iter()
                .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
        out
    }
}

/// Projects every pixel onto the first three directions and min-max
/// normalizes each channel over the image. Channels without spread, or
/// without a direction, render as 0.
pub fn render_pca_rgb(grid: &FeatureMap, basis: &PcaBasis) -> Result<RgbImage> {
    if grid.channels() != basis.channels() {
        return Err(Error::Dimension(format!(
            "grid has {} channels, basis expects {}",
            grid.channels(),
            basis.channels()
        )));
    }
    let proj: Vec<Vec<f64>> = grid.pixels().map(|px| basis.project(px)).collect();
    let mut data = vec![0.0f32; grid.num_pixels() * 3];
    for ch in 0..basis.directions.len().min(3) {
        let (lo, hi) = proj.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p[ch]), hi.max(p[ch]))
        });
        let range = hi - lo;
        if range <= 1e-12 {
            continue;
        }
        for (i, p) in proj.iter().enumerate() {
            data[i * 3 + ch] = ((p[ch] - lo) / range) as f32;
        }
    }
    Ok(RgbImage {
        height: grid.height(),
        width: grid.width(),
        data,
    })
}

/// Per class, the mean cosine similarity between that class's mean feature
/// in consecutive frames. Pairs where the class is missing from either frame
/// are skipped; classes with no usable pair are `None`.
pub fn temporal_consistency_score(
    grids: &[FeatureMap],
    masks: &[LabelMask],
) -> Result<Vec<Option<f64>>> {
    if grids.len() != masks.len() {
        return Err(Error::Dimension(format!(
            "{} feature maps but {} masks",
            grids.len(),
            masks.len()
        )));
    }
    let k = masks.iter().map(|m| m.num_classes() as usize).max().unwrap_or(0);
    let mut means: Vec<Vec<Option<Vec<f64>>>> = Vec::with_capacity(grids.len());
    for (g, m) in grids.iter().zip(masks) {
        if g.height() != m.height() || g.width() != m.width() {
            return Err(Error::Dimension(format!(
                "mask {}x{} does not align with features {}x{}",
                m.height(),
                m.width(),
                g.height(),
                g.width()
            )));
        }
        let c = g.channels();
        let mut sums = vec![vec![0.0f64; c]; k];
        let mut counts = vec![0usize; k];
        for (px, &l) in g.pixels().zip(m.labels()) {
            counts[l as usize] += 1;
            for (s, &v) in sums[l as usize].iter_mut().zip(px) {
                *s += f64::from(v);
            }
        }
        means.push(
            sums.into_iter()
                .zip(counts)
                .map(|(s, n)| (n > 0).then(|| s.into_iter().map(|v| v / n as f64).collect()))
                .collect(),
        );
    }
    Ok((0..k)
        .map(|class| {
            let sims: Vec<f64> = means
                .windows(2)
                .filter_map(|pair| {
                    let a = pair[0][class].as_ref()?;
                    let b = pair[1][class].as_ref()?;
                    cosine(a, b)
                })
                .collect();
            (!sims.is_empty()).then(|| sims.iter().sum::<f64>() / sims.len() as f64)
        })
        .collect())
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (na > 0.0 && nb > 0.0).then(|| (dot / (na * nb)).clamp(-1.0, 1.0))
}
