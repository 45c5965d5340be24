//! Dense per-frame grids: feature maps, hard label masks and soft masks.
//!
//! All three are stored row-major with the innermost axis (channel or class)
//! fastest, so pixel `(y, x)` owns the contiguous slice starting at
//! `(y * width + x) * depth`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One frame's dense feature grid, `height × width × channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Dimension(format!(
                "feature map dims must be >= 1, got {height}x{width}x{channels}"
            )));
        }
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "feature map {height}x{width}x{channels} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::new(height, width, channels, vec![0.0; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> &[f32] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn pixels(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.channels)
    }

    pub fn same_grid(&self, other: &FeatureMap) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }

    /// Scales each pixel vector to unit L2 norm. Pixels whose norm is below
    /// `1e-12` become the zero vector.
    pub fn normalized(&self) -> FeatureMap {
        let mut data = vec![0.0f32; self.data.len()];
        for (src, dst) in self
            .data
            .chunks_exact(self.channels)
            .zip(data.chunks_exact_mut(self.channels))
        {
            let norm = src
                .iter()
                .map(|&v| f64::from(v) * f64::from(v))
                .sum::<f64>()
                .sqrt();
            if norm >= 1e-12 {
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = (f64::from(s) / norm) as f32;
                }
            }
        }
        FeatureMap {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data,
        }
    }
}

/// Convenience wrapper around [`FeatureMap::normalized`].
pub fn normalize_features(grid: &FeatureMap) -> FeatureMap {
    grid.normalized()
}

/// Hard per-pixel class labels in `[0, num_classes)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelMask {
    height: usize,
    width: usize,
    num_classes: u16,
    labels: Vec<u16>,
}

impl LabelMask {
    pub fn new(height: usize, width: usize, num_classes: u16, labels: Vec<u16>) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::Config("num_classes must be >= 1".into()));
        }
        if height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "mask dims must be >= 1, got {height}x{width}"
            )));
        }
        if labels.len() != height * width {
            return Err(Error::Dimension(format!(
                "mask {height}x{width} needs {} labels, got {}",
                height * width,
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::LabelOutOfRange { label, num_classes });
        }
        Ok(Self {
            height,
            width,
            num_classes,
            labels,
        })
    }

    pub fn filled(height: usize, width: usize, num_classes: u16, label: u16) -> Result<Self> {
        Self::new(height, width, num_classes, vec![label; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_classes(&self) -> u16 {
        self.num_classes
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u16 {
        self.labels[y * self.width + x]
    }

    pub fn same_dims(&self, other: &LabelMask) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Applies `perm[old] = new` to every label.
    pub fn permuted(&self, perm: &[u16]) -> Result<LabelMask> {
        if perm.len() != self.num_classes as usize {
            return Err(Error::ClassCount {
                expected: self.num_classes as usize,
                found: perm.len(),
            });
        }
        let labels = self.labels.iter().map(|&l| perm[l as usize]).collect();
        LabelMask::new(self.height, self.width, self.num_classes, labels)
    }

    pub fn to_one_hot(&self) -> SoftMask {
        let k = self.num_classes as usize;
        let mut data = vec![0.0; self.labels.len() * k];
        for (i, &l) in self.labels.iter().enumerate() {
            data[i * k + l as usize] = 1.0;
        }
        SoftMask {
            height: self.height,
            width: self.width,
            classes: k,
            data,
        }
    }
}

/// Per-pixel nonnegative class scores, `height × width × classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask {
    height: usize,
    width: usize,
    classes: usize,
    data: Vec<f64>,
}

impl SoftMask {
    pub fn new(height: usize, width: usize, classes: usize, data: Vec<f64>) -> Result<Self> {
        if classes == 0 || height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "soft mask dims must be >= 1, got {height}x{width}x{classes}"
            )));
        }
        if data.len() != height * width * classes {
            return Err(Error::Dimension(format!(
                "soft mask {height}x{width}x{classes} needs {} values, got {}",
                height * width * classes,
                data.len()
            )));
        }
        if data.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(
                "soft mask scores must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            height,
            width,
            classes,
            data,
        })
    }

    pub(crate) fn from_raw(height: usize, width: usize, classes: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * classes);
        Self {
            height,
            width,
            classes,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> &[f64] {
        let start = (y * self.width + x) * self.classes;
        &self.data[start..start + self.classes]
    }

    pub fn pixels(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.classes)
    }

    /// Per-pixel class of maximal score; exact ties go to the lowest index.
    pub fn argmax(&self) -> LabelMask {
        let labels = self.pixels().map(argmax_row).collect();
        LabelMask {
            height: self.height,
            width: self.width,
            num_classes: self.classes as u16,
            labels,
        }
    }

    /// Replaces every pixel by the one-hot encoding of its argmax.
    pub fn hardened(&self) -> SoftMask {
        self.argmax().to_one_hot()
    }
}

#[inline]
pub(crate) fn argmax_row(row: &[f64]) -> u16 {
    let mut best = 0;
    for (c, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = c;
        }
    }
    best as u16
}

/// Free-function form of [`SoftMask::argmax`].
pub fn argmax_labels(soft: &SoftMask) -> LabelMask {
    soft.argmax()
}
