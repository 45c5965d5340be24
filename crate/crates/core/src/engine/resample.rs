//! Moving masks between image resolution and the feature grid.

use crate::error::{Error, Result};
use crate::tensor::{LabelMask, SoftMask};

/// One-hot encodes `full` and area-pools each class channel onto a
/// `height × width` grid. Integer ratios reduce to plain average pooling.
pub fn downsample_mask(full: &LabelMask, height: usize, width: usize) -> Result<SoftMask> {
    let (fh, fw) = (full.height(), full.width());
    if height == 0 || width == 0 || fh < height || fw < width {
        return Err(Error::Dimension(format!(
            "cannot pool {fh}x{fw} mask onto {height}x{width} grid"
        )));
    }
    let k = full.num_classes() as usize;
    if fh == height && fw == width {
        return Ok(full.to_one_hot());
    }
    let mut data = vec![0.0; height * width * k];
    if fh % height == 0 && fw % width == 0 {
        let (sy, sx) = (fh / height, fw / width);
        let inv = 1.0 / (sy * sx) as f64;
        for y in 0..fh {
            for x in 0..fw {
                let cell = (y / sy) * width + x / sx;
                data[cell * k + full.get(y, x) as usize] += inv;
            }
        }
    } else {
        let rows = overlap_weights(fh, height);
        let cols = overlap_weights(fw, width);
        for (ty, row_w) in rows.iter().enumerate() {
            for (tx, col_w) in cols.iter().enumerate() {
                let cell = &mut data[(ty * width + tx) * k..(ty * width + tx + 1) * k];
                let mut total = 0.0;
                for &(sy, wy) in row_w {
                    for &(sx, wx) in col_w {
                        let w = wy * wx;
                        cell[full.get(sy, sx) as usize] += w;
                        total += w;
                    }
                }
                cell.iter_mut().for_each(|v| *v /= total);
            }
        }
    }
    Ok(SoftMask::from_raw(height, width, k, data))
}

/// For each target cell, the source indices overlapping it and the overlap
/// length in source units.
fn overlap_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|t| {
            let lo = t as f64 * scale;
            let hi = (t + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .filter_map(|s| {
                    let w = (hi.min((s + 1) as f64) - lo.max(s as f64)).max(0.0);
                    (w > 0.0).then_some((s, w))
                })
                .collect()
        })
        .collect()
}

/// Bilinear upsampling per class channel with half-pixel centres and edge
/// clamping. Rows stay convex combinations, so per-pixel sums are preserved.
pub fn upsample_soft_mask(soft: &SoftMask, height: usize, width: usize) -> Result<SoftMask> {
    let (sh, sw, k) = (soft.height(), soft.width(), soft.classes());
    if height < sh || width < sw {
        return Err(Error::Dimension(format!(
            "cannot upsample {sh}x{sw} soft mask to {height}x{width}"
        )));
    }
    if height == sh && width == sw {
        return Ok(soft.clone());
    }
    let ys = taps(sh, height);
    let xs = taps(sw, width);
    let mut data = vec![0.0; height * width * k];
    for (y, &(y0, y1, fy)) in ys.iter().enumerate() {
        for (x, &(x0, x1, fx)) in xs.iter().enumerate() {
            let out = &mut data[(y * width + x) * k..(y * width + x + 1) * k];
            let (p00, p01) = (soft.pixel(y0, x0), soft.pixel(y0, x1));
            let (p10, p11) = (soft.pixel(y1, x0), soft.pixel(y1, x1));
            for c in 0..k {
                let top = p00[c] + (p01[c] - p00[c]) * fx;
                let bottom = p10[c] + (p11[c] - p10[c]) * fx;
                out[c] = (top + (bottom - top) * fy).clamp(0.0, 1.0);
            }
        }
    }
    Ok(SoftMask::from_raw(height, width, k, data))
}

fn taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let pos = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = pos.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, pos - i0 as f64)
        })
        .collect()
}
