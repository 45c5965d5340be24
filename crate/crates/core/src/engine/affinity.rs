//! Windowed exponential affinity between a query frame and the memory queue,
//! and label propagation through it.
//!
//! Affinities are never materialized densely. Each query pixel owns a
//! contiguous run of weights, ordered by memory frame (oldest first), then
//! reference row, then reference column. Queries are processed in tiles of
//! eight neighbours from one image row, one query per vector lane; a tile
//! reads the union of its queries' windows and masks out what a query does
//! not admit.

use std::ops::Range;

use rayon::prelude::*;

use crate::engine::config::TrackerConfig;
use crate::engine::kernel::{tile_dots, tile_exp, tile_exp_propagate, DotTile, Lanes, LANES};
use crate::engine::memory::MemoryQueue;
use crate::engine::window::SpatialWindowMask;
use crate::error::{Error, Result};
use crate::tensor::{FeatureMap, SoftMask};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinityEntry {
    /// Position in the memory queue at the time of computation.
    pub frame: u32,
    /// Row-major reference pixel index.
    pub pixel: u32,
    pub weight: f64,
}

/// Per-query sparse affinity lists; entries outside the window are absent.
#[derive(Debug, Clone)]
pub struct WindowedAffinity {
    height: usize,
    width: usize,
    frames: usize,
    offsets: Vec<usize>,
    entries: Vec<AffinityEntry>,
}

impl WindowedAffinity {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_frames(&self) -> usize {
        self.frames
    }

    pub fn num_queries(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_entries(&self) -> usize {
        self.entries.len()
    }

    /// Entries for row-major query pixel `q`.
    pub fn row(&self, q: usize) -> &[AffinityEntry] {
        &self.entries[self.offsets[q]..self.offsets[q + 1]]
    }
}

fn check_inputs(query: &FeatureMap, memory: &MemoryQueue) -> Result<()> {
    if memory.is_empty() {
        return Err(Error::EmptyMemory);
    }
    for entry in memory.entries() {
        if !entry.features.same_grid(query) {
            return Err(Error::Dimension(format!(
                "memory frame {} is {}x{}x{}, query is {}x{}x{}",
                entry.frame,
                entry.features.height(),
                entry.features.width(),
                entry.features.channels(),
                query.height(),
                query.width(),
                query.channels()
            )));
        }
    }
    Ok(())
}

fn check_classes(memory: &MemoryQueue) -> Result<usize> {
    let k = memory.num_classes().ok_or(Error::EmptyMemory)?;
    for entry in memory.entries() {
        if entry.mask.classes() != k {
            return Err(Error::ClassCount {
                expected: k,
                found: entry.mask.classes(),
            });
        }
    }
    Ok(k)
}

/// Up to eight horizontally adjacent query pixels.
struct Tile {
    len: usize,
    rows: Range<usize>,
    /// Union of the queries' column windows.
    cols: Range<usize>,
    /// Per union column, lane `g` is set when query `g` admits it.
    masks: Vec<u8>,
}

impl Tile {
    fn new(window: &SpatialWindowMask, qy: usize, qx: usize, len: usize) -> Self {
        let cols = window.cols(qx).start..window.cols(qx + len - 1).end;
        let masks = cols
            .clone()
            .map(|x| {
                (0..len)
                    .filter(|&g| window.cols(qx + g).contains(&x))
                    .fold(0u8, |m, g| m | 1 << g)
            })
            .collect();
        Self {
            len,
            rows: window.rows(qy),
            cols,
            masks,
        }
    }

    fn admits(&self, g: usize, j: usize) -> bool {
        self.masks[j] >> g & 1 == 1
    }
}

/// Every query admits itself, so only unused lanes sum to zero.
fn reciprocal(sum: &Lanes) -> Lanes {
    sum.map(|s| if s > 0.0 { 1.0 / s } else { 0.0 })
}

/// Query rows per block. Rows of a block share reference rows while they
/// are still in cache.
const BLOCK_ROWS: usize = 8;

/// Per query row of a block: the query planes and the logits.
type RowBuffers = Vec<(Vec<Lanes>, Vec<Lanes>)>;

/// Computes scaled logits for every tile and hands them to `visit` with the
/// per-lane maximum over admitted entries. Logits are laid out by memory
/// frame, then row, then union column; lanes a query does not admit hold
/// unspecified values. `visit` returns one result per query of the tile;
/// results come back in row-major query order.
fn for_each_tile<R, F>(
    query: &FeatureMap,
    memory: &MemoryQueue,
    window: SpatialWindowMask,
    tau: f64,
    visit: F,
) -> Vec<R>
where
    R: Send,
    F: Fn(&Tile, &mut [Lanes], &Lanes) -> Vec<R> + Sync,
{
    let (h, w, c) = (query.height(), query.width(), query.channels());
    let scale = 1.0 / tau;
    let refs: Vec<Vec<f64>> = memory
        .entries()
        .map(|e| e.features.data().iter().map(|&v| f64::from(v)).collect())
        .collect();
    let blocks: Vec<(usize, usize)> = (0..h)
        .step_by(BLOCK_ROWS)
        .flat_map(|y| (0..w).step_by(LANES).map(move |x| (y, x)))
        .collect();
    let per_block: Vec<Vec<(usize, Vec<R>)>> = blocks
        .into_par_iter()
        .map_init(RowBuffers::new, |bufs, (y0, qx)| {
            let len = LANES.min(w - qx);
            let tiles: Vec<Tile> = (y0..(y0 + BLOCK_ROWS).min(h))
                .map(|qy| Tile::new(&window, qy, qx, len))
                .collect();
            bufs.resize_with(tiles.len(), Default::default);
            for ((q, logits), (qy, tile)) in bufs.iter_mut().zip((y0..).zip(&tiles)) {
                q.clear();
                q.resize(c, [0.0; LANES]);
                for g in 0..len {
                    for (plane, &v) in q.iter_mut().zip(query.pixel(qy, qx + g)) {
                        plane[g] = f64::from(v);
                    }
                }
                // every slot is written by the dots, so only grow
                let need = refs.len() * tile.rows.len() * tile.cols.len();
                if logits.len() < need {
                    logits.resize(need, [0.0; LANES]);
                }
            }
            let (lo, hi_col) = (tiles[0].cols.start, tiles[0].cols.end);
            let mut hi = vec![[f64::NEG_INFINITY; LANES]; tiles.len()];
            let rows = tiles[0].rows.start..tiles[tiles.len() - 1].rows.end;
            for (f, frame) in refs.iter().enumerate() {
                for y in rows.clone() {
                    let src = &frame[(y * w + lo) * c..(y * w + hi_col) * c];
                    // rows of a block share columns, so one pass serves all
                    let mut active: Vec<DotTile> = tiles
                        .iter()
                        .zip(bufs.iter_mut())
                        .zip(&mut hi)
                        .filter(|((tile, _), _)| tile.rows.contains(&y))
                        .map(|((tile, (q, logits)), hi)| {
                            let n = tile.cols.len();
                            let r = f * tile.rows.len() + y - tile.rows.start;
                            DotTile {
                                q,
                                out: &mut logits[r * n..(r + 1) * n],
                                hi,
                            }
                        })
                        .collect();
                    tile_dots(&mut active, src, scale, &tiles[0].masks);
                }
            }
            tiles
                .iter()
                .zip(bufs.iter_mut())
                .zip(hi)
                .enumerate()
                .map(|(r, ((tile, (_, logits)), hi))| {
                    let need = refs.len() * tile.rows.len() * tile.cols.len();
                    let out = visit(tile, &mut logits[..need], &hi);
                    debug_assert_eq!(out.len(), tile.len);
                    ((y0 + r) * w + qx, out)
                })
                .collect()
        })
        .collect();
    let mut out: Vec<Option<R>> = (0..h * w).map(|_| None).collect();
    for (start, results) in per_block.into_iter().flatten() {
        for (slot, r) in out[start..].iter_mut().zip(results) {
            *slot = Some(r);
        }
    }
    out.into_iter()
        .map(|r| r.expect("blocks cover every query pixel"))
        .collect()
}

/// Sparse, row-normalized affinity from every pixel of `query` to the
/// admitted pixels of every frame in `memory`. Features must already be
/// normalized.
pub fn compute_windowed_affinity(
    query: &FeatureMap,
    memory: &MemoryQueue,
    cfg: &TrackerConfig,
) -> Result<WindowedAffinity> {
    cfg.validate()?;
    check_inputs(query, memory)?;
    let (h, w) = (query.height(), query.width());
    let window = SpatialWindowMask::new(h, w, cfg.window);
    let nframes = memory.len();
    let rows = for_each_tile(query, memory, window, cfg.tau, |tile, weights, max| {
        let n = tile.cols.len();
        let mut sum = [0.0; LANES];
        tile_exp(weights, &tile.masks, max, &mut sum);
        let inv = reciprocal(&sum);
        (0..tile.len)
            .map(|g| {
                let mut row = Vec::with_capacity(nframes * tile.rows.len() * n);
                let mut t = 0;
                for f in 0..nframes {
                    for y in tile.rows.clone() {
                        for (j, x) in tile.cols.clone().enumerate() {
                            if tile.admits(g, j) {
                                row.push(AffinityEntry {
                                    frame: f as u32,
                                    pixel: (y * w + x) as u32,
                                    weight: weights[t + j][g] * inv[g],
                                });
                            }
                        }
                        t += n;
                    }
                }
                row
            })
            .collect()
    });
    let mut offsets = Vec::with_capacity(rows.len() + 1);
    offsets.push(0);
    let mut entries = Vec::with_capacity(rows.iter().map(Vec::len).sum());
    for row in rows {
        entries.extend(row);
        offsets.push(entries.len());
    }
    Ok(WindowedAffinity {
        height: h,
        width: w,
        frames: nframes,
        offsets,
        entries,
    })
}

/// Class scores `Σ_p w(q,p) · mask_p` for every query pixel.
pub fn propagate(aff: &WindowedAffinity, memory: &MemoryQueue) -> Result<SoftMask> {
    if memory.len() != aff.frames {
        return Err(Error::Dimension(format!(
            "affinity built over {} frames, memory holds {}",
            aff.frames,
            memory.len()
        )));
    }
    let k = check_classes(memory)?;
    let masks: Vec<&SoftMask> = memory.entries().map(|e| &e.mask).collect();
    if masks
        .iter()
        .any(|m| m.height() != aff.height || m.width() != aff.width)
    {
        return Err(Error::Dimension("memory masks do not match affinity grid".into()));
    }
    let mut data = vec![0.0; aff.num_queries() * k];
    data.par_chunks_mut(k).enumerate().for_each(|(q, out)| {
        for e in aff.row(q) {
            let p = e.pixel as usize;
            let cls = &masks[e.frame as usize].data()[p * k..(p + 1) * k];
            for (o, &m) in out.iter_mut().zip(cls) {
                *o = e.weight.mul_add(m, *o);
            }
        }
    });
    Ok(SoftMask::from_raw(aff.height, aff.width, k, data))
}

/// Affinity and propagation fused per tile, without storing the affinity.
/// Matches `propagate(&compute_windowed_affinity(..)?, memory)` up to
/// rounding: scores are accumulated from unnormalized weights and scaled
/// once at the end.
pub fn propagate_windowed(
    query: &FeatureMap,
    memory: &MemoryQueue,
    cfg: &TrackerConfig,
) -> Result<SoftMask> {
    cfg.validate()?;
    check_inputs(query, memory)?;
    let k = check_classes(memory)?;
    let (h, w) = (query.height(), query.width());
    let window = SpatialWindowMask::new(h, w, cfg.window);
    let masks: Vec<&[f64]> = memory.entries().map(|e| e.mask.data()).collect();
    let scores = for_each_tile(query, memory, window, cfg.tau, |tile, logits, max| {
        let n = tile.cols.len();
        let mut acc = vec![[0.0; LANES]; k];
        let mut sum = [0.0; LANES];
        let mut rows = logits.chunks_exact(n);
        for mask in &masks {
            for y in tile.rows.clone() {
                let cls = &mask[(y * w + tile.cols.start) * k..(y * w + tile.cols.end) * k];
                let row = rows.next().expect("one logit row per frame row");
                tile_exp_propagate(row, &tile.masks, max, cls, &mut sum, &mut acc);
            }
        }
        let inv = reciprocal(&sum);
        (0..tile.len)
            .map(|g| acc.iter().map(|a| a[g] * inv[g]).collect::<Vec<_>>())
            .collect()
    });
    Ok(SoftMask::from_raw(h, w, k, scores.concat()))
}
