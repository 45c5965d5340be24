//! Test oracles and property checks shared by the integration suites.
//!
//! Every check returns `Ok(detail)` or `Err(reason)` so the acceptance
//! driver can report them one line each.

#![allow(dead_code)]

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use maskflow::engine::{
    compute_windowed_affinity, track_video, update_memory, with_threads, MemoryQueue,
    SpatialWindowMask,
};
use maskflow::metrics::{jaccard_per_class, mean_present, pixel_f_score};
use maskflow::synth::{gen_sequence, SynthConfig};
use maskflow::{FeatureMap, LabelMask, MemoryMode, Tracker, TrackerConfig};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const CASES: u32 = 128;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

pub fn random_features(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> FeatureMap {
    let data = (0..h * w * c)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            v as f32
        })
        .collect();
    FeatureMap::new(h, w, c, data).unwrap()
}

pub fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize, k: u16) -> LabelMask {
    let labels = (0..h * w).map(|_| rng.random_range(0..k)).collect();
    LabelMask::new(h, w, k, labels).unwrap()
}

pub fn random_sequence(
    seed: u64,
    h: usize,
    w: usize,
    c: usize,
    k: u16,
    n: usize,
) -> (Vec<FeatureMap>, LabelMask) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = (0..n).map(|_| random_features(&mut rng, h, w, c)).collect();
    let mask = random_mask(&mut rng, h, w, k);
    (features, mask)
}

/// Sequence generator for proptest: `(h, w, c, k, n, seed)`.
fn seq_params(
    max_side: usize,
    max_c: usize,
    max_n: usize,
) -> impl Strategy<Value = (usize, usize, usize, u16, usize, u64)> {
    (
        1..=max_side,
        1..=max_side,
        1..=max_c,
        2..=4u16,
        2..=max_n,
        any::<u64>(),
    )
}

// ---------------------------------------------------------------------------
// Dense brute-force tracker

fn unit(px: &[f32]) -> Vec<f32> {
    let norm = px.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>().sqrt();
    if norm < 1e-12 {
        vec![0.0; px.len()]
    } else {
        px.iter().map(|&v| (f64::from(v) / norm) as f32).collect()
    }
}

struct DenseFrame {
    frame: usize,
    feats: Vec<Vec<f32>>,
    mask: Vec<Vec<f64>>,
}

/// Full dense affinity over every reference pixel of every memory frame,
/// one softmax per query. Masks at feature resolution only.
pub fn dense_track(
    features: &[FeatureMap],
    first: &LabelMask,
    cfg: &TrackerConfig,
) -> Vec<(Vec<Vec<f64>>, Vec<u16>)> {
    let k = first.num_classes() as usize;
    let one_hot = |l: u16| {
        let mut v = vec![0.0; k];
        v[l as usize] = 1.0;
        v
    };
    let mut memory: VecDeque<DenseFrame> = VecDeque::new();
    memory.push_back(DenseFrame {
        frame: 0,
        feats: features[0].pixels().map(unit).collect(),
        mask: first.labels().iter().map(|&l| one_hot(l)).collect(),
    });
    let mut out = Vec::new();
    for (t, f) in features.iter().enumerate().skip(1) {
        let queries: Vec<Vec<f32>> = f.pixels().map(unit).collect();
        let mut soft = Vec::with_capacity(queries.len());
        let mut labels = Vec::with_capacity(queries.len());
        for q in &queries {
            let mut logits = Vec::new();
            let mut refs = Vec::new();
            for m in &memory {
                for (r, mk) in m.feats.iter().zip(&m.mask) {
                    let dot: f64 = q.iter().zip(r).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum();
                    logits.push(dot / cfg.tau);
                    refs.push(mk);
                }
            }
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let total: f64 = weights.iter().sum();
            let mut s = vec![0.0; k];
            for (wgt, mk) in weights.iter().zip(&refs) {
                for (o, v) in s.iter_mut().zip(mk.iter()) {
                    *o += wgt / total * v;
                }
            }
            let mut best = 0;
            for c in 1..k {
                if s[c] > s[best] {
                    best = c;
                }
            }
            labels.push(best as u16);
            soft.push(s);
        }
        let stored = match cfg.memory_mode {
            MemoryMode::Hard => labels.iter().map(|&l| one_hot(l)).collect(),
            MemoryMode::Soft => soft.clone(),
        };
        memory.push_back(DenseFrame {
            frame: t,
            feats: queries,
            mask: stored,
        });
        if memory.len() > cfg.memory {
            if cfg.anchor_first_frame && memory[0].frame == 0 {
                memory.remove(1);
            } else {
                memory.pop_front();
            }
        }
        out.push((soft, labels));
    }
    out
}

/// Library tracker outputs as `(soft rows, labels)` per frame.
pub fn library_track(
    features: &[FeatureMap],
    first: &LabelMask,
    cfg: &TrackerConfig,
) -> Vec<(Vec<Vec<f64>>, Vec<u16>)> {
    let mut tracker = Tracker::new(cfg.clone(), &features[0], first).unwrap();
    features[1..]
        .iter()
        .map(|f| {
            let step = tracker.step(f).unwrap();
            (
                step.soft.pixels().map(<[f64]>::to_vec).collect(),
                step.labels.labels().to_vec(),
            )
        })
        .collect()
}

pub fn check_dense_equivalence(sequences: usize) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for s in 0..sequences {
        let h = rng.random_range(1..=16);
        let w = rng.random_range(1..=16);
        let c = rng.random_range(1..=8);
        let k = rng.random_range(2..=4u16);
        let n = rng.random_range(2..=5);
        let cfg = TrackerConfig {
            tau: [0.05, 0.1, 0.2, 0.5, 1.0][rng.random_range(0..5)],
            window: 2 * h.max(w) + rng.random_range(0..4),
            memory: rng.random_range(1..=4),
            memory_mode: if rng.random_bool(0.5) {
                MemoryMode::Hard
            } else {
                MemoryMode::Soft
            },
            anchor_first_frame: false,
        };
        let (features, first) = random_sequence(rng.random(), h, w, c, k, n);
        let dense = dense_track(&features, &first, &cfg);
        let lib = library_track(&features, &first, &cfg);
        for (t, ((ds, dl), (ls, ll))) in dense.iter().zip(&lib).enumerate() {
            if dl != ll {
                return Err(format!("sequence {s} frame {}: argmax labels differ", t + 1));
            }
            for (a, b) in ds.iter().flatten().zip(ls.iter().flatten()) {
                worst = worst.max((a - b).abs());
            }
        }
        if worst > 1e-5 {
            return Err(format!("sequence {s}: soft-mask error {worst:e} > 1e-5"));
        }
    }
    Ok(format!("{sequences} sequences, max soft error {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// Property checks

pub fn check_softmax_rows(cases: u32) -> Result<String, String> {
    let strat = (seq_params(10, 6, 4), 0usize..24, 0.05f64..2.0);
    runner(cases)
        .run(&strat, |((h, w, c, k, n, seed), window, tau)| {
            let cfg = TrackerConfig {
                tau,
                window,
                memory: n,
                ..TrackerConfig::default()
            };
            let (features, first) = random_sequence(seed, h, w, c, k, n + 1);
            let mut queue = MemoryQueue::new(&cfg);
            for f in &features[..n] {
                queue = update_memory(queue, f.normalized(), first.to_one_hot()).unwrap();
            }
            let query = features[n].normalized();
            let aff = compute_windowed_affinity(&query, &queue, &cfg).unwrap();
            let win = SpatialWindowMask::new(h, w, window);
            for q in 0..h * w {
                let row = aff.row(q);
                prop_assert_eq!(row.len(), win.admitted(q / w, q % w) * n);
                prop_assert!(row.iter().all(|e| e.weight >= 0.0));
                let sum: f64 = row.iter().map(|e| e.weight).sum();
                prop_assert!((sum - 1.0).abs() <= 1e-5, "row {} sums to {}", q, sum);
            }
            Ok(())
        })
        .map(|_| format!("{cases} cases"))
        .map_err(|e| e.to_string())
}

fn small_config() -> impl Strategy<Value = TrackerConfig> {
    (
        prop_oneof![Just(0.1), Just(0.2), Just(0.5)],
        0usize..12,
        1usize..4,
        any::<bool>(),
    )
        .prop_map(|(tau, window, memory, soft)| TrackerConfig {
            tau,
            window,
            memory,
            memory_mode: if soft { MemoryMode::Soft } else { MemoryMode::Hard },
            anchor_first_frame: false,
        })
}

fn scale_pixels(f: &FeatureMap, scales: &[f32]) -> FeatureMap {
    let c = f.channels();
    let data = f
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| v * scales[(i / c) % scales.len()])
        .collect();
    FeatureMap::new(f.height(), f.width(), c, data).unwrap()
}

/// Positive per-pixel rescaling of the features. Power-of-two factors must
/// leave outputs bit-identical; arbitrary factors may move soft scores by
/// rounding only, and labels wherever the top two scores are separated.
pub fn check_scale_invariance(cases: u32) -> Result<String, String> {
    let strat = (
        seq_params(8, 6, 5),
        small_config(),
        prop::collection::vec(-6i32..=6, 1..17),
        prop::collection::vec(0.01f32..100.0, 1..17),
    );
    runner(cases)
        .run(&strat, |((h, w, c, k, n, seed), cfg, exps, factors)| {
            let (features, first) = random_sequence(seed, h, w, c, k, n);
            let base = library_track(&features, &first, &cfg);

            let pow2: Vec<f32> = exps.iter().map(|&e| 2f32.powi(e)).collect();
            let scaled: Vec<FeatureMap> = features.iter().map(|f| scale_pixels(f, &pow2)).collect();
            prop_assert_eq!(&library_track(&scaled, &first, &cfg), &base);

            let soft_cfg = TrackerConfig {
                memory_mode: MemoryMode::Soft,
                ..cfg
            };
            let base = library_track(&features, &first, &soft_cfg);
            let scaled: Vec<FeatureMap> =
                features.iter().map(|f| scale_pixels(f, &factors)).collect();
            let other = library_track(&scaled, &first, &soft_cfg);
            for ((bs, bl), (os, ol)) in base.iter().zip(&other) {
                for ((b, o), (&lb, &lo)) in bs.iter().zip(os).zip(bl.iter().zip(ol)) {
                    for (x, y) in b.iter().zip(o) {
                        prop_assert!((x - y).abs() <= 1e-5);
                    }
                    if margin(b) > 1e-4 {
                        prop_assert_eq!(lb, lo);
                    }
                }
            }
            Ok(())
        })
        .map(|_| format!("{cases} cases"))
        .map_err(|e| e.to_string())
}

fn margin(scores: &[f64]) -> f64 {
    let mut s = scores.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s[0] - s.get(1).copied().unwrap_or(0.0)
}

/// Relabeling the first mask relabels every output the same way.
pub fn check_permutation_equivariance(cases: u32) -> Result<String, String> {
    let strat = (seq_params(8, 6, 5), small_config(), any::<u64>());
    runner(cases)
        .run(&strat, |((h, w, c, k, n, seed), cfg, pseed)| {
            let (features, first) = random_sequence(seed, h, w, c, k, n);
            let mut perm: Vec<u16> = (0..k).collect();
            let mut prng = ChaCha8Rng::seed_from_u64(pseed);
            for i in (1..perm.len()).rev() {
                perm.swap(i, prng.random_range(0..=i));
            }
            let base = library_track(&features, &first, &cfg);
            let moved = library_track(&features, &first.permuted(&perm).unwrap(), &cfg);
            for ((bs, bl), (ms, ml)) in base.iter().zip(&moved) {
                let mut tied = false;
                for ((b, m), (&lb, &lm)) in bs.iter().zip(ms).zip(bl.iter().zip(ml)) {
                    for (class, &v) in b.iter().enumerate() {
                        prop_assert_eq!(v.to_bits(), m[perm[class] as usize].to_bits());
                    }
                    let top = b.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    if b.iter().filter(|&&v| v == top).count() == 1 {
                        prop_assert_eq!(perm[lb as usize], lm);
                    } else {
                        tied = true;
                    }
                }
                // lowest-index tie breaking is not equivariant; with hard
                // memory the two runs legitimately diverge after a tie
                if tied && cfg.memory_mode == MemoryMode::Hard {
                    break;
                }
            }
            Ok(())
        })
        .map(|_| format!("{cases} cases"))
        .map_err(|e| e.to_string())
}

/// Frame `i`'s output depends only on frames before it: truncating the
/// sequence or replacing later frames changes nothing already emitted.
pub fn check_causality(cases: u32) -> Result<String, String> {
    let strat = (seq_params(8, 6, 6), small_config(), any::<u64>(), any::<u64>());
    runner(cases)
        .run(&strat, |((h, w, c, k, n, seed), cfg, cut, noise_seed)| {
            let (features, first) = random_sequence(seed, h, w, c, k, n);
            let m = 2 + (cut as usize) % (n - 1);
            let full = track_video(&features, &first, &cfg).unwrap();
            let prefix = track_video(&features[..m], &first, &cfg).unwrap();
            prop_assert_eq!(&full[..m - 1], &prefix[..]);

            let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
            let mut altered = features.clone();
            for f in &mut altered[m..] {
                *f = random_features(&mut rng, h, w, c);
            }
            let other = track_video(&altered, &first, &cfg).unwrap();
            prop_assert_eq!(&other[..m - 1], &full[..m - 1]);
            Ok(())
        })
        .map(|_| format!("{cases} cases"))
        .map_err(|e| e.to_string())
}

/// Soft scores are bit-identical whatever the worker count.
pub fn check_thread_determinism(cases: u32) -> Result<String, String> {
    let strat = (seq_params(24, 6, 4), small_config());
    runner(cases)
        .run(&strat, |((h, w, c, k, n, seed), cfg)| {
            let (features, first) = random_sequence(seed, h, w, c, k, n);
            let one = with_threads(1, || library_track(&features, &first, &cfg));
            for threads in [2, 3, 8] {
                let many = with_threads(threads, || library_track(&features, &first, &cfg));
                for ((a, la), (b, lb)) in one.iter().zip(&many) {
                    prop_assert_eq!(la, lb);
                    for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
                        prop_assert_eq!(x.to_bits(), y.to_bits());
                    }
                }
            }
            Ok(())
        })
        .map(|_| format!("{cases} cases, threads 1/2/3/8"))
        .map_err(|e| e.to_string())
}

pub fn check_jaccard_below_f1(cases: u32) -> Result<String, String> {
    let strat = (1usize..12, 1usize..12, 1u16..6, any::<u64>());
    runner(cases)
        .run(&strat, |(h, w, k, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pred = random_mask(&mut rng, h, w, k);
            let gt = random_mask(&mut rng, h, w, k);
            let j = jaccard_per_class(&pred, &gt, k as usize).unwrap();
            let f = pixel_f_score(&pred, &gt, k as usize).unwrap();
            for (jc, fc) in j.iter().zip(&f) {
                prop_assert_eq!(jc.is_some(), fc.is_some());
                if let (Some(jv), Some(fv)) = (jc, fc) {
                    prop_assert!(*jv <= fv + 1e-12, "J {} > F {}", jv, fv);
                    // F = 2J / (1 + J)
                    prop_assert!((fv - 2.0 * jv / (1.0 + jv)).abs() < 1e-12);
                }
            }
            Ok(())
        })
        .map(|_| format!("{cases} cases"))
        .map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// Metrics by enumeration

/// Per-class Jaccard and F computed from explicit pixel sets.
pub fn set_scores(pred: &[u16], gt: &[u16], k: u16) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
    let mut j = Vec::new();
    let mut f = Vec::new();
    for c in 0..k {
        let p: Vec<usize> = (0..pred.len()).filter(|&i| pred[i] == c).collect();
        let g: Vec<usize> = (0..gt.len()).filter(|&i| gt[i] == c).collect();
        let inter = p.iter().filter(|i| g.contains(i)).count();
        let union = p.len() + g.len() - inter;
        if union == 0 {
            j.push(None);
            f.push(None);
        } else {
            j.push(Some(inter as f64 / union as f64));
            f.push(Some(2.0 * inter as f64 / (p.len() + g.len()) as f64));
        }
    }
    (j, f)
}

pub fn mean(scores: &[Option<f64>]) -> f64 {
    mean_present(scores).unwrap()
}

// ---------------------------------------------------------------------------
// Eigen oracle

/// Cyclic Jacobi rotations on a dense symmetric matrix. Returns eigenvalues
/// and eigenvectors (as columns of `v`, row-major `n × n`).
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum();
        let scale: f64 = (0..n).map(|i| a[i * n + i].powi(2)).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for r in 0..n {
                    let (arp, arq) = (a[r * n + p], a[r * n + q]);
                    a[r * n + p] = cs * arp - sn * arq;
                    a[r * n + q] = sn * arp + cs * arq;
                }
                for r in 0..n {
                    let (apr, aqr) = (a[p * n + r], a[q * n + r]);
                    a[p * n + r] = cs * apr - sn * aqr;
                    a[q * n + r] = sn * apr + cs * aqr;
                }
                for r in 0..n {
                    let (vrp, vrq) = (v[r * n + p], v[r * n + q]);
                    v[r * n + p] = cs * vrp - sn * vrq;
                    v[r * n + q] = sn * vrp + cs * vrq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// Top-`k` eigenvectors of the pixel covariance by the Jacobi oracle.
pub fn oracle_pca(grids: &[FeatureMap], k: usize) -> Vec<Vec<f64>> {
    let c = grids[0].channels();
    let pixels: Vec<&[f32]> = grids.iter().flat_map(|g| g.pixels()).collect();
    let n = pixels.len() as f64;
    let mut mean = vec![0.0; c];
    for p in &pixels {
        for (m, &v) in mean.iter_mut().zip(p.iter()) {
            *m += f64::from(v) / n;
        }
    }
    let mut cov = vec![0.0; c * c];
    for p in &pixels {
        for i in 0..c {
            for j in 0..c {
                cov[i * c + j] += (f64::from(p[i]) - mean[i]) * (f64::from(p[j]) - mean[j]) / n;
            }
        }
    }
    let (vals, vecs) = jacobi_eigen(&cov, c);
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    order[..k]
        .iter()
        .map(|&i| (0..c).map(|r| vecs[r * c + i]).collect())
        .collect()
}

/// Features with a clear spectral gap: three strong random directions plus
/// weak isotropic noise.
pub fn gapped_features(rng: &mut ChaCha8Rng, frames: usize, h: usize, w: usize, c: usize) -> Vec<FeatureMap> {
    let dirs: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..c).map(|_| StandardNormal.sample(&mut *rng)).collect())
        .collect();
    let strengths = [9.0, 4.0, 2.0];
    (0..frames)
        .map(|_| {
            let mut data = Vec::with_capacity(h * w * c);
            for _ in 0..h * w {
                let a: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut *rng)).collect();
                for ch in 0..c {
                    let mut v: f64 = (0..3).map(|d| strengths[d] * a[d] * dirs[d][ch]).sum();
                    let e: f64 = StandardNormal.sample(&mut *rng);
                    v += 0.05 * e;
                    data.push(v as f32);
                }
            }
            FeatureMap::new(h, w, c, data).unwrap()
        })
        .collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub fn check_pca_oracle(trials: usize) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xca);
    let mut worst = 1.0f64;
    for t in 0..trials {
        let c = rng.random_range(3..=64);
        let grids = gapped_features(&mut rng, 2, 9, 11, c);
        let basis = maskflow::analysis::fit_pca(&grids, 3).map_err(|e| e.to_string())?;
        let oracle = oracle_pca(&grids, 3);
        for (d, o) in basis.directions.iter().zip(&oracle) {
            let cos = cosine(d, o).abs();
            worst = worst.min(cos);
            if cos < 1.0 - 1e-6 {
                return Err(format!("trial {t} (C={c}): direction cosine {cos}"));
            }
        }
    }
    Ok(format!("{trials} trials, min |cos| {worst:.12}"))
}

pub fn check_pca_rank3(trials: usize) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let c = rng.random_range(3..=64);
        let dirs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..c).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let offset: Vec<f64> = (0..c).map(|_| StandardNormal.sample(&mut rng)).collect();
        let data: Vec<f32> = (0..12 * 10)
            .flat_map(|_| {
                let a: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
                (0..c)
                    .map(|ch| (offset[ch] + (0..3).map(|d| a[d] * dirs[d][ch]).sum::<f64>()) as f32)
                    .collect::<Vec<_>>()
            })
            .collect();
        let g = FeatureMap::new(12, 10, c, data).unwrap();
        let basis = maskflow::analysis::fit_pca(std::slice::from_ref(&g), 3).map_err(|e| e.to_string())?;
        let total: f64 = basis.explained.iter().sum();
        worst = worst.max((total - 1.0).abs());
        if (total - 1.0).abs() > 1e-6 {
            return Err(format!("explained variance sums to {total}"));
        }
        for px in g.pixels() {
            let back = basis.reconstruct(&basis.project(px));
            for (r, &x) in back.iter().zip(px) {
                if (r - f64::from(x)).abs() > 1e-5 {
                    return Err(format!("reconstruction error {}", (r - f64::from(x)).abs()));
                }
            }
        }
    }
    Ok(format!("{trials} trials, max |sum - 1| {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// Synthetic tracking helpers

pub fn synth(cfg: &SynthConfig) -> (Vec<FeatureMap>, Vec<LabelMask>) {
    let seq = gen_sequence(cfg).unwrap();
    (seq.features, seq.masks)
}

/// Mean over frames 2.. of `(J_m, F_m, P_acc)`.
pub fn score_run(pred: &[LabelMask], gt: &[LabelMask]) -> (f64, f64, f64) {
    let k = gt[0].num_classes() as usize;
    let mut sums = (0.0, 0.0, 0.0);
    for (p, g) in pred.iter().zip(&gt[1..]) {
        sums.0 += mean(&jaccard_per_class(p, g, k).unwrap());
        sums.1 += mean(&pixel_f_score(p, g, k).unwrap());
        sums.2 += maskflow::metrics::pixel_accuracy(p, g).unwrap();
    }
    let n = pred.len() as f64;
    (sums.0 / n, sums.1 / n, sums.2 / n)
}
