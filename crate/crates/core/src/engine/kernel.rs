//! Inner loops of windowed affinity over tiles of eight queries held in the
//! eight lanes of a vector.
//!
//! Every per-query quantity is a plain sequential chain: a dot product is a
//! chain of fused multiply-adds over channels, a softmax denominator is a
//! running sum over references in order, a propagated score is a chain of
//! fused multiply-adds over references. Vector code only runs eight of those
//! chains side by side, so every code path rounds identically.

#[cfg(target_arch = "x86_64")]
use std::arch::x86_64::*;

pub(crate) const LANES: usize = 8;

/// One value per query of a tile.
pub(crate) type Lanes = [f64; LANES];

/// Channels per pass of the dot kernel; keeps a pass's queries and
/// references in L1 for wide features.
const CHANNEL_BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Isa {
    #[cfg(target_arch = "x86_64")]
    Avx512,
    #[cfg(target_arch = "x86_64")]
    Avx2,
    Generic,
}

fn detect() -> Isa {
    use std::sync::OnceLock;
    static ISA: OnceLock<Isa> = OnceLock::new();
    *ISA.get_or_init(|| {
        #[cfg(target_arch = "x86_64")]
        {
            if std::env::var_os("MASKFLOW_GENERIC_KERNEL").is_none() {
                if is_x86_feature_detected!("avx512f") {
                    return Isa::Avx512;
                }
                if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
                    return Isa::Avx2;
                }
            }
        }
        Isa::Generic
    })
}

#[inline(always)]
fn admits(mask: u8, g: usize) -> bool {
    mask >> g & 1 == 1
}

/// Same choice as the hardware max: `b` unless `a > b`.
#[inline(always)]
fn vmax(a: f64, b: f64) -> f64 {
    if a > b {
        a
    } else {
        b
    }
}

#[inline(always)]
fn dots_generic(q: &[Lanes], refs: &[f64], scale: f64, masks: &[u8], out: &mut [Lanes], hi: &mut Lanes) {
    let c = q.len();
    for ((o, r), &m) in out.iter_mut().zip(refs.chunks_exact(c)).zip(masks) {
        for g in 0..LANES {
            let dot = q.iter().zip(r).fold(0.0, |acc, (qi, &ri)| qi[g].mul_add(ri, acc));
            o[g] = dot * scale;
            if admits(m, g) {
                hi[g] = vmax(hi[g], o[g]);
            }
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn dots_avx2(tiles: &mut [DotTile<'_>], refs: &[f64], scale: f64, masks: &[u8]) {
    for t in tiles {
        dots_generic(t.q, refs, scale, masks, t.out, t.hi)
    }
}

/// `J` references starting at column `j0` for `Q` tiles at once, sharing
/// each broadcast reference value. Columns before `fresh` were already done
/// by an overlapping block and stay out of the max.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
#[inline]
#[allow(clippy::too_many_arguments)]
unsafe fn dots_block<const Q: usize, const J: usize>(
    q: [*const f64; Q],
    out: [*mut f64; Q],
    hi: &mut [__m512d; Q],
    c: usize,
    refs: &[f64],
    sv: __m512d,
    masks: &[u8],
    j0: usize,
    fresh: usize,
) {
    let mut cols = [refs.as_ptr(); J];
    for (j, p) in cols.iter_mut().enumerate() {
        *p = p.add((j0 + j) * c);
    }
    let mut start = 0;
    while start < c {
        let end = (start + CHANNEL_BLOCK).min(c);
        let mut acc = [[_mm512_setzero_pd(); J]; Q];
        if start > 0 {
            for (a, o) in acc.iter_mut().zip(out) {
                for (j, v) in a.iter_mut().enumerate() {
                    *v = _mm512_loadu_pd(o.add((j0 + j) * LANES));
                }
            }
        }
        for i in start..end {
            let mut qv = [_mm512_setzero_pd(); Q];
            for (v, p) in qv.iter_mut().zip(q) {
                *v = _mm512_loadu_pd(p.add(i * LANES));
            }
            for (j, p) in cols.iter().enumerate() {
                let r = _mm512_set1_pd(*p.add(i));
                for (a, v) in acc.iter_mut().zip(qv) {
                    a[j] = _mm512_fmadd_pd(v, r, a[j]);
                }
            }
        }
        for ((a, o), h) in acc.iter().zip(out).zip(hi.iter_mut()) {
            for (j, v) in a.iter().enumerate() {
                let dst = o.add((j0 + j) * LANES);
                if end == c {
                    let l = _mm512_mul_pd(*v, sv);
                    _mm512_storeu_pd(dst, l);
                    if j0 + j >= fresh {
                        *h = _mm512_mask_max_pd(*h, masks[j0 + j], *h, l);
                    }
                } else {
                    _mm512_storeu_pd(dst, *v);
                }
            }
        }
        start = end;
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn dots_many<const Q: usize>(tiles: &mut [DotTile<'_>], refs: &[f64], sv: __m512d, masks: &[u8]) {
    let n = masks.len();
    let c = tiles[0].q.len();
    let q: [*const f64; Q] = std::array::from_fn(|t| tiles[t].q.as_ptr().cast::<f64>());
    let out: [*mut f64; Q] = std::array::from_fn(|t| tiles[t].out.as_mut_ptr().cast::<f64>());
    let mut hi: [__m512d; Q] = std::array::from_fn(|t| _mm512_loadu_pd(tiles[t].hi.as_ptr()));
    if n >= LANES {
        let mut j0 = 0;
        while j0 + LANES <= n {
            dots_block::<Q, LANES>(q, out, &mut hi, c, refs, sv, masks, j0, j0);
            j0 += LANES;
        }
        if j0 < n {
            // recomputing a few columns beats a narrow tail
            dots_block::<Q, LANES>(q, out, &mut hi, c, refs, sv, masks, n - LANES, j0);
        }
    } else {
        match n {
            1 => dots_block::<Q, 1>(q, out, &mut hi, c, refs, sv, masks, 0, 0),
            2 => dots_block::<Q, 2>(q, out, &mut hi, c, refs, sv, masks, 0, 0),
            3 => dots_block::<Q, 3>(q, out, &mut hi, c, refs, sv, masks, 0, 0),
            4 => dots_block::<Q, 4>(q, out, &mut hi, c, refs, sv, masks, 0, 0),
            5 => dots_block::<Q, 5>(q, out, &mut hi, c, refs, sv, masks, 0, 0),
            6 => dots_block::<Q, 6>(q, out, &mut hi, c, refs, sv, masks, 0, 0),
            7 => dots_block::<Q, 7>(q, out, &mut hi, c, refs, sv, masks, 0, 0),
            _ => {}
        }
    }
    for (t, h) in tiles.iter_mut().zip(hi) {
        _mm512_storeu_pd(t.hi.as_mut_ptr(), h);
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn dots_avx512(tiles: &mut [DotTile<'_>], refs: &[f64], scale: f64, masks: &[u8]) {
    let sv = _mm512_set1_pd(scale);
    let mut rest = tiles;
    while rest.len() >= 2 {
        let (pair, tail) = rest.split_at_mut(2);
        dots_many::<2>(pair, refs, sv, masks);
        rest = tail;
    }
    if !rest.is_empty() {
        dots_many::<1>(rest, refs, sv, masks);
    }
}

/// One tile's share of [`tile_dots`].
pub(crate) struct DotTile<'a> {
    /// `q[i][g]` is channel `i` of query `g`.
    pub q: &'a [Lanes],
    pub out: &'a mut [Lanes],
    pub hi: &'a mut Lanes,
}

/// For every tile, `out[j][g] = dot(query g, reference j) * scale` where
/// reference `j` is `refs[j*C..(j+1)*C]`, folding into `hi` the outputs
/// whose lane is set in `masks[j]`. Tiles share references and masks.
pub(crate) fn tile_dots(tiles: &mut [DotTile<'_>], refs: &[f64], scale: f64, masks: &[u8]) {
    let Some(first) = tiles.first() else { return };
    let c = first.q.len();
    assert!(c > 0 && refs.len() == masks.len() * c);
    assert!(tiles.iter().all(|t| t.q.len() == c && t.out.len() == masks.len()));
    match detect() {
        #[cfg(target_arch = "x86_64")]
        // SAFETY: feature presence checked at runtime in `detect`; lengths
        // asserted above bound every access.
        Isa::Avx512 => unsafe { dots_avx512(tiles, refs, scale, masks) },
        #[cfg(target_arch = "x86_64")]
        // SAFETY: as above.
        Isa::Avx2 => unsafe { dots_avx2(tiles, refs, scale, masks) },
        Isa::Generic => {
            for t in tiles {
                dots_generic(t.q, refs, scale, masks, t.out, t.hi)
            }
        }
    }
}

const EXP_FLOOR: f64 = -708.0;
// 1.5 * 2^52: adding it rounds to an integer held in the low mantissa bits
const ROUND_MAGIC: f64 = 6755399441055744.0;
const LN2_HI: f64 = 6.931_471_803_691_238e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
// Taylor coefficients of exp, r^13 first; |r| <= ln2/2 so the remainder is
// below 1e-17
const EXP_TAYLOR: [f64; 14] = [
    1.0 / 6227020800.0,
    1.0 / 479001600.0,
    1.0 / 39916800.0,
    1.0 / 3628800.0,
    1.0 / 362880.0,
    1.0 / 40320.0,
    1.0 / 5040.0,
    1.0 / 720.0,
    1.0 / 120.0,
    1.0 / 24.0,
    1.0 / 6.0,
    0.5,
    1.0,
    1.0,
];

/// `exp(x)` for `x <= 0`, accurate to a couple of ulp. Inputs below -708
/// are clamped there; the result is then under 1e-307. Built only from IEEE
/// operations so every code path rounds the same way.
#[inline(always)]
pub(crate) fn exp_nonpos(x: f64) -> f64 {
    let x = vmax(x, EXP_FLOOR);
    let t = x.mul_add(std::f64::consts::LOG2_E, ROUND_MAGIC);
    let k = t - ROUND_MAGIC;
    let r = k.mul_add(-LN2_LO, k.mul_add(-LN2_HI, x));
    let mut p: f64 = EXP_TAYLOR[0];
    for &c in &EXP_TAYLOR[1..] {
        p = p.mul_add(r, c);
    }
    // k + 1023 lands in [1, 1023], so the low 12 bits form the exponent
    let scale = f64::from_bits(t.to_bits().wrapping_add(1023) << 52);
    p * scale
}

#[inline(always)]
fn exp_generic(v: &mut [Lanes], masks: &[u8], max: &Lanes, sum: &mut Lanes) {
    for row in v.chunks_exact_mut(masks.len()) {
        for (x, &m) in row.iter_mut().zip(masks) {
            for g in 0..LANES {
                x[g] = if admits(m, g) { exp_nonpos(x[g] - max[g]) } else { 0.0 };
                sum[g] += x[g];
            }
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn exp_avx2(v: &mut [Lanes], masks: &[u8], max: &Lanes, sum: &mut Lanes) {
    exp_generic(v, masks, max, sum)
}

/// Vector form of [`exp_nonpos`], operation for operation.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
#[inline]
unsafe fn exp_nonpos_v(x: __m512d) -> __m512d {
    let magic = _mm512_set1_pd(ROUND_MAGIC);
    let x = _mm512_max_pd(x, _mm512_set1_pd(EXP_FLOOR));
    let t = _mm512_fmadd_pd(x, _mm512_set1_pd(std::f64::consts::LOG2_E), magic);
    let k = _mm512_sub_pd(t, magic);
    let r = _mm512_fmadd_pd(
        k,
        _mm512_set1_pd(-LN2_LO),
        _mm512_fmadd_pd(k, _mm512_set1_pd(-LN2_HI), x),
    );
    let mut p = _mm512_set1_pd(EXP_TAYLOR[0]);
    for &c in &EXP_TAYLOR[1..] {
        p = _mm512_fmadd_pd(p, r, _mm512_set1_pd(c));
    }
    let bits = _mm512_slli_epi64::<52>(_mm512_add_epi64(_mm512_castpd_si512(t), _mm512_set1_epi64(1023)));
    _mm512_mul_pd(p, _mm512_castsi512_pd(bits))
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn exp_avx512(v: &mut [Lanes], masks: &[u8], max: &Lanes, sum: &mut Lanes) {
    let mv = _mm512_loadu_pd(max.as_ptr());
    let mut s = _mm512_loadu_pd(sum.as_ptr());
    for row in v.chunks_exact_mut(masks.len()) {
        for (x, &m) in row.iter_mut().zip(masks) {
            let p = x.as_mut_ptr();
            // lanes outside the window may overflow; they are discarded
            let e = _mm512_maskz_mov_pd(m, exp_nonpos_v(_mm512_sub_pd(_mm512_loadu_pd(p), mv)));
            _mm512_storeu_pd(p, e);
            s = _mm512_add_pd(s, e);
        }
    }
    _mm512_storeu_pd(sum.as_mut_ptr(), s);
}

/// Replaces logit `v[t][g]` by `exp(v[t][g] - max[g])` where lane `g` is set
/// in `masks[t % masks.len()]` and by zero elsewhere, adding each result
/// to `sum[g]` in order. `max` must bound every admitted logit.
pub(crate) fn tile_exp(v: &mut [Lanes], masks: &[u8], max: &Lanes, sum: &mut Lanes) {
    assert!(!masks.is_empty() && v.len().is_multiple_of(masks.len()));
    match detect() {
        #[cfg(target_arch = "x86_64")]
        // SAFETY: feature presence checked at runtime in `detect`.
        Isa::Avx512 => unsafe { exp_avx512(v, masks, max, sum) },
        #[cfg(target_arch = "x86_64")]
        // SAFETY: as above.
        Isa::Avx2 => unsafe { exp_avx2(v, masks, max, sum) },
        Isa::Generic => exp_generic(v, masks, max, sum),
    }
}

#[inline(always)]
fn exp_propagate_generic(logits: &[Lanes], masks: &[u8], max: &Lanes, classes: &[f64], sum: &mut Lanes, acc: &mut [Lanes]) {
    let k = acc.len();
    for ((x, &m), cls) in logits.iter().zip(masks).zip(classes.chunks_exact(k)) {
        for g in 0..LANES {
            let e = if admits(m, g) { exp_nonpos(x[g] - max[g]) } else { 0.0 };
            sum[g] += e;
            for (a, &v) in acc.iter_mut().zip(cls) {
                a[g] = e.mul_add(v, a[g]);
            }
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn exp_propagate_avx2(logits: &[Lanes], masks: &[u8], max: &Lanes, classes: &[f64], sum: &mut Lanes, acc: &mut [Lanes]) {
    exp_propagate_generic(logits, masks, max, classes, sum, acc)
}

/// The first `G` classes live in registers; any beyond eight go through
/// memory.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
#[inline]
unsafe fn exp_propagate_group<const G: usize>(
    logits: &[Lanes],
    masks: &[u8],
    max: &Lanes,
    classes: &[f64],
    sum: &mut Lanes,
    acc: &mut [Lanes],
) {
    let k = acc.len();
    let mv = _mm512_loadu_pd(max.as_ptr());
    let mut s = _mm512_loadu_pd(sum.as_ptr());
    let mut a = [_mm512_setzero_pd(); G];
    for (g, v) in a.iter_mut().enumerate() {
        *v = _mm512_loadu_pd(acc[g].as_ptr());
    }
    let cp = classes.as_ptr();
    for (t, (x, &m)) in logits.iter().zip(masks).enumerate() {
        // lanes outside the window may overflow; they are discarded
        let e = _mm512_maskz_mov_pd(m, exp_nonpos_v(_mm512_sub_pd(_mm512_loadu_pd(x.as_ptr()), mv)));
        s = _mm512_add_pd(s, e);
        let row = cp.add(t * k);
        for (g, v) in a.iter_mut().enumerate() {
            *v = _mm512_fmadd_pd(e, _mm512_set1_pd(*row.add(g)), *v);
        }
        for (g, extra) in acc.iter_mut().enumerate().skip(G) {
            let p = extra.as_mut_ptr();
            _mm512_storeu_pd(p, _mm512_fmadd_pd(e, _mm512_set1_pd(*row.add(g)), _mm512_loadu_pd(p)));
        }
    }
    for (g, v) in a.iter().enumerate() {
        _mm512_storeu_pd(acc[g].as_mut_ptr(), *v);
    }
    _mm512_storeu_pd(sum.as_mut_ptr(), s);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn exp_propagate_avx512(logits: &[Lanes], masks: &[u8], max: &Lanes, classes: &[f64], sum: &mut Lanes, acc: &mut [Lanes]) {
    match acc.len() {
        1 => exp_propagate_group::<1>(logits, masks, max, classes, sum, acc),
        2 => exp_propagate_group::<2>(logits, masks, max, classes, sum, acc),
        3 => exp_propagate_group::<3>(logits, masks, max, classes, sum, acc),
        4 => exp_propagate_group::<4>(logits, masks, max, classes, sum, acc),
        5 => exp_propagate_group::<5>(logits, masks, max, classes, sum, acc),
        6 => exp_propagate_group::<6>(logits, masks, max, classes, sum, acc),
        7 => exp_propagate_group::<7>(logits, masks, max, classes, sum, acc),
        _ => exp_propagate_group::<8>(logits, masks, max, classes, sum, acc),
    }
}

/// For each reference `t`: `e = exp(logits[t][g] - max[g])` where lane `g`
/// is set in `masks[t]` and zero elsewhere, `sum[g] += e`, and
/// `acc[k][g] += e * classes[t*K + k]` as one fused multiply-add, in order.
pub(crate) fn tile_exp_propagate(
    logits: &[Lanes],
    masks: &[u8],
    max: &Lanes,
    classes: &[f64],
    sum: &mut Lanes,
    acc: &mut [Lanes],
) {
    assert!(!acc.is_empty() && logits.len() == masks.len());
    assert_eq!(classes.len(), logits.len() * acc.len());
    match detect() {
        #[cfg(target_arch = "x86_64")]
        // SAFETY: feature presence checked at runtime in `detect`; lengths
        // asserted above bound every access.
        Isa::Avx512 => unsafe { exp_propagate_avx512(logits, masks, max, classes, sum, acc) },
        #[cfg(target_arch = "x86_64")]
        // SAFETY: as above.
        Isa::Avx2 => unsafe { exp_propagate_avx2(logits, masks, max, classes, sum, acc) },
        Isa::Generic => exp_propagate_generic(logits, masks, max, classes, sum, acc),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n: usize, f: f64) -> Vec<f64> {
        (0..n).map(|i| ((i as f64) * f).sin()).collect()
    }

    fn lanes(n: usize, f: f64) -> Vec<Lanes> {
        data(n * LANES, f)
            .chunks_exact(LANES)
            .map(|c| c.try_into().unwrap())
            .collect()
    }

    fn bits(v: &[Lanes]) -> Vec<u64> {
        v.iter().flatten().map(|x| x.to_bits()).collect()
    }

    #[test]
    fn dots_paths_agree() {
        for c in [1, 3, 16, 21, 64, 65, 150] {
            let q = lanes(c, 0.37);
            for n in [1, 5, 8, 9, 23, 58] {
                let refs = data(n * c, 0.013);
                let masks: Vec<u8> = (0..n).map(|j| (j * 37 % 256) as u8).collect();
                let mut slow = vec![[0.0; LANES]; n];
                let mut hi_slow = [-1.0; LANES];
                dots_generic(&q, &refs, 3.0, &masks, &mut slow, &mut hi_slow);
                // alone, and sharing references with other tiles
                for group in 1..=3 {
                    let mut outs = vec![vec![[0.0; LANES]; n]; group];
                    let mut his = vec![[-1.0; LANES]; group];
                    let mut tiles: Vec<DotTile> = outs
                        .iter_mut()
                        .zip(&mut his)
                        .map(|(out, hi)| DotTile { q: &q, out, hi })
                        .collect();
                    tile_dots(&mut tiles, &refs, 3.0, &masks);
                    for (out, hi) in outs.iter().zip(&his) {
                        assert_eq!(bits(out), bits(&slow));
                        assert_eq!(hi, &hi_slow);
                    }
                }
                let (fast, hi_fast) = (slow, hi_slow);
                for (j, o) in fast.iter().enumerate() {
                    for g in 0..LANES {
                        let naive: f64 = (0..c).map(|i| q[i][g] * refs[j * c + i]).sum::<f64>() * 3.0;
                        assert!((naive - o[g]).abs() < 1e-12);
                    }
                }
                for g in 0..LANES {
                    let want = (0..n)
                        .filter(|&j| admits(masks[j], g))
                        .map(|j| fast[j][g])
                        .fold(-1.0, f64::max);
                    assert_eq!(hi_fast[g], want);
                }
            }
        }
    }

    #[test]
    fn exp_matches_libm() {
        let mut worst = 0.0f64;
        for i in 0..200_000 {
            let x = -(i as f64) * 0.0035;
            let (a, b) = (exp_nonpos(x), x.exp());
            worst = worst.max(((a - b) / b).abs());
        }
        assert!(worst < 4e-16, "{worst:e}");
        assert_eq!(exp_nonpos(0.0), 1.0);
        assert_eq!(exp_nonpos(-0.0), 1.0);
        assert!(exp_nonpos(-1e300) < 1e-307);
        assert_eq!(exp_nonpos(f64::NEG_INFINITY), exp_nonpos(-708.0));
    }

    #[test]
    fn exp_paths_agree() {
        for (rows, cols) in [(1, 1), (3, 7), (2, 58), (5, 13)] {
            let v: Vec<Lanes> = lanes(rows * cols, 1.3)
                .iter()
                .map(|l| l.map(|x| x * 30.0 - 31.0))
                .collect();
            let masks: Vec<u8> = (0..cols).map(|j| (j * 91 % 256) as u8 | 1).collect();
            let max = [0.0; LANES];
            let mut fast = v.clone();
            let mut sum_fast = [0.0; LANES];
            tile_exp(&mut fast, &masks, &max, &mut sum_fast);
            let mut slow = v.clone();
            let mut sum_slow = [0.0; LANES];
            exp_generic(&mut slow, &masks, &max, &mut sum_slow);
            assert_eq!(bits(&fast), bits(&slow));
            assert_eq!(sum_fast, sum_slow);
            for (t, (e, x)) in fast.iter().zip(&v).enumerate() {
                for g in 0..LANES {
                    if admits(masks[t % cols], g) {
                        assert!((e[g] - x[g].exp()).abs() <= 1e-15 * x[g].exp());
                    } else {
                        assert_eq!(e[g], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn exp_propagate_paths_agree() {
        for k in 1..=11 {
            for n in [1, 7, 30] {
                let logits: Vec<Lanes> = lanes(n, 0.77).iter().map(|l| l.map(|x| x * 4.0)).collect();
                let masks: Vec<u8> = (0..n).map(|j| (j * 53 % 256) as u8 | 0x81).collect();
                let max = [4.0; LANES];
                let classes = data(n * k, 0.21);
                let mut fast = vec![[0.5; LANES]; k];
                let mut sum_fast = [1.0; LANES];
                tile_exp_propagate(&logits, &masks, &max, &classes, &mut sum_fast, &mut fast);
                let mut slow = vec![[0.5; LANES]; k];
                let mut sum_slow = [1.0; LANES];
                exp_propagate_generic(&logits, &masks, &max, &classes, &mut sum_slow, &mut slow);
                assert_eq!(bits(&fast), bits(&slow));
                assert_eq!(sum_fast, sum_slow);

                // agrees with the separate exp pass
                let mut e = logits.clone();
                let mut sum = [1.0; LANES];
                tile_exp(&mut e, &masks, &max, &mut sum);
                assert_eq!(sum, sum_fast);
                for (kk, a) in fast.iter().enumerate() {
                    for g in 0..LANES {
                        let naive: f64 = 0.5 + (0..n).map(|t| e[t][g] * classes[t * k + kk]).sum::<f64>();
                        assert!((naive - a[g]).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
