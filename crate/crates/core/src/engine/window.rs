use std::ops::Range;

/// Square neighbourhood restriction on (query, reference) pixel pairs.
///
/// `n` is the full window edge in feature-grid pixels; a pair is admitted
/// when its Chebyshev distance is at most `n / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpatialWindowMask {
    height: usize,
    width: usize,
    radius: usize,
}

impl SpatialWindowMask {
    pub fn new(height: usize, width: usize, n: usize) -> Self {
        Self {
            height,
            width,
            radius: n / 2,
        }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn rows(&self, qy: usize) -> Range<usize> {
        qy.saturating_sub(self.radius)..(qy + self.radius + 1).min(self.height)
    }

    #[inline]
    pub fn cols(&self, qx: usize) -> Range<usize> {
        qx.saturating_sub(self.radius)..(qx + self.radius + 1).min(self.width)
    }

    pub fn admits(&self, q: (usize, usize), p: (usize, usize)) -> bool {
        q.0.abs_diff(p.0) <= self.radius && q.1.abs_diff(p.1) <= self.radius
    }

    /// Number of reference pixels admitted for query `(qy, qx)` in one frame.
    pub fn admitted(&self, qy: usize, qx: usize) -> usize {
        self.rows(qy).len() * self.cols(qx).len()
    }

    /// Per-query admitted counts, row-major.
    pub fn admitted_counts(&self) -> Vec<usize> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| self.admitted(y, x)))
            .collect()
    }

    pub fn is_fully_connected(&self) -> bool {
        self.radius + 1 >= self.height.max(self.width)
    }
}

pub fn build_spatial_mask(height: usize, width: usize, n: usize) -> SpatialWindowMask {
    SpatialWindowMask::new(height, width, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_by_three_radius_one() {
        let m = build_spatial_mask(3, 3, 2);
        assert_eq!(m.admitted(1, 1), 9);
        assert_eq!(m.admitted(0, 0), 4);
        assert_eq!(m.admitted(0, 2), 4);
        assert_eq!(m.admitted(0, 1), 6);
        // brute-force enumeration
        for q in 0..9usize {
            let n = (0..9usize)
                .filter(|&p| m.admits((q / 3, q % 3), (p / 3, p % 3)))
                .count();
            assert_eq!(n, m.admitted(q / 3, q % 3));
        }
    }

    #[test]
    fn zero_window_is_identity() {
        let m = build_spatial_mask(4, 5, 0);
        assert!(m.admitted_counts().iter().all(|&c| c == 1));
        assert!(m.admits((2, 3), (2, 3)));
        assert!(!m.admits((2, 3), (2, 4)));
    }

    #[test]
    fn large_window_is_dense() {
        let m = build_spatial_mask(4, 4, 100);
        assert!(m.admitted_counts().iter().all(|&c| c == 16));
        assert!(m.is_fully_connected());
    }

    #[test]
    fn symmetric() {
        let m = build_spatial_mask(6, 7, 3);
        for a in 0..42usize {
            for b in 0..42usize {
                let (qa, qb) = ((a / 7, a % 7), (b / 7, b % 7));
                assert_eq!(m.admits(qa, qb), m.admits(qb, qa));
            }
        }
    }
}
