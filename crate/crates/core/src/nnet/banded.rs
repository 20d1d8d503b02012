//! Banded symmetric positive-definite systems.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("matrix is not positive definite (pivot {pivot} = {value})")]
pub struct NotPositiveDefinite {
    pub pivot: usize,
    pub value: f64,
}

/// Lower band of a symmetric matrix: `band[i][j] = A[i][i - j]` for
/// `j <= width`. Entries that would fall before row 0 are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    width: usize,
    band: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, width: usize) -> Self {
        Self {
            n,
            width,
            band: vec![0.0; n * (width + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `A[i][j]` for `|i - j| <= width`, zero elsewhere.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let off = hi - lo;
        if off > self.width {
            0.0
        } else {
            self.band[hi * (self.width + 1) + off]
        }
    }

    /// Adds `v` to `A[i][j]` (and by symmetry `A[j][i]`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let off = hi - lo;
        assert!(off <= self.width, "entry ({i}, {j}) outside the band");
        self.band[hi * (self.width + 1) + off] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.width);
            for j in lo..=i {
                let a = self.get(i, j);
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// In-place Cholesky factorization `A = L Lᵀ`, keeping the band layout.
    pub fn cholesky(mut self) -> Result<BandedCholesky, NotPositiveDefinite> {
        let w = self.width;
        let stride = w + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(w);
            for j in lo..=i {
                // L[i][j] = (A[i][j] - sum_k L[i][k] L[j][k]) / L[j][j]
                let klo = lo.max(j.saturating_sub(w));
                let mut s = self.band[i * stride + (i - j)];
                for k in klo..j {
                    s -= self.band[i * stride + (i - k)] * self.band[j * stride + (j - k)];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(NotPositiveDefinite { pivot: i, value: s });
                    }
                    self.band[i * stride] = s.sqrt();
                } else {
                    self.band[i * stride + (i - j)] = s / self.band[j * stride];
                }
            }
        }
        Ok(BandedCholesky { factor: self })
    }
}

/// Lower-triangular banded Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    factor: BandedMatrix,
}

impl BandedCholesky {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let f = &self.factor;
        let (n, w) = (f.n, f.width);
        let stride = w + 1;
        assert_eq!(rhs.len(), n);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(w);
            let mut s = y[i];
            for k in lo..i {
                s -= f.band[i * stride + (i - k)] * y[k];
            }
            y[i] = s / f.band[i * stride];
        }
        for i in (0..n).rev() {
            let hi = (i + w).min(n.saturating_sub(1));
            let mut s = y[i];
            for k in i + 1..=hi {
                s -= f.band[k * stride + (k - i)] * y[k];
            }
            y[i] = s / f.band[i * stride];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn random_spd(n: usize, w: usize, seed: u64) -> BandedMatrix {
        let mut m = BandedMatrix::zeros(n, w);
        let mut x = seed as f64;
        let mut next = || {
            x = (x * 16807.0 + 0.5) % 2147483647.0;
            x / 2147483647.0 - 0.5
        };
        for i in 0..n {
            for j in i.saturating_sub(w)..i {
                m.add(i, j, next());
            }
            m.add(i, i, 2.0 * (w as f64 + 1.0));
        }
        m
    }

    #[test]
    fn matches_dense_solve() {
        for (n, w, seed) in [(1, 0, 3), (5, 1, 7), (17, 2, 11), (40, 4, 19)] {
            let a = random_spd(n, w, seed);
            let dense = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
            let rhs: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
            let expected = dense.lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
            let got = a.clone().cholesky().unwrap().solve(&rhs);
            for i in 0..n {
                assert!((got[i] - expected[i]).abs() < 1e-12 * (1.0 + expected[i].abs()));
            }
            let back = a.mul_vec(&got);
            for i in 0..n {
                assert!((back[i] - rhs[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let mut a = BandedMatrix::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(1, 0, 2.0);
        assert_eq!(a.cholesky().unwrap_err().pivot, 1);
    }
}
