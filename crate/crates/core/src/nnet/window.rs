//! Dynamic-feature windows and the window matrix `W` that maps a static
//! sequence to stacked static/velocity/acceleration features.
//!
//! Frames outside the sequence take the value of the nearest edge frame, so
//! `W` has at most two nonzeros merged into its first and last columns.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::banded::{BandedMatrix, NotPositiveDefinite};
use crate::seq::Seq;

#[derive(Debug, Error, PartialEq)]
pub enum WindowError {
    #[error("window {0} has even length")]
    EvenLength(usize),
    #[error("the first window must be the static window [1]")]
    NoStatic,
    #[error("window {0} has non-finite coefficients")]
    NonFinite(usize),
}

/// Ordered list of odd-length, centred FIR windows. Window 0 is static.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSet {
    windows: Vec<Vec<f64>>,
}

impl WindowSet {
    pub fn new(windows: Vec<Vec<f64>>) -> Result<Self, WindowError> {
        if windows.first().map(Vec::as_slice) != Some(&[1.0][..]) {
            return Err(WindowError::NoStatic);
        }
        for (i, w) in windows.iter().enumerate() {
            if w.len() % 2 == 0 {
                return Err(WindowError::EvenLength(i));
            }
            if w.iter().any(|c| !c.is_finite()) {
                return Err(WindowError::NonFinite(i));
            }
        }
        Ok(Self { windows })
    }

    pub fn static_only() -> Self {
        Self {
            windows: vec![vec![1.0]],
        }
    }

    /// Static, velocity `[-0.5, 0, 0.5]` and acceleration `[1, -2, 1]`.
    pub fn standard() -> Self {
        Self {
            windows: vec![vec![1.0], vec![-0.5, 0.0, 0.5], vec![1.0, -2.0, 1.0]],
        }
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn windows(&self) -> &[Vec<f64>] {
        &self.windows
    }

    pub fn max_half_width(&self) -> usize {
        self.windows.iter().map(|w| w.len() / 2).max().unwrap_or(0)
    }
}

impl Default for WindowSet {
    fn default() -> Self {
        Self::standard()
    }
}

/// Sparse rows of `W` for a sequence of `frames` frames.
///
/// Row `(t, k)` holds the taps of window `k` centred at frame `t`, with
/// out-of-range indices clamped and duplicate columns merged.
#[derive(Debug, Clone)]
pub struct WindowMatrix {
    frames: usize,
    windows: usize,
    half_width: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

pub fn build_window_matrix(frames: usize, windows: &WindowSet) -> WindowMatrix {
    let k_count = windows.len();
    let mut rows = Vec::with_capacity(frames * k_count);
    for t in 0..frames {
        for w in windows.windows() {
            let h = w.len() / 2;
            let mut taps: Vec<(usize, f64)> = Vec::with_capacity(w.len());
            for (j, &c) in w.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let s = (t + j).saturating_sub(h).min(frames - 1);
                match taps.iter_mut().find(|(col, _)| *col == s) {
                    Some(tap) => tap.1 += c,
                    None => taps.push((s, c)),
                }
            }
            rows.push(taps);
        }
    }
    WindowMatrix {
        frames,
        windows: k_count,
        half_width: windows.max_half_width(),
        rows,
    }
}

impl WindowMatrix {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn windows(&self) -> usize {
        self.windows
    }

    /// Taps of row `(t, k)`.
    pub fn row(&self, t: usize, k: usize) -> &[(usize, f64)] {
        &self.rows[t * self.windows + k]
    }

    /// `W c` for one dimension: returns `frames x windows`, row-major.
    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        assert_eq!(c.len(), self.frames);
        self.rows
            .iter()
            .map(|taps| taps.iter().map(|&(s, w)| w * c[s]).sum())
            .collect()
    }

    /// `Wᵀ g` for one dimension, `g` laid out as returned by [`apply`](Self::apply).
    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        assert_eq!(g.len(), self.rows.len());
        let mut out = vec![0.0; self.frames];
        for (taps, &gi) in self.rows.iter().zip(g) {
            for &(s, w) in taps {
                out[s] += w * gi;
            }
        }
        out
    }

    /// Applies `W` to every column of a `frames x D` sequence. The result is
    /// `frames x (K·D)` with window `k` of dimension `d` in column `k·D + d`.
    pub fn apply_seq(&self, c: &Seq) -> Seq {
        let d_count = c.dim();
        let mut out = Seq::zeros(self.frames, self.windows * d_count);
        for d in 0..d_count {
            let o = self.apply(&c.column(d));
            for t in 0..self.frames {
                for k in 0..self.windows {
                    out.set(t, k * d_count + d, o[t * self.windows + k]);
                }
            }
        }
        out
    }

    /// Transpose of [`apply_seq`](Self::apply_seq).
    pub fn apply_transpose_seq(&self, g: &Seq, d_count: usize) -> Seq {
        assert_eq!(g.dim(), self.windows * d_count);
        let mut out = Seq::zeros(self.frames, d_count);
        let mut buf = vec![0.0; self.rows.len()];
        for d in 0..d_count {
            for t in 0..self.frames {
                for k in 0..self.windows {
                    buf[t * self.windows + k] = g.get(t, k * d_count + d);
                }
            }
            out.set_column(d, &self.apply_transpose(&buf));
        }
        out
    }

    /// `Wᵀ diag(precision) W` in band form; `precision[k]` applies to every
    /// row of window `k`.
    pub fn normal_matrix(&self, precision: &[f64]) -> BandedMatrix {
        assert_eq!(precision.len(), self.windows);
        let width = (2 * self.half_width).min(self.frames.saturating_sub(1));
        let mut a = BandedMatrix::zeros(self.frames, width);
        for (r, taps) in self.rows.iter().enumerate() {
            let p = precision[r % self.windows];
            // taps have distinct columns, so each unordered pair is added once
            for (i, &(si, wi)) in taps.iter().enumerate() {
                for &(sj, wj) in &taps[..=i] {
                    a.add(si, sj, p * wi * wj);
                }
            }
        }
        a
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MlpgError {
    #[error("means have {got} columns, expected {expected}")]
    Shape { got: usize, expected: usize },
    #[error("variance for column {0} is not positive")]
    Variance(usize),
    #[error(transparent)]
    NotPositiveDefinite(#[from] NotPositiveDefinite),
}

/// Maximum-likelihood static sequence for stacked static+dynamic means.
///
/// `means` is `T x (K·D)` in the layout of [`WindowMatrix::apply_seq`] and
/// `variances` has one entry per column. Each dimension solves
/// `(Wᵀ Σ⁻¹ W) c = Wᵀ Σ⁻¹ ō` independently.
pub fn mlpg(means: &Seq, variances: &[f64], windows: &WindowSet) -> Result<Seq, MlpgError> {
    let k_count = windows.len();
    let frames = means.frames();
    if means.dim() % k_count != 0 || variances.len() != means.dim() {
        return Err(MlpgError::Shape {
            got: means.dim(),
            expected: k_count * (means.dim() / k_count).max(1),
        });
    }
    if let Some(i) = variances.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(MlpgError::Variance(i));
    }
    let d_count = means.dim() / k_count;
    let mut out = Seq::zeros(frames, d_count);
    if frames == 0 {
        return Ok(out);
    }
    let w = build_window_matrix(frames, windows);
    for d in 0..d_count {
        let precision: Vec<f64> = (0..k_count)
            .map(|k| 1.0 / variances[k * d_count + d])
            .collect();
        let mut weighted = vec![0.0; frames * k_count];
        for t in 0..frames {
            for k in 0..k_count {
                weighted[t * k_count + k] = means.get(t, k * d_count + d) * precision[k];
            }
        }
        let rhs = w.apply_transpose(&weighted);
        let c = w.normal_matrix(&precision).cholesky()?.solve(&rhs);
        out.set_column(d, &c);
    }
    Ok(out)
}
