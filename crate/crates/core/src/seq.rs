//! Dense row-major frame sequences.

use serde::{Deserialize, Serialize};

/// A `frames x dim` matrix stored row-major, one row per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seq {
    frames: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Seq {
    pub fn zeros(frames: usize, dim: usize) -> Self {
        Self {
            frames,
            dim,
            data: vec![0.0; frames * dim],
        }
    }

    /// Builds a sequence from a flat row-major buffer.
    ///
    /// Panics if `data.len() != frames * dim`.
    pub fn from_vec(frames: usize, dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), frames * dim, "buffer does not match shape");
        Self { frames, dim, data }
    }

    /// Builds a sequence from rows of equal width. An empty input yields a
    /// `0 x dim` sequence with `dim = 0`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), dim, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            frames: rows.len(),
            dim,
            data,
        }
    }

    pub fn from_column(values: &[f64]) -> Self {
        Self::from_vec(values.len(), 1, values.to_vec())
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.frames).map(move |t| self.row(t))
    }

    pub fn get(&self, t: usize, d: usize) -> f64 {
        self.data[t * self.dim + d]
    }

    pub fn set(&mut self, t: usize, d: usize, v: f64) {
        self.data[t * self.dim + d] = v;
    }

    pub fn column(&self, d: usize) -> Vec<f64> {
        (0..self.frames).map(|t| self.get(t, d)).collect()
    }

    pub fn set_column(&mut self, d: usize, values: &[f64]) {
        assert_eq!(values.len(), self.frames);
        for (t, v) in values.iter().enumerate() {
            self.set(t, d, *v);
        }
    }

    /// Selects a subset of columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Seq {
        let mut out = Seq::zeros(self.frames, cols.len());
        for t in 0..self.frames {
            for (j, &c) in cols.iter().enumerate() {
                out.set(t, j, self.get(t, c));
            }
        }
        out
    }

    /// Concatenates columns of two sequences with equal frame counts.
    pub fn hstack(&self, other: &Seq) -> Seq {
        assert_eq!(self.frames, other.frames);
        let dim = self.dim + other.dim;
        let mut data = Vec::with_capacity(self.frames * dim);
        for t in 0..self.frames {
            data.extend_from_slice(self.row(t));
            data.extend_from_slice(other.row(t));
        }
        Seq::from_vec(self.frames, dim, data)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_columns() {
        let s = Seq::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        assert_eq!(s.frames(), 3);
        assert_eq!(s.column(1), vec![2.0, 4.0, 6.0]);
        assert_eq!(s.rows().count(), 3);
        let picked = s.select_columns(&[1]);
        assert_eq!(picked.as_slice(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn zero_width() {
        let s = Seq::zeros(4, 0);
        assert!(s.rows().all(|r| r.is_empty()));
        assert_eq!(s.frames(), 4);
    }
}
