//! Minimal sparse matrix support: coordinate-list assembly finalized into
//! compressed-row form. Entries with magnitude below [`ASSEMBLY_DROP_TOL`]
//! are dropped when the matrix is finalized.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};

/// Magnitude below which assembled entries are discarded.
pub const ASSEMBLY_DROP_TOL: f64 = 1e-15;

/// Row-sum tolerance for a valid Markov generator.
pub const MARKOV_ROW_TOL: f64 = 1e-12;

/// Scalars storable in a sparse matrix. Implemented for `f64` and `Complex64`.
pub trait SparseScalar:
    Copy + Zero + std::ops::AddAssign + std::ops::Mul<Output = Self> + PartialEq + 'static
{
    fn magnitude(&self) -> f64;
    fn write_triplet(&self, w: &mut dyn Write, row: usize, col: usize) -> std::io::Result<()>;
}

impl SparseScalar for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn write_triplet(&self, w: &mut dyn Write, row: usize, col: usize) -> std::io::Result<()> {
        writeln!(w, "{row} {col} {self:.17e}")
    }
}

impl SparseScalar for Complex64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn write_triplet(&self, w: &mut dyn Write, row: usize, col: usize) -> std::io::Result<()> {
        writeln!(w, "{row} {col} {:.17e} {:.17e}", self.re, self.im)
    }
}

/// Coordinate-list assembly buffer.
#[derive(Debug, Clone)]
pub struct CooBuilder<T> {
    dim: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: SparseScalar> CooBuilder<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// Add `value` at `(row, col)`; duplicate coordinates accumulate.
    pub fn add(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.dim && col < self.dim);
        self.entries.push((row, col, value));
    }

    /// Finalize into compressed-row form, accumulating duplicates and
    /// dropping entries below [`ASSEMBLY_DROP_TOL`].
    pub fn finalize(mut self) -> CsrMatrix<T> {
        self.entries
            .sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut rows: Vec<usize> = Vec::new();
        let mut cols: Vec<usize> = Vec::new();
        let mut vals: Vec<T> = Vec::new();
        for (r, c, v) in self.entries {
            if let (Some(&lr), Some(&lc)) = (rows.last(), cols.last()) {
                if lr == r && lc == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            cols.push(c);
            vals.push(v);
        }
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut kept_cols = Vec::with_capacity(cols.len());
        let mut kept_vals = Vec::with_capacity(vals.len());
        let mut idx = 0;
        for row in 0..self.dim {
            while idx < rows.len() && rows[idx] == row {
                if vals[idx].magnitude() >= ASSEMBLY_DROP_TOL {
                    kept_cols.push(cols[idx]);
                    kept_vals.push(vals[idx]);
                }
                idx += 1;
            }
            row_ptr[row + 1] = kept_cols.len();
        }
        CsrMatrix {
            dim: self.dim,
            row_ptr,
            cols: kept_cols,
            vals: kept_vals,
        }
    }
}

/// Immutable compressed-row sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: SparseScalar> CsrMatrix<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entries of one row as `(col, value)` pairs.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        self.cols[lo..hi]
            .iter()
            .copied()
            .zip(self.vals[lo..hi].iter().copied())
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        for (c, v) in self.row(row) {
            if c == col {
                return v;
            }
        }
        T::zero()
    }

    pub fn to_dense(&self) -> DMatrix<T>
    where
        T: nalgebra::Scalar,
    {
        let mut m = DMatrix::<T>::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// `out = v * self` treating `v` as a row vector (density convention).
    pub fn row_vec_mul(&self, v: &[T], out: &mut [T]) {
        assert_eq!(v.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        for x in out.iter_mut() {
            *x = T::zero();
        }
        for r in 0..self.dim {
            let vr = v[r];
            for (c, w) in self.row(r) {
                out[c] += vr * w;
            }
        }
    }

    /// Plain-text triplet export: a comment header followed by one
    /// `row col value` (or `row col re im`) line per stored entry.
    pub fn write_triplets(&self, mut w: impl Write, tag: &str, provenance: &str) -> Result<()> {
        writeln!(w, "# {provenance}")?;
        writeln!(w, "# dim={} tag={} nnz={}", self.dim, tag, self.nnz())?;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                v.write_triplet(&mut w, r, c)?;
            }
        }
        Ok(())
    }
}

impl CsrMatrix<f64> {
    /// Check the Markov generator convention: off-diagonal entries
    /// nonnegative, every row summing to zero within [`MARKOV_ROW_TOL`].
    pub fn validate_markov(&self) -> Result<()> {
        for r in 0..self.dim {
            let mut sum = 0.0;
            for (c, v) in self.row(r) {
                sum += v;
                if c != r && v < -MARKOV_ROW_TOL {
                    return Err(Error::NotMarkov(format!(
                        "negative off-diagonal {v:e} at ({r}, {c})"
                    )));
                }
            }
            if sum.abs() > MARKOV_ROW_TOL {
                return Err(Error::NotMarkov(format!("row {r} sums to {sum:e}")));
            }
        }
        Ok(())
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.get(r, r).abs())
            .fold(0.0, f64::max)
    }

    /// Largest row-sum deviation from zero.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// Most negative off-diagonal entry (0 when all are nonnegative).
    pub fn min_off_diagonal(&self) -> f64 {
        let mut min = 0.0f64;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                if c != r {
                    min = min.min(v);
                }
            }
        }
        min
    }
}
