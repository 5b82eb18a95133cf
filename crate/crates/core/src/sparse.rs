//! Compressed sparse row matrices and row-sparsity summaries.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major sparse matrix with strictly increasing column indices per row.
///
/// Stored values are never zero. Matrices built through [`SparseMatrix::from_csr`]
/// additionally satisfy `|v| <= 1`; [`SparseMatrix::from_csr_unbounded`] skips
/// that check and records the fact in [`SparseMatrix::is_bounded`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    offsets: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    bounded: bool,
}

impl SparseMatrix {
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        offsets: Vec<usize>,
        indices: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let m = Self::from_csr_unbounded(n_rows, n_cols, offsets, indices, values)?;
        if !m.bounded {
            return Err(Error::Format(format!("value with |v| > 1 (max {}); rescale the data first", m.max_abs())));
        }
        Ok(m)
    }

    /// Like [`SparseMatrix::from_csr`] but accepts arbitrary finite values.
    pub fn from_csr_unbounded(
        n_rows: usize,
        n_cols: usize,
        offsets: Vec<usize>,
        indices: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if offsets.len() != n_rows + 1 || offsets[0] != 0 {
            return Err(Error::Shape("offsets must have n_rows + 1 entries starting at 0".into()));
        }
        if indices.len() != values.len() || *offsets.last().unwrap() != indices.len() {
            return Err(Error::Shape("offsets, indices and values disagree".into()));
        }
        if n_cols > u32::MAX as usize {
            return Err(Error::Shape("too many columns".into()));
        }
        let mut bounded = true;
        for i in 0..n_rows {
            let (a, b) = (offsets[i], offsets[i + 1]);
            if a > b {
                return Err(Error::Shape(format!("row {i}: decreasing offsets")));
            }
            for j in a..b {
                let k = indices[j] as usize;
                if k >= n_cols {
                    return Err(Error::Shape(format!("row {i}: column {k} out of range")));
                }
                if j > a && indices[j - 1] >= indices[j] {
                    return Err(Error::Format(format!("row {i}: column indices not strictly increasing")));
                }
                let v = values[j];
                if !v.is_finite() {
                    return Err(Error::Format(format!("row {i}: non-finite value")));
                }
                if v == 0.0 {
                    return Err(Error::Format(format!("row {i}: explicit zero")));
                }
                if v.abs() > 1.0 {
                    bounded = false;
                }
            }
        }
        Ok(Self { n_rows, n_cols, offsets, indices, values, bounded })
    }

    /// Build from per-row `(column, value)` lists. Columns must be sorted.
    pub fn from_rows(n_cols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let (offsets, indices, values) = pack_rows(rows);
        Self::from_csr(rows.len(), n_cols, offsets, indices, values)
    }

    pub fn from_rows_unbounded(n_cols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let (offsets, indices, values) = pack_rows(rows);
        Self::from_csr_unbounded(rows.len(), n_cols, offsets, indices, values)
    }

    /// Binary matrix from per-row support sets (0-based, sorted).
    pub fn binary(n_cols: usize, supports: &[Vec<usize>]) -> Result<Self> {
        let rows: Vec<Vec<(usize, f64)>> = supports.iter().map(|s| s.iter().map(|&k| (k, 1.0)).collect()).collect();
        Self::from_rows(n_cols, &rows)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_bounded(&self) -> bool {
        self.bounded
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    #[inline]
    pub fn row_nnz(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Entry `(i, k)`, zero if not stored.
    pub fn get(&self, i: usize, k: usize) -> f64 {
        let (idx, val) = self.row(i);
        match idx.binary_search(&(k as u32)) {
            Ok(j) => val[j],
            Err(_) => 0.0,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 1.0)
    }

    /// `X beta`.
    pub fn mul_vec(&self, beta: &[f64]) -> Result<Vec<f64>> {
        if beta.len() != self.n_cols {
            return Err(Error::Shape(format!("coefficient length {} != column count {}", beta.len(), self.n_cols)));
        }
        Ok((0..self.n_rows)
            .map(|i| {
                let (idx, val) = self.row(i);
                idx.iter().zip(val).map(|(&k, &v)| v * beta[k as usize]).sum()
            })
            .collect())
    }

    /// Squared Euclidean norm of every column.
    pub fn column_sq_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for (&k, &v) in self.indices.iter().zip(&self.values) {
            out[k as usize] += v * v;
        }
        out
    }

    /// Divide every value by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        let values = self.values.iter().map(|v| v / s).collect();
        Self::from_csr_unbounded(self.n_rows, self.n_cols, self.offsets.clone(), self.indices.clone(), values)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (idx, val) = self.row(i);
            for (&k, &v) in idx.iter().zip(val) {
                d[(i, k as usize)] = v;
            }
        }
        d
    }
}

fn pack_rows(rows: &[Vec<(usize, f64)>]) -> (Vec<usize>, Vec<u32>, Vec<f64>) {
    let mut offsets = Vec::with_capacity(rows.len() + 1);
    offsets.push(0);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for r in rows {
        for &(k, v) in r {
            indices.push(k as u32);
            values.push(v);
        }
        offsets.push(indices.len());
    }
    (offsets, indices, values)
}

/// Row sparsity summary: `q_i`, `delta_i = q_i / p` and their aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityProfile {
    pub n: usize,
    pub p: usize,
    pub nnz: usize,
    pub q: Vec<usize>,
    pub q_min: usize,
    pub q_max: usize,
    pub delta: Vec<f64>,
    pub delta_bar: f64,
    pub delta_min: f64,
    pub empty_rows: usize,
}

impl SparsityProfile {
    pub fn is_equal(&self) -> bool {
        self.q_min == self.q_max
    }

    /// The common row sparsity, or an error naming the observed range.
    pub fn equal_q(&self) -> Result<usize> {
        if self.is_equal() {
            Ok(self.q_max)
        } else {
            Err(Error::Incompatible(format!(
                "rows have unequal sparsity (q between {} and {}); pad the design or use the scaled-signal construction",
                self.q_min, self.q_max
            )))
        }
    }

    /// `V(delta) = sum_i f_i^2 (delta_i - delta_bar)^2 / ||f||^2`, zero when `f = 0`.
    pub fn v_delta(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.n {
            return Err(Error::Shape("signal length differs from row count".into()));
        }
        let norm2: f64 = f.iter().map(|x| x * x).sum();
        if norm2 == 0.0 {
            return Ok(0.0);
        }
        let num: f64 = f.iter().zip(&self.delta).map(|(fi, d)| fi * fi * (d - self.delta_bar).powi(2)).sum();
        Ok(num / norm2)
    }
}

pub fn sparsity_profile(x: &SparseMatrix) -> SparsityProfile {
    let n = x.n_rows();
    let p = x.n_cols();
    let q: Vec<usize> = (0..n).map(|i| x.row_nnz(i)).collect();
    let delta: Vec<f64> = q.iter().map(|&qi| qi as f64 / p as f64).collect();
    let q_min = q.iter().copied().min().unwrap_or(0);
    let q_max = q.iter().copied().max().unwrap_or(0);
    SparsityProfile {
        n,
        p,
        nnz: x.nnz(),
        delta_bar: if n == 0 { 0.0 } else { x.nnz() as f64 / (n as f64 * p as f64) },
        delta_min: q_min as f64 / p as f64,
        empty_rows: q.iter().filter(|&&v| v == 0).count(),
        q,
        q_min,
        q_max,
        delta,
    }
}

/// Pad a binary design to equal row sparsity.
///
/// Appends `q_max - q_min` dummy columns; row `i` receives `q_max - q_i` ones
/// in the lowest-index dummy columns.
pub fn pad_equal_sparsity(x: &SparseMatrix) -> Result<SparseMatrix> {
    if !x.is_binary() {
        return Err(Error::Incompatible("padding is defined for binary designs only".into()));
    }
    let prof = sparsity_profile(x);
    let extra = prof.q_max - prof.q_min;
    let p = x.n_cols();
    let rows: Vec<Vec<(usize, f64)>> = (0..x.n_rows())
        .map(|i| {
            let (idx, _) = x.row(i);
            let mut r: Vec<(usize, f64)> = idx.iter().map(|&k| (k as usize, 1.0)).collect();
            r.extend((0..prof.q_max - prof.q[i]).map(|j| (p + j, 1.0)));
            r
        })
        .collect();
    SparseMatrix::from_rows(p + extra, &rows)
}
