use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::FitResult;
use crate::error::{Error, Result};
use crate::hashing::HashOutput;

/// Change in fitted values when variable `k` is removed before hashing:
/// `diff_i = sum_l (S_il - S~_il) 1{H_il = k} b_l`. Returns the vector and its norm.
pub fn variable_importance(
    fit: &FitResult,
    h: &HashOutput,
    s: &DMatrix<f64>,
    s_second: &DMatrix<f64>,
    k: usize,
    p: usize,
) -> Result<(Vec<f64>, f64)> {
    if k >= p {
        return Err(Error::InvalidParam(format!("variable {k} out of range (p = {p})")));
    }
    if s.shape() != (h.n, h.l) || s_second.shape() != (h.n, h.l) || fit.b_hat.len() != h.l {
        return Err(Error::Shape("importance needs random-sign S, second-min S and a fit of matching size".into()));
    }
    let mut diff = vec![0.0; h.n];
    for l in 0..h.l {
        let b = fit.b_hat[l];
        if b == 0.0 {
            continue;
        }
        for (i, d) in diff.iter_mut().enumerate() {
            if h.h(i, l) == Some(k) {
                *d += (s[(i, l)] - s_second[(i, l)]) * b;
            }
        }
    }
    let norm = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok((diff, norm))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    /// 1-based variable index.
    pub k: usize,
    pub norm: f64,
    /// 1 for the most important variable.
    pub rank: usize,
}

/// Importance norms for every variable, ranked by decreasing norm (ties by index).
pub fn importance_table(
    fit: &FitResult,
    h: &HashOutput,
    s: &DMatrix<f64>,
    s_second: &DMatrix<f64>,
    p: usize,
) -> Result<Vec<ImportanceRow>> {
    let norms =
        (0..p).map(|k| variable_importance(fit, h, s, s_second, k, p).map(|r| r.1)).collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let mut rows = vec![ImportanceRow { k: 0, norm: 0.0, rank: 0 }; p];
    for (r, &k) in order.iter().enumerate() {
        rows[k] = ImportanceRow { k: k + 1, norm: norms[k], rank: r + 1 };
    }
    Ok(rows)
}
