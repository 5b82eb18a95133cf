use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::rng::{stream_rng, Stream};
use crate::sparse::SparseMatrix;

fn projection_row(seed: u64, k: usize, l: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, Stream::Projection, k as u64);
    (0..l).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// The `p x L` Gaussian projection matrix; row `k` depends only on `(seed, k)`.
pub fn projection_matrix(p: usize, l: usize, seed: u64) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(p, l);
    for k in 0..p {
        for (j, v) in projection_row(seed, k, l).into_iter().enumerate() {
            a[(k, j)] = v;
        }
    }
    a
}

/// `S = X A` with `A` from [`projection_matrix`]; only rows of `A` for occupied columns are drawn.
pub fn random_projection(x: &SparseMatrix, l: usize, seed: u64) -> Result<DMatrix<f64>> {
    if l == 0 {
        return invalid("L must be at least 1");
    }
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; x.n_cols()];
    let mut s = DMatrix::zeros(x.n_rows(), l);
    for i in 0..x.n_rows() {
        let (idx, val) = x.row(i);
        for (&k, &v) in idx.iter().zip(val) {
            let a = rows[k as usize].get_or_insert_with(|| projection_row(seed, k as usize, l));
            for j in 0..l {
                s[(i, j)] += v * a[j];
            }
        }
    }
    Ok(s)
}
