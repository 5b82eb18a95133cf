use rayon::prelude::*;

use super::{Estimator, FitOptions, FitResult};
use crate::error::{invalid, Result};
use crate::hashing::{Compressor, HashConfig};
use crate::rng::{sub_seed, Stream};
use crate::sparse::SparseMatrix;

/// Fits on `B` independently hashed copies of the data.
#[derive(Debug, Clone)]
pub struct AggregateModel {
    pub configs: Vec<HashConfig>,
    pub fits: Vec<FitResult>,
}

impl AggregateModel {
    /// Member seeds: the first is `seed` itself so that `B = 1` is a plain fit.
    pub fn seeds(seed: u64, b: usize) -> Vec<u64> {
        (0..b).map(|j| if j == 0 { seed } else { sub_seed(seed, Stream::Aggregate, j as u64) }).collect()
    }

    pub fn fit(
        x: &SparseMatrix,
        y: &[f64],
        cfg: &HashConfig,
        compressor: &dyn Compressor,
        estimator: &dyn Estimator,
        opts: &FitOptions,
        seeds: &[u64],
    ) -> Result<Self> {
        if seeds.is_empty() {
            return invalid("B must be at least 1");
        }
        let configs: Vec<HashConfig> = seeds.iter().map(|&s| HashConfig { seed: s, ..cfg.clone() }).collect();
        let fits = configs
            .par_iter()
            .map(|c| {
                let comp = compressor.compress(x, c)?;
                estimator.fit(&comp.s, y, opts)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { configs, fits })
    }

    /// Average of the member predictions, each on its own hashing of `x`.
    pub fn predict(&self, x: &SparseMatrix, compressor: &dyn Compressor) -> Result<Vec<f64>> {
        let preds = self
            .configs
            .par_iter()
            .zip(&self.fits)
            .map(|(c, f)| f.predict(&compressor.compress(x, c)?.s))
            .collect::<Result<Vec<_>>>()?;
        let b = preds.len() as f64;
        let mut out = vec![0.0; x.n_rows()];
        for p in &preds {
            for (o, v) in out.iter_mut().zip(p) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= b);
        Ok(out)
    }
}

/// Fit on `seeds.len()` hashings of `x` and return the averaged in-sample prediction.
pub fn aggregate_predict(
    x: &SparseMatrix,
    y: &[f64],
    cfg: &HashConfig,
    compressor: &dyn Compressor,
    estimator: &dyn Estimator,
    opts: &FitOptions,
    seeds: &[u64],
) -> Result<Vec<f64>> {
    AggregateModel::fit(x, y, cfg, compressor, estimator, opts, seeds)?.predict(x, compressor)
}
