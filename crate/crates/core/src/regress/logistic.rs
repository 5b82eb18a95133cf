//! Norm-constrained logistic regression by projected gradient descent.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Diagnostics, FitResult};
use crate::error::{invalid, Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    /// Fit an unpenalised intercept (off by default).
    pub intercept: bool,
    pub max_iter: usize,
    /// Stop once an accepted step decreases the objective by less than this...
    pub min_decrease: f64,
    /// ...and the gradient-mapping norm is below this.
    pub stationarity_tol: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self { intercept: false, max_iter: 10_000, min_decrease: 1e-10, stationarity_tol: 1e-8 }
    }
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Average logistic loss `(1/n) sum [-y_i eta_i + log(1 + e^{eta_i})]`.
pub fn logistic_loss(lin: &[f64], y: &[f64]) -> f64 {
    lin.iter().zip(y).map(|(&e, &yi)| -yi * e + softplus(e)).sum::<f64>() / y.len() as f64
}

struct Problem<'a> {
    s: &'a DMatrix<f64>,
    y: DVector<f64>,
    intercept: bool,
    radius: f64,
}

impl Problem<'_> {
    fn n(&self) -> f64 {
        self.s.nrows() as f64
    }

    fn linpred(&self, b: &DVector<f64>, a: f64) -> DVector<f64> {
        let mut lin = self.s * b;
        if self.intercept {
            lin.add_scalar_mut(a);
        }
        lin
    }

    fn value(&self, b: &DVector<f64>, a: f64) -> f64 {
        logistic_loss(self.linpred(b, a).as_slice(), self.y.as_slice())
    }

    fn grad(&self, b: &DVector<f64>, a: f64) -> (DVector<f64>, f64) {
        let lin = self.linpred(b, a);
        let r = DVector::from_iterator(lin.len(), lin.iter().zip(self.y.iter()).map(|(&e, &y)| sigmoid(e) - y));
        let gb = self.s.tr_mul(&r) / self.n();
        let ga = if self.intercept { r.sum() / self.n() } else { 0.0 };
        (gb, ga)
    }

    fn project(&self, b: DVector<f64>) -> DVector<f64> {
        let nrm = b.norm();
        if nrm > self.radius {
            b * (self.radius / nrm)
        } else {
            b
        }
    }

    fn solve(&self, b0: DVector<f64>, opts: &LogisticOptions) -> Result<(DVector<f64>, f64, usize, f64)> {
        // Step size from the Lipschitz bound ||S||_F^2 / (4n), then adapted.
        let lip = (self.s.norm_squared() + if self.intercept { self.n() } else { 0.0 }) / (4.0 * self.n());
        let mut t = if lip > 0.0 { 1.0 / lip } else { 1.0 };
        let mut b = self.project(b0);
        let mut a = 0.0;
        let mut f = self.value(&b, a);
        let mut it = 0;
        while it < opts.max_iter {
            it += 1;
            let (gb, ga) = self.grad(&b, a);
            let mut accepted = None;
            let mut tt = t;
            for _ in 0..200 {
                let nb = self.project(&b - &gb * tt);
                let na = a - ga * tt;
                let dir = gb.dot(&(&nb - &b)) + ga * (na - a);
                let nf = self.value(&nb, na);
                if nf <= f + 1e-4 * dir {
                    accepted = Some((nb, na, nf));
                    break;
                }
                tt *= 0.5;
            }
            let Some((nb, na, nf)) = accepted else { break };
            if nf > f {
                return Err(Error::Numerical("logistic objective increased".into()));
            }
            let step = ((&nb - &b).norm_squared() + (na - a).powi(2)).sqrt() / tt;
            let decrease = f - nf;
            b = nb;
            a = na;
            f = nf;
            t = tt * 2.0;
            if decrease < opts.min_decrease && step < opts.stationarity_tol {
                break;
            }
        }
        Ok((b, a, it, f))
    }
}

fn check_labels(y: &[f64]) -> Result<()> {
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return invalid("logistic labels must be 0 or 1");
    }
    Ok(())
}

pub fn fit_logistic(s: &DMatrix<f64>, y: &[f64], radius: f64, opts: &LogisticOptions) -> Result<FitResult> {
    fit_logistic_from(s, y, radius, opts, DVector::zeros(s.ncols()))
}

fn fit_logistic_from(
    s: &DMatrix<f64>,
    y: &[f64],
    radius: f64,
    opts: &LogisticOptions,
    start: DVector<f64>,
) -> Result<FitResult> {
    if !(radius >= 0.0) {
        return invalid("radius must be non-negative");
    }
    if y.len() != s.nrows() {
        return Err(Error::Shape(format!("{} labels for {} rows", y.len(), s.nrows())));
    }
    check_labels(y)?;
    let prob = Problem { s, y: DVector::from_column_slice(y), intercept: opts.intercept, radius };
    let (b, a, it, f) = prob.solve(start, opts)?;
    Ok(FitResult {
        estimator: "logistic".into(),
        alpha_hat: opts.intercept.then_some(a),
        b_hat: b.iter().copied().collect(),
        radius: Some(radius),
        diagnostics: Diagnostics {
            solver: "projected-gradient".into(),
            iterations: it,
            objective: f,
            ..Default::default()
        },
    })
}

/// Re-solve from `restarts` random feasible starting points and return the
/// spread (max minus min) of the attained objectives.
pub fn restart_spread(
    s: &DMatrix<f64>,
    y: &[f64],
    radius: f64,
    opts: &LogisticOptions,
    restarts: usize,
    seed: u64,
) -> Result<f64> {
    let mut vals = vec![fit_logistic(s, y, radius, opts)?.diagnostics.objective];
    for r in 0..restarts {
        let mut rng = stream_rng(seed, Stream::Restart, r as u64);
        let mut v = DVector::from_fn(s.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let u: f64 = rng.random();
        let nrm = v.norm();
        if nrm > 0.0 {
            v *= radius * u.powf(1.0 / s.ncols().max(1) as f64) / nrm;
        }
        vals.push(fit_logistic_from(s, y, radius, opts, v)?.diagnostics.objective);
    }
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(hi - lo)
}

/// Norm of the projected-gradient step `b - P(b - grad f(b))`, zero at a constrained optimum.
pub fn projected_gradient_norm(s: &DMatrix<f64>, y: &[f64], fit: &FitResult) -> Result<f64> {
    let radius = fit.radius.unwrap_or(f64::INFINITY);
    let prob = Problem { s, y: DVector::from_column_slice(y), intercept: fit.alpha_hat.is_some(), radius };
    let b = DVector::from_column_slice(&fit.b_hat);
    let a = fit.alpha_hat.unwrap_or(0.0);
    let (gb, ga) = prob.grad(&b, a);
    let pb = prob.project(&b - &gb);
    Ok(((&b - pb).norm_squared() + ga * ga).sqrt())
}
