//! Estimators on the compressed matrix, prediction metrics, aggregation and
//! variable importance.

mod aggregate;
mod importance;
mod linear;
mod logistic;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use aggregate::{aggregate_predict, AggregateModel};
pub use importance::{importance_table, variable_importance, ImportanceRow};
pub use linear::{fit_ols, fit_ridge, kkt_residual, SolverOptions};
pub use logistic::{
    fit_logistic, logistic_loss, projected_gradient_norm, restart_spread, sigmoid, softplus, LogisticOptions,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub solver: String,
    pub iterations: usize,
    /// Final multiplier of the norm constraint.
    pub lambda: Option<f64>,
    pub objective: f64,
    pub rank: Option<usize>,
    #[serde(default)]
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub estimator: String,
    pub alpha_hat: Option<f64>,
    pub b_hat: Vec<f64>,
    pub radius: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl FitResult {
    /// `alpha + S b` (linear predictor for logistic fits).
    pub fn predict(&self, s: &DMatrix<f64>) -> Result<Vec<f64>> {
        if s.ncols() != self.b_hat.len() {
            return Err(Error::Shape(format!("{} columns, {} coefficients", s.ncols(), self.b_hat.len())));
        }
        let a = self.alpha_hat.unwrap_or(0.0);
        Ok((s * nalgebra::DVector::from_column_slice(&self.b_hat)).iter().map(|v| v + a).collect())
    }
}

/// Options shared by every estimator; each uses the fields it needs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    /// Norm constraint for ridge and logistic.
    pub radius: Option<f64>,
    /// Fit an intercept; `None` uses the estimator default.
    pub intercept: Option<bool>,
}

pub trait Estimator: Send + Sync {
    fn name(&self) -> &'static str;
    fn fit(&self, s: &DMatrix<f64>, y: &[f64], opts: &FitOptions) -> Result<FitResult>;
}

struct Ols;
struct Ridge;
struct Logistic;

impl Estimator for Ols {
    fn name(&self) -> &'static str {
        "ols"
    }
    fn fit(&self, s: &DMatrix<f64>, y: &[f64], opts: &FitOptions) -> Result<FitResult> {
        fit_ols(s, y, &SolverOptions { intercept: opts.intercept.unwrap_or(true), ..Default::default() })
    }
}

impl Estimator for Ridge {
    fn name(&self) -> &'static str {
        "ridge"
    }
    fn fit(&self, s: &DMatrix<f64>, y: &[f64], opts: &FitOptions) -> Result<FitResult> {
        let Some(r) = opts.radius else { return invalid("ridge needs a radius") };
        fit_ridge(s, y, r, &SolverOptions { intercept: opts.intercept.unwrap_or(true), ..Default::default() })
    }
}

impl Estimator for Logistic {
    fn name(&self) -> &'static str {
        "logistic"
    }
    fn fit(&self, s: &DMatrix<f64>, y: &[f64], opts: &FitOptions) -> Result<FitResult> {
        let Some(r) = opts.radius else { return invalid("logistic regression needs a radius") };
        fit_logistic(s, y, r, &LogisticOptions { intercept: opts.intercept.unwrap_or(false), ..Default::default() })
    }
}

pub struct EstimatorRegistry {
    entries: Vec<Box<dyn Estimator>>,
}

impl Default for EstimatorRegistry {
    fn default() -> Self {
        let mut r = Self { entries: Vec::new() };
        r.register(Box::new(Ols));
        r.register(Box::new(Ridge));
        r.register(Box::new(Logistic));
        r
    }
}

impl EstimatorRegistry {
    pub fn register(&mut self, e: Box<dyn Estimator>) {
        self.entries.retain(|x| x.name() != e.name());
        self.entries.push(e);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Estimator> {
        match self.entries.iter().find(|e| e.name() == name) {
            Some(e) => Ok(e.as_ref()),
            None => invalid(format!("unknown estimator `{name}`; known: {}", self.names().join(", "))),
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }
}

/// `||pred - f||^2 / n`.
pub fn mspe(pred: &[f64], f_star: &[f64]) -> Result<f64> {
    if pred.len() != f_star.len() {
        return Err(Error::Shape("prediction and signal lengths differ".into()));
    }
    if pred.is_empty() {
        return Err(Error::NoRows);
    }
    Ok(pred.iter().zip(f_star).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / pred.len() as f64)
}

/// Excess logistic risk of the linear predictor `sb` relative to the true
/// linear predictor `lin` with success probabilities `probs`.
pub fn excess_risk_logistic(sb: &[f64], lin: &[f64], probs: &[f64]) -> Result<f64> {
    let n = sb.len();
    if lin.len() != n || probs.len() != n {
        return Err(Error::Shape("excess risk inputs differ in length".into()));
    }
    if probs.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return invalid("probabilities must lie in (0, 1)");
    }
    let risk = |v: &[f64]| v.iter().zip(probs).map(|(&e, &p)| -p * e + softplus(e)).sum::<f64>() / n as f64;
    Ok(risk(sb) - risk(lin))
}

#[cfg(test)]
mod tests;
