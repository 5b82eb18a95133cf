//! Replicated comparison of compression/estimator pairs over a grid of `L`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate, ScenarioConfig, ScenarioData};
use crate::error::{invalid, Result};
use crate::hashing::{CompressorRegistry, HashConfig, Variant};
use crate::oracle::bounds::oracle_radius;
use crate::oracle::InteractionSpec;
use crate::regress::{
    aggregate_predict, excess_risk_logistic, mspe, sigmoid, AggregateModel, EstimatorRegistry, FitOptions,
};
use crate::rng::{sub_seed, Stream};
use crate::sparse::sparsity_profile;

/// `compressor+estimator`, e.g. `random-sign+ridge`. A bare compressor name means OLS.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Method {
    pub compressor: String,
    pub estimator: String,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        let (c, e) = s.split_once('+').unwrap_or((s, "ols"));
        let (c, e) = (c.trim(), e.trim());
        CompressorRegistry::default().get(c)?;
        EstimatorRegistry::default().get(e)?;
        Ok(Self { compressor: c.into(), estimator: e.into() })
    }

    pub fn label(&self) -> String {
        format!("{}+{}", self.compressor, self.estimator)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub methods: Vec<Method>,
    pub l_grid: Vec<usize>,
    /// Bits per code for the b-bit compressors.
    pub bits: u32,
    /// Number of aggregated hashings per fit.
    pub aggregate: usize,
    pub reps: usize,
    /// Fixed constraint radius; otherwise the oracle radius with `eta`.
    pub radius: Option<f64>,
    pub eta: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            methods: vec![Method { compressor: "random-sign".into(), estimator: "ols".into() }],
            l_grid: vec![64],
            bits: 1,
            aggregate: 1,
            reps: 10,
            radius: None,
            eta: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario: String,
    pub method: String,
    #[serde(rename = "L")]
    pub l: usize,
    pub mspe: f64,
    pub se: f64,
    /// MSPE divided by the smallest MSPE in the scenario.
    pub relative: f64,
}

/// The full signal as an interaction model; only possible for binary designs.
pub fn signal_spec(cfg: &ScenarioConfig, d: &ScenarioData) -> Result<Option<InteractionSpec>> {
    if !d.x.is_binary() {
        return Ok(None);
    }
    let p = d.x.n_cols();
    let Some(blocks) = &d.blocks else {
        return InteractionSpec::new(d.beta.clone(), Vec::new()).map(Some);
    };
    let g = blocks.as_interaction_spec(p, cfg.interaction_strength)?;
    let theta1 = g.theta1.iter().zip(&d.beta).map(|(a, b)| a + b).collect();
    InteractionSpec::new(theta1, g.theta2).map(Some)
}

/// Oracle radius `sqrt((1 + eta) c (2 - q/p) q norm^2 / L)` at `q = q_max`,
/// with `norm = l(Theta)` when the signal has an interaction part.
pub fn default_radius(cfg: &ScenarioConfig, d: &ScenarioData, l: usize, eta: f64) -> Result<f64> {
    let prof = sparsity_profile(&d.x);
    let q = prof.q_max.max(1);
    let beta_norm = d.beta.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (norm, inter) = match (&d.blocks, signal_spec(cfg, d)?) {
        (Some(_), Some(spec)) => (spec.norm(q), true),
        _ => (beta_norm, false),
    };
    Ok(oracle_radius(d.x.n_cols(), q, l, eta, norm, inter))
}

fn one_metric(
    cfg: &ScenarioConfig,
    d: &ScenarioData,
    m: &Method,
    l: usize,
    rep: u64,
    opts: &SweepOptions,
) -> Result<f64> {
    let comps = CompressorRegistry::default();
    let ests = EstimatorRegistry::default();
    let comp = comps.get(&m.compressor)?;
    let est = ests.get(&m.estimator)?;
    let seed = sub_seed(cfg.seed, Stream::Replication, rep);
    let hc = HashConfig::new(Variant::RandomSign, l, opts.bits, seed);
    let radius = match (est.name(), opts.radius) {
        ("ols", _) => None,
        (_, Some(r)) => Some(r),
        _ => Some(default_radius(cfg, d, l, opts.eta)?),
    };
    let fo = FitOptions { radius, intercept: None };
    let pred = aggregate_predict(&d.x, &d.y, &hc, comp, est, &fo, &AggregateModel::seeds(seed, opts.aggregate))?;
    if est.name() == "logistic" {
        let probs: Vec<f64> = d.f_star.iter().map(|&f| sigmoid(f)).collect();
        excess_risk_logistic(&pred, &d.f_star, &probs)
    } else {
        mspe(&pred, &d.f_star)
    }
}

/// Mean metric and its standard error for every (method, L), then relative values.
pub fn run_sweep(cfg: &ScenarioConfig, opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    if opts.methods.is_empty() || opts.l_grid.is_empty() {
        return invalid("need at least one method and one L");
    }
    if opts.reps == 0 || opts.aggregate == 0 {
        return invalid("replications and B must be positive");
    }
    let cells: Vec<(usize, usize)> =
        (0..opts.methods.len()).flat_map(|m| opts.l_grid.iter().map(move |&l| (m, l))).collect();
    let per_rep = (0..opts.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let d = generate(cfg, rep)?;
            cells.iter().map(|&(m, l)| one_metric(cfg, &d, &opts.methods[m], l, rep, opts)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let r = opts.reps as f64;
    let mut rows: Vec<SweepRow> = cells
        .iter()
        .enumerate()
        .map(|(c, &(m, l))| {
            let mean = per_rep.iter().map(|v| v[c]).sum::<f64>() / r;
            let se = if opts.reps > 1 {
                (per_rep.iter().map(|v| (v[c] - mean).powi(2)).sum::<f64>() / (r - 1.0) / r).sqrt()
            } else {
                0.0
            };
            SweepRow { scenario: cfg.name.clone(), method: opts.methods[m].label(), l, mspe: mean, se, relative: 1.0 }
        })
        .collect();
    let best = rows.iter().map(|r| r.mspe).fold(f64::INFINITY, f64::min);
    for row in &mut rows {
        row.relative = if best > 0.0 {
            row.mspe / best
        } else if row.mspe == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names() {
        let m = Method::parse("bbit-shuffled+ridge").unwrap();
        assert_eq!(m.label(), "bbit-shuffled+ridge");
        assert_eq!(Method::parse("random-sign").unwrap().estimator, "ols");
        assert!(Method::parse("minhash+ols").is_err());
        assert!(Method::parse("random-sign+lasso").is_err());
    }

    #[test]
    fn single_method_is_its_own_reference() {
        let cfg = ScenarioConfig { n: 60, p: 30, q: 5, seed: 1, ..Default::default() };
        let opts = SweepOptions { l_grid: vec![16], reps: 3, ..Default::default() };
        let rows = run_sweep(&cfg, &opts).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].relative, 1.0);
        assert_eq!(rows, run_sweep(&cfg, &opts).unwrap());
    }
}
