//! Monte Carlo checks of the oracle constructions: unbiasedness of `S b*`,
//! approximation error against the closed-form bounds, and the tail frequency
//! of `||b*||^2`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{invalid, Error, Result};
use crate::hashing::{
    build_ensemble, expand_bbit, min_hash, min_hash_with, random_sign_matrix, HashConfig, HashEnsemble, MinHashOptions,
    Variant,
};
use crate::oracle::bounds::{
    approx_bound_bbit, approx_bound_interaction, approx_bound_random_sign, rho, rho2, scaled_bound, series_bound,
    unscaled_bound,
};
use crate::oracle::{
    first_hit_stream, geometric_m, geometric_weights, oracle_b_interaction, oracle_b_main, oracle_b_scaled,
    series_weights, truncated_weights, InteractionSpec, SignalStats, WeightVector,
};
use crate::rng::{stream_rng, sub_seed, Stream};
use crate::sparse::{sparsity_profile, SparseMatrix, SparsityProfile};

pub const MIN_REPLICATIONS: usize = 1000;
/// Slack in standard errors for two-sided mean checks.
pub const TWO_SIDED_SE: f64 = 4.0;
/// Slack in standard errors above one-sided bound checks.
pub const ONE_SIDED_SE: f64 = 3.0;

/// Which oracle `b*` to simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OracleKind {
    /// Random-sign main effects, equal row sparsity.
    RandomSign,
    /// Shuffled b-bit main effects, equal row sparsity.
    BbitShuffled { b: u32 },
    /// Random-sign interaction model, equal row sparsity. `beta` is ignored.
    Interaction { spec: InteractionSpec },
    /// Unbiased for `delta_i^-a x_i^T beta` via the full Taylor series.
    Series { a: f64 },
    /// Targets `(delta_min / delta_i)^a x_i^T beta` with a truncated series, `a` in `[1/2, 1]`.
    Truncated { a: f64 },
    /// Targets `x_i^T beta` under unequal sparsity with geometric weights; `m` defaults to the rule.
    Geometric { m: Option<usize> },
}

impl OracleKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::RandomSign => "random-sign",
            Self::BbitShuffled { .. } => "bbit-shuffled",
            Self::Interaction { .. } => "interaction",
            Self::Series { .. } => "series",
            Self::Truncated { .. } => "truncated",
            Self::Geometric { .. } => "geometric",
        }
    }

    fn uses_first_hit(&self) -> bool {
        matches!(self, Self::Series { .. } | Self::Truncated { .. } | Self::Geometric { .. })
    }
}

#[derive(Debug, Clone)]
pub struct VerifyProblem {
    pub x: SparseMatrix,
    pub beta: Vec<f64>,
    pub l: usize,
    pub kind: OracleKind,
    pub seed: u64,
    /// Relative excess in the tail check.
    pub eta: f64,
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub target: String,
    pub params: serde_json::Value,
    pub estimate: f64,
    pub se: f64,
    pub bound: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Replicated draws of `S b*` (row-major, one row of length `n` per replication) and `||b*||^2`.
#[derive(Debug, Clone)]
pub struct McDraws {
    pub n: usize,
    pub reps: usize,
    pub target: Vec<f64>,
    pub sb: Vec<f64>,
    pub b_norm_sq: Vec<f64>,
    pub profile: SparsityProfile,
    pub weights: Option<WeightVector>,
}

impl McDraws {
    fn rep(&self, r: usize) -> &[f64] {
        &self.sb[r * self.n..(r + 1) * self.n]
    }

    /// Per-row mean and standard error of `f(S b*_i, target_i)`.
    fn row_stats(&self, f: impl Fn(f64, f64) -> f64) -> Vec<(f64, f64)> {
        let r = self.reps as f64;
        (0..self.n)
            .map(|i| {
                let vals = (0..self.reps).map(|k| f(self.rep(k)[i], self.target[i]));
                mean_se(vals, r)
            })
            .collect()
    }
}

fn mean_se(vals: impl Iterator<Item = f64> + Clone, r: f64) -> (f64, f64) {
    let mean = vals.clone().sum::<f64>() / r;
    let var = vals.map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

fn beta_sq(prob: &VerifyProblem) -> f64 {
    prob.beta.iter().map(|v| v * v).sum()
}

/// The signal that `S b*` approximates for this oracle kind.
pub fn target_signal(prob: &VerifyProblem, profile: &SparsityProfile) -> Result<Vec<f64>> {
    let scale_by = |f: &dyn Fn(f64) -> f64| -> Result<Vec<f64>> {
        let xb = prob.x.mul_vec(&prob.beta)?;
        Ok(xb.iter().zip(&profile.delta).map(|(&v, &d)| if v == 0.0 { 0.0 } else { v * f(d) }).collect())
    };
    match &prob.kind {
        OracleKind::Interaction { spec } => spec.signal(&prob.x),
        OracleKind::Series { a } => scale_by(&|d| d.powf(-a)),
        OracleKind::Truncated { a } => {
            let dm = profile.delta_min;
            scale_by(&|d| (dm / d).powf(*a))
        }
        _ => prob.x.mul_vec(&prob.beta),
    }
}

fn prepare_weights(prob: &VerifyProblem, prof: &SparsityProfile) -> Result<Option<WeightVector>> {
    let p = prob.x.n_cols();
    Ok(match prob.kind {
        OracleKind::Series { a } => Some(series_weights(p, a, 4 * p)?),
        OracleKind::Truncated { a } => Some(truncated_weights(p, a, prob.l, prof.delta_min)?),
        OracleKind::Geometric { m } => {
            let m = match m {
                Some(m) => m,
                None => geometric_m(&signal_stats(prob, prof)?) as usize,
            };
            Some(geometric_weights(p, prof.delta_bar, m)?)
        }
        _ => None,
    })
}

fn signal_stats(prob: &VerifyProblem, prof: &SparsityProfile) -> Result<SignalStats> {
    let xb = prob.x.mul_vec(&prob.beta)?;
    Ok(SignalStats {
        n: prof.n,
        p: prof.p,
        l: prob.l,
        beta_sq: beta_sq(prob),
        signal_sq: xb.iter().map(|v| v * v).sum(),
        delta_bar: prof.delta_bar,
        v_delta: prof.v_delta(&xb)?,
    })
}

fn first_hit_ensemble(p: usize, l: usize, seed: u64) -> Result<(Vec<crate::oracle::FirstHitStream>, HashEnsemble)> {
    let streams = (0..l)
        .map(|j| first_hit_stream(p, &mut stream_rng(seed, Stream::FirstHit, j as u64)))
        .collect::<Result<Vec<_>>>()?;
    let ranks: Vec<Vec<u32>> = streams.iter().map(|s| s.ranks.clone()).collect();
    let signs: Vec<Vec<i8>> = (0..l)
        .map(|j| {
            let mut rng = stream_rng(seed, Stream::Sign, j as u64);
            (0..p).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect()
        })
        .collect();
    let e = HashEnsemble::from_permutations(Variant::RandomSign, 1, &ranks)?.with_signs(&signs)?;
    Ok((streams, e))
}

fn draw(prob: &VerifyProblem, prof: &SparsityProfile, w: Option<&WeightVector>, rep: u64) -> Result<(Vec<f64>, f64)> {
    let seed = sub_seed(prob.seed, Stream::Replication, rep);
    let p = prob.x.n_cols();
    if prob.kind.uses_first_hit() {
        let (streams, e) = first_hit_ensemble(p, prob.l, seed)?;
        let b = oracle_b_scaled(&prob.beta, prof, w.expect("weights prepared"), &streams, &e)?;
        let s = random_sign_matrix(&prob.x, &min_hash(&prob.x, &e)?, &e)?;
        return Ok((b.apply_dense(&s), b.norm_sq()));
    }
    match &prob.kind {
        OracleKind::BbitShuffled { b } => {
            let e = build_ensemble(&HashConfig::new(Variant::BBitShuffled, prob.l, *b, seed), p)?;
            let out = min_hash_with(&prob.x, &e, MinHashOptions { materialize_ranks: true })?;
            let bs = oracle_b_main(&prob.beta, &e, prof)?;
            Ok((bs.apply_bbit(&expand_bbit(&out, &e)?), bs.norm_sq()))
        }
        kind => {
            let e = build_ensemble(&HashConfig::new(Variant::RandomSign, prob.l, 1, seed), p)?;
            let s = random_sign_matrix(&prob.x, &min_hash(&prob.x, &e)?, &e)?;
            let bs = match kind {
                OracleKind::Interaction { spec } => oracle_b_interaction(spec, &e, prof)?,
                _ => oracle_b_main(&prob.beta, &e, prof)?,
            };
            Ok((bs.apply_dense(&s), bs.norm_sq()))
        }
    }
}

/// Run `reps` independent oracle constructions. Results do not depend on the thread count.
pub fn simulate(prob: &VerifyProblem, reps: usize) -> Result<McDraws> {
    if reps < MIN_REPLICATIONS {
        return Err(Error::InvalidParam(format!("R >= {MIN_REPLICATIONS} required, got {reps}")));
    }
    if prob.l == 0 {
        return invalid("L must be at least 1");
    }
    let p = prob.x.n_cols();
    let theta_len = match &prob.kind {
        OracleKind::Interaction { spec } => spec.p(),
        _ => prob.beta.len(),
    };
    if theta_len != p {
        return Err(Error::Shape(format!("coefficients have length {theta_len}, X has {p} columns")));
    }
    let prof = sparsity_profile(&prob.x);
    let target = target_signal(prob, &prof)?;
    let weights = prepare_weights(prob, &prof)?;
    let draws =
        (0..reps as u64).into_par_iter().map(|r| draw(prob, &prof, weights.as_ref(), r)).collect::<Result<Vec<_>>>()?;
    let n = prob.x.n_rows();
    let mut sb = Vec::with_capacity(reps * n);
    let mut b_norm_sq = Vec::with_capacity(reps);
    for (v, nb) in draws {
        sb.extend_from_slice(&v);
        b_norm_sq.push(nb);
    }
    Ok(McDraws { n, reps, target, sb, b_norm_sq, profile: prof, weights })
}

fn params(prob: &VerifyProblem, d: &McDraws) -> serde_json::Value {
    let mut v = json!({
        "oracle": prob.kind.name(),
        "n": d.profile.n,
        "p": d.profile.p,
        "q_min": d.profile.q_min,
        "q_max": d.profile.q_max,
        "L": prob.l,
        "R": d.reps,
        "seed": prob.seed,
        "eta": prob.eta,
    });
    let m = v.as_object_mut().unwrap();
    match &prob.kind {
        OracleKind::BbitShuffled { b } => {
            m.insert("b".into(), json!(b));
        }
        OracleKind::Series { a } | OracleKind::Truncated { a } => {
            m.insert("a".into(), json!(a));
        }
        _ => {}
    }
    if let Some(w) = &d.weights {
        if let Some(mm) = w.m {
            m.insert("m".into(), json!(mm));
        }
    }
    v
}

fn record(
    target: &str,
    prob: &VerifyProblem,
    d: &McDraws,
    estimate: f64,
    se: f64,
    bound: f64,
    pass: bool,
) -> VerificationRecord {
    VerificationRecord { target: target.into(), params: params(prob, d), estimate, se, bound, pass, note: None }
}

pub trait VerificationTarget: Send + Sync {
    fn name(&self) -> &'static str;

    fn evaluate(&self, prob: &VerifyProblem, draws: &McDraws) -> Result<Vec<VerificationRecord>>;

    fn run(&self, prob: &VerifyProblem, reps: usize) -> Result<Vec<VerificationRecord>> {
        self.evaluate(prob, &simulate(prob, reps)?)
    }
}

/// Componentwise `|mean(S b*)_i - target_i| <= 4 SE`; reports the worst row.
struct Unbiasedness;

impl VerificationTarget for Unbiasedness {
    fn name(&self) -> &'static str {
        "unbiasedness"
    }

    fn evaluate(&self, prob: &VerifyProblem, d: &McDraws) -> Result<Vec<VerificationRecord>> {
        match prob.kind {
            OracleKind::Truncated { .. } => {
                return Err(Error::Incompatible("the truncated construction is biased by design".into()))
            }
            OracleKind::Geometric { .. } if !d.profile.is_equal() => {
                return Err(Error::Incompatible("geometric weights are unbiased only for equal row sparsity".into()))
            }
            _ => {}
        }
        let stats = d.row_stats(|v, _| v);
        let mut worst = (0, f64::NEG_INFINITY);
        let mut all = true;
        for (i, &(mean, se)) in stats.iter().enumerate() {
            let dev = (mean - d.target[i]).abs();
            let tol = if se > 0.0 { TWO_SIDED_SE * se } else { 1e-9 * d.target[i].abs().max(1.0) };
            all &= dev <= tol;
            let z = if se > 0.0 {
                dev / se
            } else if dev > tol {
                f64::INFINITY
            } else {
                0.0
            };
            if z > worst.1 {
                worst = (i, z);
            }
        }
        let (i, _) = worst;
        let (mean, se) = stats[i];
        let mut rec = record(self.name(), prob, d, mean - d.target[i], se, TWO_SIDED_SE * se, all);
        rec.note = Some(format!("worst of {} rows: row {}", d.n, i + 1));
        Ok(vec![rec])
    }
}

/// Mean squared approximation error against the closed-form bound, plus `E||b*||^2` where the bound covers it.
struct ApproxError;

impl VerificationTarget for ApproxError {
    fn name(&self) -> &'static str {
        "approx_error"
    }

    fn evaluate(&self, prob: &VerifyProblem, d: &McDraws) -> Result<Vec<VerificationRecord>> {
        let prof = &d.profile;
        let (n, p, l) = (prof.n, prof.p, prob.l);
        let bsq = beta_sq(prob);
        let per_row = match prob.kind {
            OracleKind::Series { a } => Some(series_bound(a, p, l, bsq)),
            OracleKind::Truncated { a } => {
                if l < 10 {
                    return invalid("the truncated-series bound needs L >= 10");
                }
                if a == 0.5 && prof.delta_min > 0.5 {
                    return invalid("a = 1/2 needs delta_min <= 1/2");
                }
                if a > 0.5 && (l as f64) <= 2.0 / (2.0 * a - 1.0) {
                    return invalid("a > 1/2 needs L > 2/(2a - 1)");
                }
                Some(scaled_bound(a, prof.q_min, prof.delta_min, l, bsq))
            }
            _ => None,
        };
        let mut out = Vec::new();
        if let Some(bound) = per_row {
            let stats = d.row_stats(|v, t| (v - t).powi(2));
            let i = (0..n)
                .max_by(|&a, &b| {
                    let ma = stats[a].0 - ONE_SIDED_SE * stats[a].1;
                    let mb = stats[b].0 - ONE_SIDED_SE * stats[b].1;
                    ma.total_cmp(&mb)
                })
                .unwrap_or(0);
            let (mean, se) = stats.get(i).copied().unwrap_or((0.0, 0.0));
            let mut rec = record(self.name(), prob, d, mean, se, bound, mean <= bound + ONE_SIDED_SE * se);
            rec.note = Some(format!("per-row bound; worst of {n} rows: row {}", i + 1));
            out.push(rec);
            return Ok(out);
        }
        let bound = match &prob.kind {
            OracleKind::RandomSign => approx_bound_random_sign(p, prof.equal_q()?, l, bsq),
            OracleKind::BbitShuffled { b } => {
                let wc: f64 = prob.x.column_sq_norms().iter().zip(&prob.beta).map(|(c, b)| c * b * b).sum();
                approx_bound_bbit(p, prof.equal_q()?, l, *b, n, bsq, wc)
            }
            OracleKind::Interaction { spec } => {
                let q = prof.equal_q()?;
                approx_bound_interaction(p, q, l, spec.norm(q))
            }
            OracleKind::Geometric { .. } => {
                let s = signal_stats(prob, prof)?;
                unscaled_bound(p, l, s.delta_bar, s.beta_sq, s.signal_sq / n as f64, s.v_delta)
            }
            _ => unreachable!(),
        };
        let errs =
            (0..d.reps).map(|r| d.rep(r).iter().zip(&d.target).map(|(v, t)| (v - t).powi(2)).sum::<f64>() / n as f64);
        let (mean, se) = mean_se(errs, d.reps as f64);
        out.push(record(self.name(), prob, d, mean, se, bound, mean <= bound + ONE_SIDED_SE * se));
        if matches!(prob.kind, OracleKind::RandomSign | OracleKind::Interaction { .. }) {
            let (mean, se) = mean_se(d.b_norm_sq.iter().copied(), d.reps as f64);
            if prof.q_min == p && matches!(prob.kind, OracleKind::RandomSign) {
                // Equality case: the bound is attained.
                let ok = (mean - bound).abs() <= TWO_SIDED_SE * se.max(1e-12 * bound);
                out.push(record("tightness", prob, d, mean, se, bound, ok));
            } else {
                out.push(record("oracle_norm", prob, d, mean, se, bound, mean <= bound + ONE_SIDED_SE * se));
            }
        }
        Ok(out)
    }
}

/// Frequency of `||b*||^2 >= (1 + eta) bound` against the exponential tail bound.
struct Concentration;

impl VerificationTarget for Concentration {
    fn name(&self) -> &'static str {
        "concentration"
    }

    fn evaluate(&self, prob: &VerifyProblem, d: &McDraws) -> Result<Vec<VerificationRecord>> {
        let prof = &d.profile;
        let (p, l) = (prof.p, prob.l);
        let q = prof.equal_q()?;
        let (threshold, tail) = match &prob.kind {
            OracleKind::RandomSign => (approx_bound_random_sign(p, q, l, beta_sq(prob)), rho(p, q, l, prob.eta)),
            OracleKind::Interaction { spec } => {
                (approx_bound_interaction(p, q, l, spec.norm(q)), rho2(p, q, l, prob.eta))
            }
            _ => return Err(Error::Incompatible("tail bounds exist for random-sign oracles only".into())),
        };
        let threshold = (1.0 + prob.eta) * threshold;
        let hits = d.b_norm_sq.iter().filter(|&&v| v > 0.0 && v >= threshold).count();
        let freq = hits as f64 / d.reps as f64;
        let pr = tail.min(1.0);
        let se = (pr * (1.0 - pr) / d.reps as f64).sqrt();
        let mut rec = record(self.name(), prob, d, freq, se, tail, freq <= tail + ONE_SIDED_SE * se);
        rec.note = Some(format!("threshold {threshold:.6e}"));
        Ok(vec![rec])
    }
}

pub struct VerificationRegistry {
    entries: Vec<Box<dyn VerificationTarget>>,
}

impl Default for VerificationRegistry {
    fn default() -> Self {
        let mut r = Self { entries: Vec::new() };
        r.register(Box::new(Unbiasedness));
        r.register(Box::new(ApproxError));
        r.register(Box::new(Concentration));
        r
    }
}

impl VerificationRegistry {
    pub fn register(&mut self, t: Box<dyn VerificationTarget>) {
        self.entries.retain(|e| e.name() != t.name());
        self.entries.push(t);
    }

    pub fn get(&self, name: &str) -> Result<&dyn VerificationTarget> {
        match self.entries.iter().find(|e| e.name() == name) {
            Some(t) => Ok(t.as_ref()),
            None => invalid(format!("unknown verification target `{name}`; known: {}", self.names().join(", "))),
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    /// Evaluate several targets on one shared set of draws.
    pub fn run_many(&self, names: &[&str], prob: &VerifyProblem, reps: usize) -> Result<Vec<VerificationRecord>> {
        let targets = names.iter().map(|n| self.get(n)).collect::<Result<Vec<_>>>()?;
        let draws = simulate(prob, reps)?;
        let mut out = Vec::new();
        for t in targets {
            out.extend(t.evaluate(prob, &draws)?);
        }
        Ok(out)
    }
}
