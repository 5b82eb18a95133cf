//! Synthetic regression scenarios: correlated sparse designs, coefficient
//! vectors, two-block interaction signals and noisy responses.

mod sweep;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::oracle::InteractionSpec;
use crate::regress::sigmoid;
use crate::rng::{stream_rng, Stream};
use crate::sparse::SparseMatrix;

pub use sweep::{default_radius, run_sweep, signal_spec, Method, SweepOptions, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignDist {
    Binary,
    Gaussian,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefKind {
    Exponential,
    Brownian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    #[default]
    Gaussian,
    Logistic,
}

macro_rules! named_enum {
    ($t:ty { $($v:ident => $s:literal),* }) => {
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok(<$t>::$v),)*
                    _ => invalid(format!("unknown value `{s}`")),
                }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(<$t>::$v => $s,)* })
            }
        }
    };
}

named_enum!(DesignDist { Binary => "binary", Gaussian => "gaussian", Exponential => "exponential" });
named_enum!(CoefKind { Exponential => "exponential", Brownian => "brownian" });
named_enum!(ResponseKind { Gaussian => "gaussian", Logistic => "logistic" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub n: usize,
    pub p: usize,
    /// Expected non-zeros per row before the copy step.
    pub q: usize,
    pub rho: f64,
    pub sigma: f64,
    /// Weight `kappa` of the interaction signal.
    pub interaction_strength: f64,
    pub design: DesignDist,
    pub coefficients: CoefKind,
    #[serde(default)]
    pub response: ResponseKind,
    /// Divide non-binary designs by their largest magnitude.
    #[serde(default)]
    pub clip: bool,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            n: 100,
            p: 100,
            q: 10,
            rho: 0.0,
            sigma: 1.0,
            interaction_strength: 0.0,
            design: DesignDist::Binary,
            coefficients: CoefKind::Exponential,
            response: ResponseKind::Gaussian,
            clip: false,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.q == 0 {
            return invalid("n, p and q must be positive");
        }
        if self.q > self.p {
            return invalid("q must not exceed p");
        }
        if !(0.0..1.0).contains(&self.rho) {
            return invalid("rho must lie in [0, 1)");
        }
        if !(self.sigma >= 0.0) {
            return invalid("sigma must be non-negative");
        }
        Ok(())
    }

    /// Parse `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: ln + 1, msg };
            let (k, v) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| perr("expected key = value".into()))?;
            let (k, v) = (k.trim(), v.trim());
            let num = |v: &str| v.parse::<f64>().map_err(|_| perr(format!("`{k}` is not a number")));
            let int = |v: &str| v.parse::<usize>().map_err(|_| perr(format!("`{k}` is not a count")));
            match k {
                "name" | "scenario" => c.name = v.to_string(),
                "n" => c.n = int(v)?,
                "p" => c.p = int(v)?,
                "q" => c.q = int(v)?,
                "rho" => c.rho = num(v)?,
                "sigma" => c.sigma = num(v)?,
                "interaction_strength" | "kappa" => c.interaction_strength = num(v)?,
                "design" => c.design = v.parse().map_err(|e: Error| perr(e.to_string()))?,
                "coefficients" => c.coefficients = v.parse().map_err(|e: Error| perr(e.to_string()))?,
                "response" => c.response = v.parse().map_err(|e: Error| perr(e.to_string()))?,
                "clip" => c.clip = v.parse().map_err(|_| perr("`clip` must be true or false".into()))?,
                "seed" => c.seed = v.parse().map_err(|_| perr("`seed` is not an integer".into()))?,
                _ => return Err(perr(format!("unknown key `{k}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }
}

fn draw_value<R: Rng>(dist: DesignDist, rng: &mut R) -> f64 {
    match dist {
        DesignDist::Binary => 1.0,
        DesignDist::Gaussian => loop {
            let v: f64 = StandardNormal.sample(rng);
            if v != 0.0 {
                break v;
            }
        },
        DesignDist::Exponential => loop {
            let v: f64 = Exp1.sample(rng);
            if v != 0.0 {
                break v;
            }
        },
    }
}

/// Sequentially replace `row[k]` by `row[k-1]` whenever `coin()` is true, for
/// `k >= 1`. Returns the number of copies made.
pub fn correlate_row(row: &mut [f64], mut coin: impl FnMut() -> bool) -> usize {
    let mut copies = 0;
    for k in 1..row.len() {
        if coin() {
            row[k] = row[k - 1];
            copies += 1;
        }
    }
    copies
}

/// Stage 1: entries non-zero with probability `q/p`. Stage 2: for `k >= 2`,
/// replace `X_ik` by `X_i,k-1` with probability `rho`, sequentially.
pub fn gen_design(cfg: &ScenarioConfig, rep: u64) -> Result<SparseMatrix> {
    cfg.validate()?;
    let prob = cfg.q as f64 / cfg.p as f64;
    let mut rng = stream_rng(cfg.seed, Stream::Design, rep);
    let mut rows = Vec::with_capacity(cfg.n);
    let mut dense = vec![0.0; cfg.p];
    for _ in 0..cfg.n {
        for v in dense.iter_mut() {
            *v = if rng.random_bool(prob) { draw_value(cfg.design, &mut rng) } else { 0.0 };
        }
        if cfg.rho > 0.0 {
            correlate_row(&mut dense, || rng.random_bool(cfg.rho));
        }
        rows.push(dense.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(k, &v)| (k, v)).collect::<Vec<_>>());
    }
    let x = SparseMatrix::from_rows_unbounded(cfg.p, &rows)?;
    if cfg.clip && cfg.design != DesignDist::Binary && x.nnz() > 0 {
        return x.scaled(x.max_abs());
    }
    Ok(x)
}

/// Coefficients scaled so that `||X beta||^2 / n = 1`.
pub fn gen_coefficients(cfg: &ScenarioConfig, x: &SparseMatrix, rep: u64) -> Result<Vec<f64>> {
    let mut rng = stream_rng(cfg.seed, Stream::Coefficients, rep);
    for _ in 0..10 {
        let beta: Vec<f64> = match cfg.coefficients {
            CoefKind::Exponential => (0..x.n_cols()).map(|_| Exp1.sample(&mut rng)).collect(),
            CoefKind::Brownian => {
                let mut acc = 0.0;
                (0..x.n_cols())
                    .map(|_| {
                        acc += rng.sample::<f64, _>(StandardNormal);
                        acc
                    })
                    .collect()
            }
        };
        let xb = x.mul_vec(&beta)?;
        let ms = xb.iter().map(|v| v * v).sum::<f64>() / x.n_rows() as f64;
        if ms > 0.0 {
            let s = ms.sqrt();
            return Ok(beta.into_iter().map(|b| b / s).collect());
        }
    }
    Err(Error::Numerical("X beta vanished in 10 draws".into()))
}

/// Two blocks of consecutive columns and the scale that normalises their product signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionBlocks {
    /// 0-based starts.
    pub start1: usize,
    pub start2: usize,
    pub size: usize,
    pub scale: f64,
}

impl InteractionBlocks {
    /// The signal as an interaction model, valid for binary designs:
    /// `X_k X_k' = X_k - X_k 1{X_k' = 0}` for `k != k'` and `X_k^2 = X_k`.
    pub fn as_interaction_spec(&self, p: usize, kappa: f64) -> Result<InteractionSpec> {
        let c = kappa * self.scale;
        let mut theta1 = vec![0.0; p];
        let mut theta2 = Vec::new();
        for k in self.start1..self.start1 + self.size {
            for k2 in self.start2..self.start2 + self.size {
                theta1[k] += c;
                if k != k2 {
                    theta2.push((k, k2, -c));
                }
            }
        }
        InteractionSpec::new(theta1, theta2)
    }
}

/// `g_i = c (sum_{I1} X_ik)(sum_{I2} X_ik)` with unit mean square.
pub fn gen_interaction(cfg: &ScenarioConfig, x: &SparseMatrix, rep: u64) -> Result<(Vec<f64>, InteractionBlocks)> {
    let p = x.n_cols();
    let size = p.div_ceil(cfg.q);
    if p <= size {
        return invalid("interaction blocks need p - ceil(p/q) >= 1");
    }
    let mut rng = stream_rng(cfg.seed, Stream::Interaction, rep);
    for _ in 0..10 {
        let start1 = rng.random_range(0..p - size);
        let start2 = rng.random_range(0..p - size);
        let block_sum = |i: usize, a: usize| -> f64 {
            let (idx, val) = x.row(i);
            idx.iter().zip(val).filter(|(&k, _)| (a..a + size).contains(&(k as usize))).map(|(_, &v)| v).sum()
        };
        let g: Vec<f64> = (0..x.n_rows()).map(|i| block_sum(i, start1) * block_sum(i, start2)).collect();
        let ms = g.iter().map(|v| v * v).sum::<f64>() / g.len() as f64;
        if ms > 0.0 {
            let scale = 1.0 / ms.sqrt();
            return Ok((g.into_iter().map(|v| v * scale).collect(), InteractionBlocks { start1, start2, size, scale }));
        }
    }
    Err(Error::Numerical("interaction signal vanished in 10 draws".into()))
}

pub fn gen_response(f_star: &[f64], sigma: f64, kind: ResponseKind, seed: u64, rep: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, Stream::Noise, rep);
    match kind {
        ResponseKind::Gaussian => f_star
            .iter()
            .map(|&f| if sigma == 0.0 { f } else { f + sigma * rng.sample::<f64, _>(StandardNormal) })
            .collect(),
        ResponseKind::Logistic => f_star.iter().map(|&f| if rng.random_bool(sigmoid(f)) { 1.0 } else { 0.0 }).collect(),
    }
}

/// One draw of a scenario.
#[derive(Debug, Clone)]
pub struct ScenarioData {
    pub x: SparseMatrix,
    pub beta: Vec<f64>,
    pub g: Option<Vec<f64>>,
    pub blocks: Option<InteractionBlocks>,
    pub f_star: Vec<f64>,
    pub y: Vec<f64>,
}

pub fn generate(cfg: &ScenarioConfig, rep: u64) -> Result<ScenarioData> {
    let x = gen_design(cfg, rep)?;
    let beta = gen_coefficients(cfg, &x, rep)?;
    let mut f_star = x.mul_vec(&beta)?;
    let (g, blocks) = if cfg.interaction_strength != 0.0 {
        let (g, b) = gen_interaction(cfg, &x, rep)?;
        for (f, gi) in f_star.iter_mut().zip(&g) {
            *f += cfg.interaction_strength * gi;
        }
        (Some(g), Some(b))
    } else {
        (None, None)
    };
    let y = gen_response(&f_star, cfg.sigma, cfg.response, cfg.seed, rep);
    Ok(ScenarioData { x, beta, g, blocks, f_star, y })
}
