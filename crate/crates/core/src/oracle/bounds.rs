//! Closed-form approximation, tail and prediction bounds.

use serde::{Deserialize, Serialize};

/// `(2 - q/p) q / (2^b L (1 - 2^-b)) (||beta||^2 + (2^b - 2)(2 - q/p)/n sum_k ||X_k||^2 beta_k^2)`.
pub fn approx_bound_bbit(p: usize, q: usize, l: usize, b: u32, n: usize, beta_sq: f64, weighted_col: f64) -> f64 {
    let d = q as f64 / p as f64;
    let two_b = (1u64 << b) as f64;
    let lead = (2.0 - d) * q as f64 / (two_b * l as f64 * (1.0 - 1.0 / two_b));
    lead * (beta_sq + (two_b - 2.0) * (2.0 - d) / n as f64 * weighted_col)
}

/// `(2 - q/p) q ||beta||^2 / L`; bounds both `E||b*||^2` and the approximation error.
pub fn approx_bound_random_sign(p: usize, q: usize, l: usize, beta_sq: f64) -> f64 {
    (2.0 - q as f64 / p as f64) * q as f64 * beta_sq / l as f64
}

/// Interaction version: `(2 - q/p) q l(Theta)^2 / L`.
pub fn approx_bound_interaction(p: usize, q: usize, l: usize, ell: f64) -> f64 {
    approx_bound_random_sign(p, q, l, ell * ell)
}

/// Per-row bound for signals scaled by `(delta_min / delta_i)^a`.
pub fn scaled_bound(a: f64, q_min: usize, delta_min: f64, l: usize, beta_sq: f64) -> f64 {
    let lead = q_min as f64 * beta_sq / l as f64;
    let lf = l as f64;
    if a == 0.5 {
        lead * (4.0 * lf.ln() / delta_min).ln()
    } else {
        let t = 2.0 * a - 1.0;
        lead * (2.0 * t * lf).ln().powf(t) / t
    }
}

/// Per-row bound for the full-series construction with `kappa(delta) = delta^-a`:
/// `(p ||beta||^2 / L) sum_{l >= 1} c_{l-1}^2 (1 - 1/p)^{l-1}`, i.e. `E(w_g^2) ||beta||^2 / L`
/// for `g ~ Geo(1/p)`.
pub fn series_bound(a: f64, p: usize, l: usize, beta_sq: f64) -> f64 {
    let r = 1.0 - 1.0 / p as f64;
    let mut c = 1.0f64;
    let mut pow = 1.0f64;
    let mut sum = 0.0;
    let mut j = 0u64;
    loop {
        let t = c * c * pow;
        sum += t;
        j += 1;
        if (t <= 1e-17 * sum && j > 16) || j > 100_000_000 {
            break;
        }
        c *= (a + j as f64 - 1.0) / j as f64;
        pow *= r;
    }
    p as f64 * beta_sq / l as f64 * sum
}

/// Threshold `L0 = p (2 delta_bar)^3 ||beta||^2 / (||X beta||^2 V / n)` between the two regimes.
pub fn unscaled_l0(p: usize, delta_bar: f64, beta_sq: f64, signal_sq_over_n: f64, v_delta: f64) -> f64 {
    let denom = signal_sq_over_n * v_delta;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    p as f64 * (2.0 * delta_bar).powi(3) * beta_sq / denom
}

/// Averaged-error bound for unscaled signals with unequal row sparsity.
pub fn unscaled_bound(p: usize, l: usize, delta_bar: f64, beta_sq: f64, signal_sq_over_n: f64, v_delta: f64) -> f64 {
    let lf = l as f64;
    if lf <= unscaled_l0(p, delta_bar, beta_sq, signal_sq_over_n, v_delta) {
        6.0 * p as f64 * delta_bar * beta_sq / lf
    } else {
        3.0 * (p as f64 * beta_sq / lf).powf(2.0 / 3.0) * (signal_sq_over_n * v_delta).cbrt()
    }
}

/// `L* = sqrt((2 - q/p) q n) ||beta|| / sigma`.
pub fn l_star(p: usize, q: usize, n: usize, beta_norm: f64, sigma: f64) -> f64 {
    ((2.0 - q as f64 / p as f64) * q as f64 * n as f64).sqrt() * beta_norm / sigma
}

/// `exp(-L eta^2 / (2 (2 - delta)(3 + 2 eta) q))`.
pub fn rho(p: usize, q: usize, l: usize, eta: f64) -> f64 {
    let d = q as f64 / p as f64;
    (-(l as f64) * eta * eta / (2.0 * (2.0 - d) * (3.0 + 2.0 * eta) * q as f64)).exp()
}

/// `rho + exp(-L eta^2 / (4 (2 - delta)^2 (3 + 2 eta) q^2))`.
pub fn rho2(p: usize, q: usize, l: usize, eta: f64) -> f64 {
    let d = q as f64 / p as f64;
    let qf = q as f64;
    rho(p, q, l, eta) + (-(l as f64) * eta * eta / (4.0 * (2.0 - d).powi(2) * (3.0 + 2.0 * eta) * qf * qf)).exp()
}

/// Squared radius `(1 + eta) c (2 - q/p) q norm^2 / L`, `c = 2` for interactions.
pub fn oracle_radius(p: usize, q: usize, l: usize, eta: f64, norm: f64, interaction: bool) -> f64 {
    let c = if interaction { 2.0 } else { 1.0 };
    ((1.0 + eta) * c * (2.0 - q as f64 / p as f64) * q as f64 * norm * norm / l as f64).sqrt()
}

/// `p_tilde = (1/n) sum p_i (1 - p_i)`.
pub fn p_tilde(probs: &[f64]) -> f64 {
    probs.iter().map(|p| p * (1.0 - p)).sum::<f64>() / probs.len() as f64
}

/// Relative approximation error of b-bit hashing at a fixed bit budget `L b`:
/// `b / (2^b - 1) (1 + (2^b - 2)(2 - delta) delta)`.
pub fn bit_budget_objective(b: u32, delta: f64) -> f64 {
    let t = (1u64 << b) as f64;
    b as f64 / (t - 1.0) * (1.0 + (t - 2.0) * (2.0 - delta) * delta)
}

/// The `b` in `1..=24` minimising [`bit_budget_objective`].
pub fn optimal_b(delta: f64) -> u32 {
    (1..=24u32).min_by(|&x, &y| bit_budget_objective(x, delta).total_cmp(&bit_budget_objective(y, delta))).unwrap()
}

/// Inputs for [`bound_report`]. Optional fields enable the corresponding bounds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub l: usize,
    pub b: Option<u32>,
    pub sigma: Option<f64>,
    pub eta: Option<f64>,
    /// `||beta||`, or `l(Theta)` when `interaction` is set.
    pub norm: f64,
    #[serde(default)]
    pub interaction: bool,
    /// `sum_k ||X_k||^2 beta_k^2`, for the b-bit bound.
    pub weighted_col: Option<f64>,
    pub a: Option<f64>,
    pub q_min: Option<usize>,
    pub delta_min: Option<f64>,
    pub delta_bar: Option<f64>,
    pub v_delta: Option<f64>,
    /// `||X beta||^2 / n`.
    pub signal_sq_over_n: Option<f64>,
    /// `||X beta - mean + gamma||^2 / n`.
    pub centered_sq_over_n: Option<f64>,
    #[serde(default)]
    pub gamma_sq_over_n: f64,
    pub p_tilde: Option<f64>,
    /// `max |X_ik|` of the design the bounds are applied to.
    #[serde(default)]
    pub x_max_abs: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub approx_bound: Option<f64>,
    pub approx_bound_bbit: Option<f64>,
    pub scaled_bound: Option<f64>,
    pub unscaled_bound: Option<f64>,
    pub l_star: Option<f64>,
    pub rho: Option<f64>,
    pub rho2: Option<f64>,
    pub mspe_bound_ols: Option<f64>,
    pub mspe_bound_ridge: Option<f64>,
    pub excess_risk_bound: Option<f64>,
    pub optimal_b: u32,
    pub warnings: Vec<String>,
}

pub fn bound_report(inp: &BoundInputs) -> BoundReport {
    let mut r = BoundReport { inputs: inp.clone(), ..Default::default() };
    let (n, p, q, l) = (inp.n, inp.p, inp.q, inp.l);
    if n == 0 || p == 0 || q == 0 || l == 0 {
        r.warnings.push("degenerate dimensions; bounds omitted".into());
        return r;
    }
    if let Some(m) = inp.x_max_abs.filter(|&m| m > 1.0) {
        r.warnings.push(format!("design has max |X_ik| = {m}; the bounds assume values in [-1, 1]"));
    }
    let d = q as f64 / p as f64;
    let nf = n as f64;
    let lf = l as f64;
    let norm = inp.norm;
    let sq = (2.0 - d) * q as f64;
    r.optimal_b = optimal_b(d);
    r.approx_bound = Some(approx_bound_random_sign(p, q, l, norm * norm));
    if let (Some(b), Some(wc), false) = (inp.b, inp.weighted_col, inp.interaction) {
        r.approx_bound_bbit = Some(approx_bound_bbit(p, q, l, b, n, norm * norm, wc));
    }
    if let (Some(a), Some(qm), Some(dm)) = (inp.a, inp.q_min, inp.delta_min) {
        if dm > 0.0 && l >= 10 {
            r.scaled_bound = Some(scaled_bound(a, qm, dm, l, norm * norm));
        } else {
            r.warnings.push("scaled-signal bound needs delta_min > 0 and L >= 10".into());
        }
    }
    if let (Some(db), Some(v), Some(s)) = (inp.delta_bar, inp.v_delta, inp.signal_sq_over_n) {
        r.unscaled_bound = Some(unscaled_bound(p, l, db, norm * norm, s, v));
    }
    let eta = inp.eta.unwrap_or(1.0);
    r.rho = Some(rho(p, q, l, eta));
    r.rho2 = Some(rho2(p, q, l, eta));
    let tail = if inp.interaction { r.rho2.unwrap() } else { r.rho.unwrap() };
    let lstar_mult = if inp.interaction { 2f64.sqrt() } else { 1.0 };
    if let Some(sigma) = inp.sigma.filter(|&s| s > 0.0) {
        let ls = l_star(p, q, n, norm, sigma);
        r.l_star = Some(ls);
        let ratio = (lf / ls).max(ls / lf);
        r.mspe_bound_ols = Some(
            2.0 * (2.0 - d).sqrt() * ratio * sigma * (q as f64 / nf).sqrt() * norm
                + inp.gamma_sq_over_n
                + sigma * sigma / nf,
        );
        if let Some(c) = inp.centered_sq_over_n {
            r.mspe_bound_ridge = Some(
                sq.sqrt() * norm * (2.0 * sigma * (1.0 + eta).sqrt() + lstar_mult * ls / lf) / nf.sqrt()
                    + tail * c
                    + inp.gamma_sq_over_n
                    + sigma * sigma / nf,
            );
        }
        if let Some(pt) = inp.p_tilde {
            r.excess_risk_bound = Some(
                sq.sqrt() * norm * (((1.0 + eta) * pt).sqrt() + lstar_mult * ls / (4.0 * lf)) / nf.sqrt()
                    + std::f64::consts::LN_2 * tail,
            );
        }
    } else if inp.sigma.is_some() {
        r.warnings.push("sigma must be positive for prediction bounds".into());
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unbounded_design_is_flagged() {
        let inp = BoundInputs { n: 10, p: 20, q: 4, l: 8, norm: 1.0, ..Default::default() };
        assert!(bound_report(&inp).warnings.is_empty());
        let r = bound_report(&BoundInputs { x_max_abs: Some(2.5), ..inp });
        assert_eq!(r.warnings.len(), 1);
        assert!(r.approx_bound.is_some());
    }

    #[test]
    fn l_star_example() {
        let ls = l_star(10_000, 100, 10_000, 1.0, 1.0);
        assert!((ls - 1410.6736).abs() < 1e-3, "{ls}");
    }

    #[test]
    fn bbit_bound_reduces_at_one_bit() {
        let a = approx_bound_bbit(20, 20, 16, 1, 50, 2.5, 123.0);
        assert!((a - 20.0 * 2.5 / 16.0).abs() < 1e-12);
        let a = approx_bound_bbit(40, 4, 16, 1, 50, 2.5, 123.0);
        assert!((a - approx_bound_random_sign(40, 4, 16, 2.5)).abs() < 1e-12);
    }

    #[test]
    fn optimal_b_values() {
        assert_eq!(optimal_b(0.1), 3);
        assert_eq!(optimal_b(0.01), 8);
    }

    #[test]
    fn tails_are_probabilities() {
        for &l in &[1, 10, 1000] {
            let r = rho(100, 5, l, 1.0);
            assert!(r > 0.0 && r <= 1.0);
            assert!(rho2(100, 5, l, 1.0) >= r);
        }
    }
}
