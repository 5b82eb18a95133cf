//! Weight sequences indexed by the minimum rank (or first-hit time) `l = 1, 2, ...`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `P(M = l)` for the minimum rank of a `q`-subset of `{1..p}` under a uniform permutation.
///
/// Index `l - 1` holds `C(p-l, q-1) / C(p, q)`.
pub fn marginal_m_pmf(p: usize, q: usize) -> Result<Vec<f64>> {
    if q == 0 || q > p {
        return invalid(format!("need 1 <= q <= p, got q = {q}, p = {p}"));
    }
    let mut out = vec![0.0; p];
    out[0] = q as f64 / p as f64;
    for l in 1..p {
        // P(l+1) = P(l) (p - l - q + 1) / (p - l)
        let num = p as i64 - l as i64 - q as i64 + 1;
        if num <= 0 {
            break;
        }
        out[l] = out[l - 1] * num as f64 / (p - l) as f64;
    }
    Ok(out)
}

/// Minimum-norm weights with `sum_l w_l P(M = l) = 1`.
pub fn main_weights(p: usize, q: usize) -> Result<Vec<f64>> {
    let pmf = marginal_m_pmf(p, q)?;
    let s2: f64 = pmf.iter().map(|v| v * v).sum();
    Ok(pmf.iter().map(|v| v / s2).collect())
}

/// Interaction weights `W2`; index `l - 1`, with `W2_1 = 0`.
///
/// `W2_l = r_l / sum_{l' >= 2} (l' - 1) r_{l'}^2` where `r_l = C(p-l, q-1) / C(p-1, q)`.
pub fn interaction_weights(p: usize, q: usize) -> Result<Vec<f64>> {
    if p < 3 {
        return invalid("interaction weights need p >= 3");
    }
    if q == 0 || q >= p {
        return invalid(format!("interaction weights need 1 <= q <= p - 1, got q = {q}, p = {p}"));
    }
    let r = interaction_ratios(p, q)?;
    let denom: f64 = (1..p).map(|j| j as f64 * r[j] * r[j]).sum();
    let mut w: Vec<f64> = r.iter().map(|v| v / denom).collect();
    w[0] = 0.0;
    Ok(w)
}

/// `r_l = C(p-l, q-1) / C(p-1, q)`, index `l - 1`.
pub fn interaction_ratios(p: usize, q: usize) -> Result<Vec<f64>> {
    if q >= p {
        return invalid("need q <= p - 1");
    }
    // C(p, q) / C(p-1, q) = p / (p - q)
    let factor = p as f64 / (p - q) as f64;
    Ok(marginal_m_pmf(p, q)?.iter().map(|v| v * factor).collect())
}

/// Taylor coefficients `a (a+1) ... (a+j-1) / j!` for `j = 0..len`.
pub fn power_taylor_coefs(a: f64, len: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(len);
    let mut cur = 1.0;
    for j in 0..len {
        if j > 0 {
            cur *= (a + j as f64 - 1.0) / j as f64;
        }
        c.push(cur);
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// Full Taylor series of `delta^-a`.
    FullSeries,
    /// Series truncated at `m` with weights scaled by `delta_min^a`.
    Truncated,
    /// Truncated geometric sequence with ratio `1 - delta_bar`.
    Geometric,
}

/// Weights `w_l`, stored for `l = 1..=len`; zero beyond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub kind: WeightKind,
    pub values: Vec<f64>,
    /// Truncation point where applicable.
    pub m: Option<f64>,
    pub a: f64,
    /// Radius of convergence of the underlying Taylor series about 1.
    pub radius: f64,
}

impl WeightVector {
    #[inline]
    pub fn get(&self, l: u64) -> f64 {
        self.values.get(l as usize - 1).copied().unwrap_or(0.0)
    }

    /// Expected bias factor `(1/p) sum_l (1 - delta)^{l-1} w_l`: the mean of
    /// `s_i^T b*` is this times `x_i^T beta` for a row with sparsity `delta`.
    pub fn expected_factor(&self, p: usize, delta: f64) -> f64 {
        let mut s = 0.0;
        let mut pow = 1.0;
        for w in &self.values {
            s += pow * w;
            pow *= 1.0 - delta;
        }
        s / p as f64
    }
}

/// Weights for `kappa(delta) = delta^-a`: `w_{l+1} = p a(a+1)...(a+l-1)/l!`, stored for `l <= len`.
pub fn series_weights(p: usize, a: f64, len: usize) -> Result<WeightVector> {
    if !(a >= 0.0) || !a.is_finite() {
        return invalid("exponent must be finite and non-negative");
    }
    let radius = if a == 0.0 { f64::INFINITY } else { 1.0 };
    let values = power_taylor_coefs(a, len).into_iter().map(|c| p as f64 * c).collect();
    Ok(WeightVector { kind: WeightKind::FullSeries, values, m: None, a, radius })
}

/// Truncation point for the scaled-signal construction with exponent `a`.
pub fn truncation_point(a: f64, l: usize, delta_min: f64) -> Result<f64> {
    if !(0.5..=1.0).contains(&a) {
        return invalid(format!("exponent must lie in [1/2, 1], got {a}"));
    }
    if delta_min <= 0.0 {
        return invalid("delta_min must be positive (no empty rows)");
    }
    let lf = l as f64;
    let m = if a == 0.5 { lf.ln() / (2.0 * delta_min) } else { (2.0 * (2.0 * a - 1.0) * lf).ln() / (2.0 * delta_min) };
    if !(m > 0.0) {
        return invalid(format!("truncation point {m} is not positive; increase L"));
    }
    Ok(m)
}

/// `w_{l+1} = p delta_min^a c_l (1{l <= floor m} + (m - floor m) 1{l = ceil m})`.
pub fn truncated_weights(p: usize, a: f64, l: usize, delta_min: f64) -> Result<WeightVector> {
    let m = truncation_point(a, l, delta_min)?;
    let scale = delta_min.powf(a);
    let fl = m.floor() as usize;
    let cl = m.ceil() as usize;
    let coefs = power_taylor_coefs(a, cl + 1);
    let values = (0..=cl)
        .map(|j| {
            let ind = if j <= fl { 1.0 } else { 0.0 } + if j == cl && cl != fl { m - fl as f64 } else { 0.0 };
            p as f64 * scale * coefs[j] * ind
        })
        .collect();
    Ok(WeightVector { kind: WeightKind::Truncated, values, m: Some(m), a, radius: 1.0 })
}

/// Summary quantities that fix the geometric truncation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalStats {
    pub n: usize,
    pub p: usize,
    pub l: usize,
    pub beta_sq: f64,
    /// `||X beta||^2`.
    pub signal_sq: f64,
    pub delta_bar: f64,
    pub v_delta: f64,
}

/// `m = round(min{(p ||beta||^2 n / (L ||X beta||^2 V))^{1/3}, 1/(2 delta_bar)})`, at least 1.
pub fn geometric_m(s: &SignalStats) -> f64 {
    let cap = 1.0 / (2.0 * s.delta_bar);
    let denom = s.l as f64 * s.signal_sq * s.v_delta;
    let first = if denom > 0.0 { (s.p as f64 * s.beta_sq * s.n as f64 / denom).cbrt() } else { f64::INFINITY };
    first.min(cap).round().max(1.0)
}

/// `w_l = p (1 - d)^{l-1} 1{l <= m} d (2 - d) / (1 - (1 - d)^{2m})` with `d = delta_bar`.
pub fn geometric_weights(p: usize, delta_bar: f64, m: usize) -> Result<WeightVector> {
    if !(delta_bar > 0.0 && delta_bar <= 1.0) {
        return invalid("delta_bar must lie in (0, 1]");
    }
    if m == 0 {
        return invalid("m must be at least 1");
    }
    let r = 1.0 - delta_bar;
    let norm = delta_bar * (2.0 - delta_bar) / (1.0 - r.powi(2 * m as i32));
    let values = (0..m).map(|j| p as f64 * r.powi(j as i32) * norm).collect();
    Ok(WeightVector { kind: WeightKind::Geometric, values, m: Some(m as f64), a: 0.0, radius: f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn pmf_examples() {
        assert!(close(&marginal_m_pmf(4, 2).unwrap(), &[0.5, 1. / 3., 1. / 6., 0.], 1e-15));
        assert!(close(&marginal_m_pmf(5, 5).unwrap(), &[1., 0., 0., 0., 0.], 0.0));
        assert!(close(&marginal_m_pmf(5, 1).unwrap(), &[0.2; 5], 1e-15));
        assert!(marginal_m_pmf(3, 4).is_err());
        let big = marginal_m_pmf(100_000, 37).unwrap();
        assert!((big.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn main_weight_examples() {
        assert!(close(&main_weights(2, 1).unwrap(), &[1., 1.], 1e-15));
        assert!(close(&main_weights(4, 2).unwrap(), &[9. / 7., 6. / 7., 3. / 7., 0.], 1e-14));
        let w = main_weights(6, 6).unwrap();
        assert_eq!(w[0], 1.0);
    }

    #[test]
    fn interaction_weight_example() {
        let w = interaction_weights(3, 1).unwrap();
        assert!(close(&w, &[0., 2. / 3., 2. / 3.], 1e-15));
        assert!(interaction_weights(4, 4).is_err());
        assert!(interaction_weights(2, 1).is_err());
    }

    #[test]
    fn taylor_examples() {
        let w = series_weights(7, 0.3, 5).unwrap();
        assert_eq!(w.get(1), 7.0);
        let w = series_weights(7, 1.0, 50).unwrap();
        assert!(w.values.iter().all(|&v| (v - 7.0).abs() < 1e-12));
        assert!(truncated_weights(10, 0.4, 64, 0.1).is_err());
        let w = truncated_weights(100, 0.5, 64, 0.03).unwrap();
        assert!(w.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn geometric_weights_are_unbiased_at_mean_sparsity() {
        for &(p, d, m) in &[(100, 0.07, 5), (50, 0.2, 1), (30, 0.1, 4)] {
            let w = geometric_weights(p, d, m).unwrap();
            let s: f64 = (1..=m as u64).map(|l| w.get(l) * d * (1.0 - d).powi(l as i32 - 1) / p as f64).sum();
            assert!((s / d - 1.0).abs() < 1e-12);
            assert!((w.expected_factor(p, d) - 1.0).abs() < 1e-12);
        }
    }
}
