//! Oracle coefficient vectors `b*` on the compressed scale.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::first_hit::FirstHitStream;
use super::weights::{interaction_weights, main_weights, series_weights, WeightKind, WeightVector};
use crate::error::{invalid, Error, Result};
use crate::hashing::{BBitMatrix, HashEnsemble, Variant};
use crate::sparse::{SparseMatrix, SparsityProfile};

/// `b*` laid out like the compressed matrix: `L` blocks of `width` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCoefficients {
    pub b: Vec<f64>,
    pub width: usize,
}

impl OracleCoefficients {
    pub fn norm_sq(&self) -> f64 {
        self.b.iter().map(|v| v * v).sum()
    }

    /// `S b*` for a dense compressed matrix.
    pub fn apply_dense(&self, s: &DMatrix<f64>) -> Vec<f64> {
        assert_eq!(s.ncols(), self.b.len());
        let mut out = vec![0.0; s.nrows()];
        for (j, &bj) in self.b.iter().enumerate() {
            if bj != 0.0 {
                for (o, v) in out.iter_mut().zip(s.column(j).iter()) {
                    *o += v * bj;
                }
            }
        }
        out
    }

    pub fn apply_bbit(&self, s: &BBitMatrix) -> Vec<f64> {
        assert_eq!(s.ncols(), self.b.len());
        s.mul_vec(&self.b)
    }
}

fn nonzeros(v: &[f64]) -> Vec<(usize, f64)> {
    v.iter().enumerate().filter(|(_, &x)| x != 0.0).map(|(k, &x)| (k, x)).collect()
}

fn check_beta(beta: &[f64], e: &HashEnsemble) -> Result<()> {
    if beta.len() != e.p() {
        return Err(Error::Shape(format!("beta has length {}, ensemble p = {}", beta.len(), e.p())));
    }
    Ok(())
}

/// Main-effect oracle for equal row sparsity.
///
/// Random sign: `b*_l = (q/L) sum_k beta_k Psi_kl w_{pi_l(k)}`.
/// b-bit: `b*_{lc} = (q/L) sum_k beta_k w_{pi_l(k)} (1{code(pi_l(k)) = c} - nu) / (1 - nu)`, `nu = 2^-b`.
pub fn oracle_b_main(beta: &[f64], e: &HashEnsemble, profile: &SparsityProfile) -> Result<OracleCoefficients> {
    check_beta(beta, e)?;
    let q = profile.equal_q()?;
    let p = e.p();
    let w = main_weights(p, q)?;
    let nz = nonzeros(beta);
    let scale = q as f64 / e.l() as f64;
    match e.variant() {
        Variant::RandomSign => {
            if !e.has_signs() {
                return Err(Error::Incompatible("ensemble carries no sign vectors".into()));
            }
            let b = (0..e.l())
                .map(|l| {
                    let ranks = e.ranks(l);
                    scale * nz.iter().map(|&(k, bk)| bk * e.sign(k, l) * w[ranks[k] as usize - 1]).sum::<f64>()
                })
                .collect();
            Ok(OracleCoefficients { b, width: 1 })
        }
        Variant::BBitPlain | Variant::BBitShuffled => {
            if e.variant() == Variant::BBitPlain {
                log::warn!("b-bit oracle with the plain residue map is not unbiased in general");
            }
            let width = 1usize << e.b();
            let nu = 1.0 / width as f64;
            let mut b = vec![0.0; e.l() * width];
            for l in 0..e.l() {
                let ranks = e.ranks(l);
                let block = &mut b[l * width..(l + 1) * width];
                let mut total = 0.0;
                for &(k, bk) in &nz {
                    let r = ranks[k] as u64;
                    let t = bk * w[r as usize - 1];
                    total += t;
                    block[e.code(l, r) as usize] += t;
                }
                for v in block.iter_mut() {
                    *v = scale * (*v - nu * total) / (1.0 - nu);
                }
            }
            Ok(OracleCoefficients { b, width })
        }
    }
}

/// Scaled-signal oracle from first-hit streams: `b*_l = (1/L) sum_k beta_k Psi_kl w_{g_l(k)}`.
///
/// `e` must be built from the induced permutations of `streams` and carry signs.
pub fn oracle_b_scaled(
    beta: &[f64],
    profile: &SparsityProfile,
    weights: &WeightVector,
    streams: &[FirstHitStream],
    e: &HashEnsemble,
) -> Result<OracleCoefficients> {
    check_beta(beta, e)?;
    if streams.len() != e.l() {
        return Err(Error::Shape("one first-hit stream per permutation required".into()));
    }
    if !e.has_signs() {
        return Err(Error::Incompatible("ensemble carries no sign vectors".into()));
    }
    let max_delta = profile.delta.iter().copied().fold(0.0, f64::max);
    let needed = max_delta.max((1.0 / profile.p as f64).sqrt());
    if weights.kind == WeightKind::FullSeries && weights.radius <= needed {
        return invalid(format!(
            "radius of convergence {} does not exceed max(max delta_i, 1/sqrt(p)) = {needed}",
            weights.radius
        ));
    }
    let max_g = streams.iter().flat_map(|s| s.g.iter().copied()).max().unwrap_or(1);
    let extended;
    let w = if weights.kind == WeightKind::FullSeries && max_g as usize > weights.values.len() {
        extended = series_weights(e.p(), weights.a, max_g as usize)?;
        &extended
    } else {
        weights
    };
    let nz = nonzeros(beta);
    let inv_l = 1.0 / e.l() as f64;
    let b = streams
        .iter()
        .enumerate()
        .map(|(l, s)| inv_l * nz.iter().map(|&(k, bk)| bk * e.sign(k, l) * w.get(s.g[k])).sum::<f64>())
        .collect();
    Ok(OracleCoefficients { b, width: 1 })
}

/// Second-order interaction model: main effects `theta1` and pairs `(k, k1, value)`.
///
/// The pair `(k, k1)` contributes `X_ik 1{X_ik1 = 0} value` to the signal of row `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionSpec {
    pub theta1: Vec<f64>,
    pub theta2: Vec<(usize, usize, f64)>,
}

impl InteractionSpec {
    pub fn new(theta1: Vec<f64>, mut theta2: Vec<(usize, usize, f64)>) -> Result<Self> {
        let p = theta1.len();
        for &(k, k1, _) in &theta2 {
            if k == k1 {
                return invalid(format!("diagonal interaction entry ({k}, {k1})"));
            }
            if k >= p || k1 >= p {
                return Err(Error::Shape(format!("interaction entry ({k}, {k1}) out of range")));
            }
        }
        theta2.retain(|t| t.2 != 0.0);
        theta2.sort_by_key(|t| (t.0, t.1));
        if theta2.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return invalid("duplicate interaction entry");
        }
        Ok(Self { theta1, theta2 })
    }

    pub fn p(&self) -> usize {
        self.theta1.len()
    }

    /// `f*_i = sum_k X_ik theta1_k + sum_{k,k1} X_ik 1{X_ik1 = 0} Theta_{k k1}`.
    pub fn signal(&self, x: &SparseMatrix) -> Result<Vec<f64>> {
        let mut f = x.mul_vec(&self.theta1)?;
        for (i, fi) in f.iter_mut().enumerate() {
            for &(k, k1, v) in &self.theta2 {
                let xk = x.get(i, k);
                if xk != 0.0 && x.get(i, k1) == 0.0 {
                    *fi += xk * v;
                }
            }
        }
        Ok(f)
    }

    /// `l(Theta) = ||theta1|| + sqrt(2 (2 - q/p) q sum_k (sum_k1 |Theta_k k1|)^2)`.
    pub fn norm(&self, q: usize) -> f64 {
        let p = self.p() as f64;
        let q = q as f64;
        let mut rows = std::collections::BTreeMap::<usize, f64>::new();
        for &(k, _, v) in &self.theta2 {
            *rows.entry(k).or_default() += v.abs();
        }
        let inner: f64 = rows.values().map(|s| s * s).sum();
        let t1 = self.theta1.iter().map(|v| v * v).sum::<f64>().sqrt();
        t1 + (2.0 * (2.0 - q / p) * q * inner).sqrt()
    }
}

/// Interaction oracle, random-sign hashing with equal row sparsity.
pub fn oracle_b_interaction(
    spec: &InteractionSpec,
    e: &HashEnsemble,
    profile: &SparsityProfile,
) -> Result<OracleCoefficients> {
    check_beta(&spec.theta1, e)?;
    if !e.has_signs() {
        return Err(Error::Incompatible("interaction oracle needs random-sign hashing".into()));
    }
    let q = profile.equal_q()?;
    let p = e.p();
    let w1 = main_weights(p, q)?;
    let w2 = interaction_weights(p, q)?;
    let nz = nonzeros(&spec.theta1);
    let c1 = q as f64 / e.l() as f64;
    let c2 = (p * q) as f64 / e.l() as f64;
    let b = (0..e.l())
        .map(|l| {
            let ranks = e.ranks(l);
            let main: f64 = nz.iter().map(|&(k, t)| e.sign(k, l) * t * w1[ranks[k] as usize - 1]).sum();
            let inter: f64 = spec
                .theta2
                .iter()
                .filter(|&&(k, k1, _)| ranks[k1] < ranks[k])
                .map(|&(k, _, t)| e.sign(k, l) * t * w2[ranks[k] as usize - 1])
                .sum();
            c1 * main + c2 * inter
        })
        .collect();
    Ok(OracleCoefficients { b, width: 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::sparsity_profile;

    #[test]
    fn single_permutation_example() {
        let x = SparseMatrix::binary(4, &[vec![0, 1], vec![2, 3]]).unwrap();
        let prof = sparsity_profile(&x);
        let e = HashEnsemble::from_permutations(Variant::RandomSign, 1, &[vec![2, 3, 1, 4]])
            .unwrap()
            .with_signs(&[vec![-1, 1, 1, -1]])
            .unwrap();
        let b = oracle_b_main(&[1.0, 0.0, 0.0, 0.0], &e, &prof).unwrap();
        assert!((b.b[0] - 2.0 * -1.0 * 6.0 / 7.0).abs() < 1e-15);
        let zero = oracle_b_main(&[0.0; 4], &e, &prof).unwrap();
        assert!(zero.b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unequal_sparsity_is_rejected() {
        let x = SparseMatrix::binary(4, &[vec![0, 1], vec![2]]).unwrap();
        let e = HashEnsemble::from_permutations(Variant::RandomSign, 1, &[vec![1, 2, 3, 4]])
            .unwrap()
            .with_signs(&[vec![1; 4]])
            .unwrap();
        let err = oracle_b_main(&[1.0; 4], &e, &sparsity_profile(&x)).unwrap_err();
        assert!(err.to_string().contains("pad"));
    }

    #[test]
    fn interaction_norm_examples() {
        let s = InteractionSpec::new(vec![1.0, 0.0, 0.0, 0.0], vec![]).unwrap();
        assert_eq!(s.norm(2), 1.0);
        let s = InteractionSpec::new(vec![0.0; 4], vec![(0, 1, -0.3)]).unwrap();
        assert!((s.norm(2) - 0.3 * (2.0f64 * 1.5 * 2.0).sqrt()).abs() < 1e-15);
        let s = InteractionSpec::new(vec![1.0, 1.0, 0.0, 0.0], vec![(0, 2, 0.5), (1, 3, 0.5)]).unwrap();
        assert!((s.norm(2) - (2f64.sqrt() + 3f64.sqrt())).abs() < 1e-14);
        assert!(InteractionSpec::new(vec![0.0; 4], vec![(1, 1, 1.0)]).is_err());
    }

    #[test]
    fn single_pair_interaction_term() {
        // pi(2) < pi(1): pair (1,2) is active; pi = (3, 1, 2, 4)
        let x = SparseMatrix::binary(4, &[vec![0, 2], vec![1, 3]]).unwrap();
        let prof = sparsity_profile(&x);
        let e = HashEnsemble::from_permutations(Variant::RandomSign, 1, &[vec![3, 1, 2, 4]])
            .unwrap()
            .with_signs(&[vec![-1, 1, 1, 1]])
            .unwrap();
        let spec = InteractionSpec::new(vec![0.0; 4], vec![(0, 1, 1.0)]).unwrap();
        let b = oracle_b_interaction(&spec, &e, &prof).unwrap();
        let w2 = interaction_weights(4, 2).unwrap();
        assert!((b.b[0] - 4.0 * 2.0 * -1.0 * w2[2]).abs() < 1e-14);
        let main_only = InteractionSpec::new(vec![0.5, 0.0, -1.0, 0.0], vec![]).unwrap();
        let bi = oracle_b_interaction(&main_only, &e, &prof).unwrap();
        let bm = oracle_b_main(&main_only.theta1, &e, &prof).unwrap();
        assert_eq!(bi, bm);
    }
}
