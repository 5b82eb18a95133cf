//! Least squares and norm-constrained ridge on a centered design.
//!
//! The smaller Gram matrix (`S_c^T S_c` or `S_c S_c^T`) is eigendecomposed once;
//! every `b(lambda)` and `||b(lambda)||` is then a cheap spectral filter. When
//! both dimensions exceed [`SolverOptions::dense_limit`] a matrix-free
//! conjugate-gradient path is used instead.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{Diagnostics, FitResult};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub intercept: bool,
    /// Largest Gram dimension solved by eigendecomposition.
    pub dense_limit: usize,
    pub cg_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { intercept: true, dense_limit: 4096, cg_tol: 1e-10 }
    }
}

struct Centered<'a> {
    s: &'a DMatrix<f64>,
    means: DVector<f64>,
    y_mean: f64,
    y_c: DVector<f64>,
}

impl<'a> Centered<'a> {
    fn new(s: &'a DMatrix<f64>, y: &[f64], intercept: bool) -> Result<Self> {
        if y.len() != s.nrows() {
            return Err(Error::Shape(format!("{} responses for {} rows", y.len(), s.nrows())));
        }
        if s.nrows() == 0 {
            return Err(Error::NoRows);
        }
        let n = s.nrows() as f64;
        let (means, y_mean) = if intercept {
            (s.row_mean().transpose(), y.iter().sum::<f64>() / n)
        } else {
            (DVector::zeros(s.ncols()), 0.0)
        };
        let y_c = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));
        Ok(Self { s, means, y_mean, y_c })
    }

    fn dense(&self) -> DMatrix<f64> {
        let mut c = self.s.clone();
        for (j, mut col) in c.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.means[j]);
        }
        c
    }

    /// `S_c v`.
    fn mul(&self, v: &DVector<f64>) -> DVector<f64> {
        let shift = self.means.dot(v);
        let mut out = self.s * v;
        out.add_scalar_mut(-shift);
        out
    }

    /// `S_c^T w`.
    fn tr_mul(&self, w: &DVector<f64>) -> DVector<f64> {
        let total = w.sum();
        self.s.tr_mul(w) - &self.means * total
    }

    fn intercept(&self, b: &DVector<f64>) -> f64 {
        self.y_mean - self.means.dot(b)
    }
}

enum Spectral {
    /// `S_c^T S_c = V diag(d) V^T`, `z = V^T S_c^T y_c`.
    Primal { v: DMatrix<f64>, d: DVector<f64>, z: DVector<f64>, tol: f64 },
    /// `S_c S_c^T = U diag(d) U^T`, `u = U^T y_c`; `b = S_c^T U filter(d) u`.
    Dual { sc_t_u: DMatrix<f64>, d: DVector<f64>, u: DVector<f64>, tol: f64 },
}

fn rank_tol(d: &DVector<f64>, dim: usize) -> f64 {
    let dmax = d.iter().copied().fold(0.0, f64::max);
    dmax * dim as f64 * f64::EPSILON * 16.0
}

impl Spectral {
    fn new(c: &Centered) -> Self {
        let sc = c.dense();
        let (n, m) = sc.shape();
        if m <= n {
            let g = sc.tr_mul(&sc);
            let eig = SymmetricEigen::new(g);
            let z = eig.eigenvectors.tr_mul(&sc.tr_mul(&c.y_c));
            let tol = rank_tol(&eig.eigenvalues, n.max(m));
            Spectral::Primal { v: eig.eigenvectors, d: eig.eigenvalues, z, tol }
        } else {
            let k = &sc * sc.transpose();
            let eig = SymmetricEigen::new(k);
            let u = eig.eigenvectors.tr_mul(&c.y_c);
            let tol = rank_tol(&eig.eigenvalues, n.max(m));
            let sc_t_u = sc.tr_mul(&eig.eigenvectors);
            Spectral::Dual { sc_t_u, d: eig.eigenvalues, u, tol }
        }
    }

    fn rank(&self) -> usize {
        let (d, tol) = match self {
            Spectral::Primal { d, tol, .. } | Spectral::Dual { d, tol, .. } => (d, *tol),
        };
        d.iter().filter(|&&x| x > tol).count()
    }

    fn solve(&self, lambda: f64) -> DVector<f64> {
        match self {
            Spectral::Primal { v, d, z, tol } => {
                let f = DVector::from_iterator(
                    d.len(),
                    d.iter().zip(z.iter()).map(|(&dj, &zj)| if dj > *tol { zj / (dj + lambda) } else { 0.0 }),
                );
                v * f
            }
            Spectral::Dual { sc_t_u, d, u, tol } => {
                let f = DVector::from_iterator(
                    d.len(),
                    d.iter().zip(u.iter()).map(|(&dj, &uj)| if dj > *tol { uj / (dj + lambda) } else { 0.0 }),
                );
                sc_t_u * f
            }
        }
    }

    fn norm_sq(&self, lambda: f64) -> f64 {
        match self {
            Spectral::Primal { d, z, tol, .. } => {
                d.iter().zip(z.iter()).filter(|(&dj, _)| dj > *tol).map(|(&dj, &zj)| (zj / (dj + lambda)).powi(2)).sum()
            }
            Spectral::Dual { d, u, tol, .. } => d
                .iter()
                .zip(u.iter())
                .filter(|(&dj, _)| dj > *tol)
                .map(|(&dj, &uj)| uj * uj * dj / (dj + lambda).powi(2))
                .sum(),
        }
    }
}

/// Conjugate gradients on `(S_c^T S_c + lambda I) b = S_c^T y_c`, started at `x0`.
fn cg(c: &Centered, lambda: f64, x0: DVector<f64>, tol: f64) -> (DVector<f64>, usize) {
    let rhs = c.tr_mul(&c.y_c);
    let rhs_norm = rhs.norm();
    let apply = |v: &DVector<f64>| c.tr_mul(&c.mul(v)) + v * lambda;
    let mut x = x0;
    let mut r = &rhs - apply(&x);
    let mut p = r.clone();
    let mut rs = r.norm_squared();
    let max_iter = 10 * c.s.ncols().max(10);
    let mut it = 0;
    while rs.sqrt() > tol * rhs_norm.max(f64::MIN_POSITIVE) && it < max_iter {
        let ap = apply(&p);
        let denom = p.dot(&ap);
        if denom <= 0.0 {
            break;
        }
        let alpha = rs / denom;
        x += &p * alpha;
        r -= &ap * alpha;
        let rs_new = r.norm_squared();
        p = &r + &p * (rs_new / rs);
        rs = rs_new;
        it += 1;
    }
    (x, it)
}

fn objective(c: &Centered, b: &DVector<f64>) -> f64 {
    (&c.y_c - c.mul(b)).norm_squared()
}

fn use_cg(s: &DMatrix<f64>, opts: &SolverOptions) -> bool {
    s.nrows().min(s.ncols()) > opts.dense_limit
}

pub fn fit_ols(s: &DMatrix<f64>, y: &[f64], opts: &SolverOptions) -> Result<FitResult> {
    let c = Centered::new(s, y, opts.intercept)?;
    let (b, diag) = if use_cg(s, opts) {
        let (b, it) = cg(&c, 0.0, DVector::zeros(s.ncols()), opts.cg_tol);
        (b, Diagnostics { solver: "cg".into(), iterations: it, ..Default::default() })
    } else {
        let sp = Spectral::new(&c);
        let rank = sp.rank();
        let solver = if matches!(sp, Spectral::Primal { .. }) { "eigen-primal" } else { "eigen-dual" };
        let b = sp.solve(0.0);
        let full = rank == s.ncols();
        if !full {
            log::debug!("OLS design is rank deficient ({rank} of {}); minimum-norm solution", s.ncols());
        }
        (b, Diagnostics { solver: solver.into(), rank: Some(rank), rank_deficient: !full, ..Default::default() })
    };
    let obj = objective(&c, &b);
    Ok(FitResult {
        estimator: "ols".into(),
        alpha_hat: opts.intercept.then(|| c.intercept(&b)),
        b_hat: b.iter().copied().collect(),
        radius: None,
        diagnostics: Diagnostics { objective: obj, ..diag },
    })
}

pub fn fit_ridge(s: &DMatrix<f64>, y: &[f64], radius: f64, opts: &SolverOptions) -> Result<FitResult> {
    if !(radius >= 0.0) {
        return invalid("radius must be non-negative");
    }
    let c = Centered::new(s, y, opts.intercept)?;
    let m = s.ncols();
    let finish = |b: DVector<f64>, diag: Diagnostics| FitResult {
        estimator: "ridge".into(),
        alpha_hat: opts.intercept.then(|| c.intercept(&b)),
        radius: Some(radius),
        diagnostics: Diagnostics { objective: objective(&c, &b), ..diag },
        b_hat: b.iter().copied().collect(),
    };
    if radius == 0.0 {
        return Ok(finish(DVector::zeros(m), Diagnostics { solver: "trivial".into(), ..Default::default() }));
    }
    let rhs_norm = c.tr_mul(&c.y_c).norm();
    let r2 = radius * radius;

    if use_cg(s, opts) {
        let (b0, it0) = cg(&c, 0.0, DVector::zeros(m), opts.cg_tol);
        if b0.norm_squared() <= r2 {
            return Ok(finish(b0, Diagnostics { solver: "cg".into(), iterations: it0, ..Default::default() }));
        }
        let eval = |lam: f64, x0: DVector<f64>| cg(&c, lam, x0, opts.cg_tol);
        let (lam, b, iters) = bisect(rhs_norm / radius, radius, |lam, warm: Option<&DVector<f64>>| {
            let (b, _) = eval(lam, warm.cloned().unwrap_or_else(|| DVector::zeros(m)));
            let nrm = b.norm();
            (nrm, b)
        })?;
        return Ok(finish(
            b,
            Diagnostics { solver: "cg".into(), iterations: iters, lambda: Some(lam), ..Default::default() },
        ));
    }

    let sp = Spectral::new(&c);
    let rank = Some(sp.rank());
    let solver = if matches!(sp, Spectral::Primal { .. }) { "eigen-primal" } else { "eigen-dual" };
    if sp.norm_sq(0.0) <= r2 {
        return Ok(finish(sp.solve(0.0), Diagnostics { solver: solver.into(), rank, ..Default::default() }));
    }
    let (lam, _, iters) = bisect(rhs_norm / radius, radius, |lam, _| (sp.norm_sq(lam).sqrt(), DVector::zeros(0)))?;
    Ok(finish(
        sp.solve(lam),
        Diagnostics { solver: solver.into(), iterations: iters, lambda: Some(lam), rank, ..Default::default() },
    ))
}

/// Find `lambda` with `radius (1 - 1e-8) <= norm(lambda) <= radius`, given that the
/// unconstrained norm exceeds `radius` and `norm(hi) <= radius`.
fn bisect<F>(hi0: f64, radius: f64, mut eval: F) -> Result<(f64, DVector<f64>, usize)>
where
    F: FnMut(f64, Option<&DVector<f64>>) -> (f64, DVector<f64>),
{
    let tol = 1e-8 * radius;
    let mut hi = hi0;
    let (mut nhi, mut bhi) = eval(hi, None);
    let mut iters = 1;
    while nhi > radius {
        hi *= 2.0;
        (nhi, bhi) = eval(hi, Some(&bhi));
        iters += 1;
        if !hi.is_finite() {
            return Err(Error::Numerical("ridge bracket diverged".into()));
        }
    }
    if radius - nhi <= tol {
        return Ok((hi, bhi, iters));
    }
    let mut lo = hi / 2.0;
    let (mut nlo, mut blo) = eval(lo, Some(&bhi));
    iters += 1;
    while nlo <= radius {
        if radius - nlo <= tol {
            return Ok((lo, blo, iters));
        }
        hi = lo;
        lo /= 2.0;
        (nlo, blo) = eval(lo, Some(&blo));
        iters += 1;
        if lo < f64::MIN_POSITIVE {
            return Err(Error::Numerical("ridge bracket collapsed".into()));
        }
    }
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        let (nm, bm) = eval(mid, Some(&blo));
        iters += 1;
        if nm <= radius && radius - nm <= tol {
            return Ok((mid, bm, iters));
        }
        if nm > radius {
            lo = mid;
            blo = bm;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            return Ok((hi, eval(hi, Some(&blo)).1, iters));
        }
    }
    Err(Error::Numerical("ridge bisection did not converge".into()))
}

/// Relative KKT residual `||S_c^T (y_c - S_c b) - lambda b|| / ||S_c^T y_c||` of a linear fit.
pub fn kkt_residual(s: &DMatrix<f64>, y: &[f64], fit: &FitResult, intercept: bool) -> Result<f64> {
    let c = Centered::new(s, y, intercept)?;
    let b = DVector::from_column_slice(&fit.b_hat);
    let lam = fit.diagnostics.lambda.unwrap_or(0.0);
    let g = c.tr_mul(&(&c.y_c - c.mul(&b))) - &b * lam;
    Ok(g.norm() / c.tr_mul(&c.y_c).norm().max(f64::MIN_POSITIVE))
}
