use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::rng::{stream_rng, Stream};

fn random(n: usize, m: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
    let mut rng = stream_rng(seed, Stream::Misc, 0);
    let s = DMatrix::from_fn(n, m, |_, _| rng.sample(StandardNormal));
    let y = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    (s, y)
}

fn det3(a: [[f64; 3]; 3]) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

#[test]
fn ols_matches_cramer_rule() {
    let (s, y) = random(5, 2, 1);
    // Normal equations for [1 | S] solved by Cramer's rule.
    let cols = |i: usize, j: usize| if j == 0 { 1.0 } else { s[(i, j - 1)] };
    let mut a = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for i in 0..5 {
        for j in 0..3 {
            r[j] += cols(i, j) * y[i];
            for k in 0..3 {
                a[j][k] += cols(i, j) * cols(i, k);
            }
        }
    }
    let d = det3(a);
    let sol: Vec<f64> = (0..3)
        .map(|c| {
            let mut m = a;
            for row in 0..3 {
                m[row][c] = r[row];
            }
            det3(m) / d
        })
        .collect();
    let fit = fit_ols(&s, &y, &SolverOptions::default()).unwrap();
    assert!((fit.alpha_hat.unwrap() - sol[0]).abs() < 1e-10);
    assert!((fit.b_hat[0] - sol[1]).abs() < 1e-10);
    assert!((fit.b_hat[1] - sol[2]).abs() < 1e-10);
}

#[test]
fn ols_trivial_cases() {
    let s = DMatrix::zeros(4, 3);
    let y = [1.0, 2.0, 3.0, 6.0];
    let fit = fit_ols(&s, &y, &SolverOptions::default()).unwrap();
    assert!(fit.b_hat.iter().all(|&b| b == 0.0));
    assert_eq!(fit.alpha_hat, Some(3.0));

    let (s, _) = random(10, 4, 2);
    let y: Vec<f64> = (0..10).map(|i| 0.5 + 2.0 * s[(i, 0)] - s[(i, 3)]).collect();
    let fit = fit_ols(&s, &y, &SolverOptions::default()).unwrap();
    let pred = fit.predict(&s).unwrap();
    assert!(pred.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-10));
}

#[test]
fn ols_normal_equations_hold_in_both_regimes() {
    for &(n, m) in &[(30, 8), (8, 30)] {
        let (s, y) = random(n, m, 3);
        let fit = fit_ols(&s, &y, &SolverOptions::default()).unwrap();
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let pred = fit.predict(&s).unwrap();
        let resid: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        let g = s.tr_mul(&nalgebra::DVector::from_vec(resid));
        assert!(g.amax() <= 1e-8 * ynorm, "{n}x{m}: {}", g.amax());
    }
}

#[test]
fn cg_path_agrees_with_eigen_path() {
    for &(n, m) in &[(40, 12), (12, 40)] {
        let (s, y) = random(n, m, 4);
        let dense = SolverOptions::default();
        let iter = SolverOptions { dense_limit: 0, ..dense };
        let a = fit_ols(&s, &y, &dense).unwrap();
        let b = fit_ols(&s, &y, &iter).unwrap();
        assert_eq!(b.diagnostics.solver, "cg");
        for (u, v) in a.b_hat.iter().zip(&b.b_hat) {
            assert!((u - v).abs() < 1e-6, "{u} vs {v}");
        }
        let r = 0.3 * a.b_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
        let a = fit_ridge(&s, &y, r, &dense).unwrap();
        let b = fit_ridge(&s, &y, r, &iter).unwrap();
        for (u, v) in a.b_hat.iter().zip(&b.b_hat) {
            assert!((u - v).abs() < 1e-6, "{u} vs {v}");
        }
    }
}

#[test]
fn ridge_trivial_cases_and_kkt() {
    let (s, y) = random(20, 5, 5);
    let opts = SolverOptions::default();
    let ols = fit_ols(&s, &y, &opts).unwrap();
    let norm = ols.b_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
    let wide = fit_ridge(&s, &y, 2.0 * norm, &opts).unwrap();
    assert_eq!(wide.b_hat, ols.b_hat);
    assert_eq!(wide.alpha_hat, ols.alpha_hat);
    let zero = fit_ridge(&s, &y, 0.0, &opts).unwrap();
    assert!(zero.b_hat.iter().all(|&v| v == 0.0));
    assert!((zero.alpha_hat.unwrap() - y.iter().sum::<f64>() / 20.0).abs() < 1e-15);
    for &(n, m) in &[(20, 5), (6, 25)] {
        let (s, y) = random(n, m, 6);
        let ols = fit_ols(&s, &y, &opts).unwrap();
        let r = 0.4 * ols.b_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
        let fit = fit_ridge(&s, &y, r, &opts).unwrap();
        let nb = fit.b_hat.iter().map(|v| v * v).sum::<f64>();
        assert!(nb <= r * r * (1.0 + 1e-8));
        assert!(fit.diagnostics.lambda.unwrap() > 0.0);
        assert!(kkt_residual(&s, &y, &fit, true).unwrap() < 1e-6);
    }
}

#[test]
fn logistic_trivial_cases() {
    let (s, _) = random(10, 3, 7);
    let y: Vec<f64> = (0..10).map(|i| (i % 2) as f64).collect();
    let fit = fit_logistic(&s, &y, 0.0, &LogisticOptions::default()).unwrap();
    assert!(fit.b_hat.iter().all(|&v| v == 0.0));
    assert!((fit.diagnostics.objective - std::f64::consts::LN_2).abs() < 1e-15);
    assert!(fit_logistic(&s, &[2.0; 10], 1.0, &LogisticOptions::default()).is_err());

    let s = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
    let y = [1.0, 0.0];
    let mut last = f64::INFINITY;
    for &r in &[0.5, 1.0, 2.0, 4.0] {
        let fit = fit_logistic(&s, &y, r, &LogisticOptions::default()).unwrap();
        assert!((fit.b_hat[0] - r).abs() < 1e-9);
        assert!(fit.diagnostics.objective < last);
        last = fit.diagnostics.objective;
    }
}

#[test]
fn metric_examples() {
    let f = [1.0, -2.0, 0.5];
    assert_eq!(mspe(&f, &f).unwrap(), 0.0);
    let shifted: Vec<f64> = f.iter().map(|v| v + 0.3).collect();
    assert!((mspe(&shifted, &f).unwrap() - 0.09).abs() < 1e-15);
    assert!(mspe(&f, &f[..2]).is_err());

    let lin = [0.3, -1.2, 2.0, 0.0];
    let probs: Vec<f64> = lin.iter().map(|&v| sigmoid(v)).collect();
    assert!(excess_risk_logistic(&lin, &lin, &probs).unwrap().abs() < 1e-15);
    assert_eq!(excess_risk_logistic(&[0.0; 4], &[0.0; 4], &[0.5; 4]).unwrap(), 0.0);
    let sb = [1.0, 0.5, -0.5, 2.0];
    let mut direct = 0.0;
    for i in 0..4 {
        direct += -probs[i] * sb[i] + (1.0 + sb[i].exp()).ln();
        direct -= -probs[i] * lin[i] + (1.0 + lin[i].exp()).ln();
    }
    assert!((excess_risk_logistic(&sb, &lin, &probs).unwrap() - direct / 4.0).abs() < 1e-12);
}

#[test]
fn registry_lookup() {
    let r = EstimatorRegistry::default();
    assert_eq!(r.names(), vec!["ols", "ridge", "logistic"]);
    assert!(r.get("lasso").is_err());
    let (s, y) = random(10, 2, 8);
    assert!(r.get("ridge").unwrap().fit(&s, &y, &FitOptions::default()).is_err());
}
