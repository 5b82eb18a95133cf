use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use minwise::hashing::{build_ensemble, min_hash, random_sign_matrix};
use minwise::io::{read_container, read_svmlight_file, SvmlightOptions};
use minwise::regress::{fit_ols, SolverOptions};
use minwise::{HashConfig, Variant};
use tempfile::TempDir;

const TOY: &str = "1 2:1 4:1\n0 3:1 4:1\n1 1:1 3:1\n0 2:1 3:1\n1 1:1 2:1\n";
const TOY_VALUES: &str = "1 2:7 4:9\n0 3:1 4:4\n1 1:1 3:2\n0 2:6 3:1\n1 1:8 2:5\n";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minwise"))
        .args(args)
        .current_dir(dir)
        .env_remove("MINHASH_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn setup() -> TempDir {
    let d = TempDir::new().unwrap();
    fs::write(d.path().join("toy.svm"), TOY).unwrap();
    fs::write(d.path().join("values.svm"), TOY_VALUES).unwrap();
    d
}

fn read_s(path: PathBuf) -> nalgebra::DMatrix<f64> {
    read_container(fs::File::open(path).unwrap()).unwrap().to_dense()
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn toy_table_with_injected_permutation() {
    let d = setup();
    fs::write(d.path().join("perm.txt"), "2 3 1 4\n").unwrap();
    let o = run(
        d.path(),
        &["hash", "--input", "toy.svm", "--variant", "bbit", "--perm-file", "perm.txt", "--out", "h", "--emit-hm"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_s(d.path().join("h/S.mwcsr"));
    let rows: Vec<(f64, f64)> = (0..5).map(|i| (s[(i, 0)], s[(i, 1)])).collect();
    assert_eq!(rows, [(0., 1.), (0., 1.), (0., 1.), (0., 1.), (1., 0.)]);
    assert_eq!(fs::read_to_string(d.path().join("h/H.csv")).unwrap(), "2\n3\n3\n3\n1\n");
    assert_eq!(fs::read_to_string(d.path().join("h/M.csv")).unwrap(), "3\n1\n1\n1\n2\n");
    assert!(d.path().join("h/manifest.json").exists());

    fs::write(d.path().join("signs.txt"), "1 -1 -1 1\n").unwrap();
    let o = run(
        d.path(),
        &[
            "hash",
            "--input",
            "values.svm",
            "--rescale",
            "--perm-file",
            "perm.txt",
            "--signs-file",
            "signs.txt",
            "--out",
            "r",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_s(d.path().join("r/S.mwcsr"));
    let col: Vec<f64> = s.column(0).iter().map(|v| v * 9.0).collect();
    let expect = [-7.0, -1.0, -2.0, -1.0, 8.0];
    assert!(col.iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-12), "{col:?}");
}

#[test]
fn usage_and_format_errors() {
    let d = setup();
    assert_eq!(code(&run(d.path(), &["hash", "--input", "toy.svm", "--L", "0", "--out", "h"])), 64);
    assert_eq!(code(&run(d.path(), &["hash", "--input", "toy.svm", "--out", "h"])), 64);
    assert_eq!(code(&run(d.path(), &["frobnicate"])), 64);
    assert_eq!(code(&run(d.path(), &["--help"])), 0);
    assert_eq!(code(&run(d.path(), &["--version"])), 0);
    fs::write(d.path().join("bad.svm"), "1 3:1 2:1\n").unwrap();
    assert_eq!(code(&run(d.path(), &["hash", "--input", "bad.svm", "--L", "2", "--out", "h"])), 65);
    let o =
        run(d.path(), &["hash", "--input", "values.svm", "--rescale", "--variant", "bbit", "--L", "4", "--out", "h"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn hashing_is_deterministic_and_seeded_from_env() {
    let d = setup();
    for out in ["a", "b"] {
        assert_eq!(code(&run(d.path(), &["hash", "--input", "toy.svm", "--L", "16", "--seed", "5", "--out", out])), 0);
    }
    let a = fs::read(d.path().join("a/S.mwcsr")).unwrap();
    assert_eq!(a, fs::read(d.path().join("b/S.mwcsr")).unwrap());

    let o = Command::new(env!("CARGO_BIN_EXE_minwise"))
        .args(["hash", "--input", "toy.svm", "--L", "16", "--out", "c"])
        .current_dir(d.path())
        .env("MINHASH_SEED", "5")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(a, fs::read(d.path().join("c/S.mwcsr")).unwrap());
    assert_eq!(json(d.path().join("c/manifest.json"))["seed"], 5);
}

#[test]
fn ols_fit_matches_library() {
    let d = setup();
    assert_eq!(code(&run(d.path(), &["hash", "--input", "toy.svm", "--L", "3", "--seed", "2", "--out", "h"])), 0);
    fs::write(d.path().join("y.txt"), "1\n0\n1\n0\n1\n").unwrap();
    let o = run(d.path(), &["fit", "--S", "h/S.mwcsr", "--y", "y.txt", "--out", "fit.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(d.path().join("fit.json"));

    let x = read_svmlight_file(&d.path().join("toy.svm"), SvmlightOptions::default()).unwrap().x;
    let e = build_ensemble(&HashConfig::new(Variant::RandomSign, 3, 1, 2), 4).unwrap();
    let s = random_sign_matrix(&x, &min_hash(&x, &e).unwrap(), &e).unwrap();
    let lib = fit_ols(&s, &[1., 0., 1., 0., 1.], &SolverOptions::default()).unwrap();
    let b: Vec<f64> = serde_json::from_value(report["fits"][0]["b_hat"].clone()).unwrap();
    assert_eq!(b, lib.b_hat);
    assert_eq!(report["fits"][0]["alpha_hat"].as_f64(), lib.alpha_hat);
    assert!(d.path().join("fit.manifest.json").exists());
}

#[test]
fn ridge_radius_handling() {
    let d = setup();
    let o = run(
        d.path(),
        &["fit", "--input", "toy.svm", "--L", "8", "--estimator", "ridge", "--radius", "0", "--out", "zero.json"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let b: Vec<f64> = serde_json::from_value(json(d.path().join("zero.json"))["fits"][0]["b_hat"].clone()).unwrap();
    assert!(b.iter().all(|&v| v == 0.0));

    let args = ["fit", "--input", "toy.svm", "--L", "8", "--estimator", "ridge", "--eta", "0.5", "--beta-norm", "3"];
    let o = run(d.path(), &[&args[..], &["--q", "2", "--out", "eta.json"]].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(d.path().join("eta.json"))["radius"].as_f64().unwrap();
    let (p, q, l, eta, norm) = (4.0, 2.0, 8.0, 0.5, 3.0f64);
    let expect = ((1.0 + eta) * (2.0 - q / p) * q * norm * norm / l).sqrt();
    assert!((r - expect).abs() < 1e-12, "{r} vs {expect}");

    fs::write(d.path().join("short.txt"), "1\n2\n").unwrap();
    let o = run(d.path(), &["fit", "--input", "toy.svm", "--L", "8", "--y", "short.txt", "--out", "s.json"]);
    assert_eq!(code(&o), 65);
    let o = run(d.path(), &["fit", "--input", "toy.svm", "--L", "8", "--estimator", "ridge", "--out", "s.json"]);
    assert_eq!(code(&o), 64);
}

#[test]
fn fit_reports_importance_and_aggregates() {
    let d = setup();
    let o = run(d.path(), &["fit", "--input", "toy.svm", "--L", "6", "--importance", "imp.csv", "--out", "f.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let imp = fs::read_to_string(d.path().join("imp.csv")).unwrap();
    assert_eq!(imp.lines().next(), Some("k,norm,rank"));
    assert_eq!(imp.lines().count(), 5);
    let o = run(d.path(), &["fit", "--input", "toy.svm", "--L", "6", "--B", "4", "--out", "agg.json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(d.path().join("agg.json"))["fits"].as_array().unwrap().len(), 4);
}

const SCENARIO: &str = "name = tiny\nn = 80\np = 40\nq = 4\nsigma = 0.5\nrho = 0.2\nseed = 3\n";

#[test]
fn simulate_writes_csv_and_replays() {
    let d = setup();
    fs::write(d.path().join("sc.txt"), SCENARIO).unwrap();
    let args =
        ["simulate", "--scenario", "sc.txt", "--L", "8,16", "--reps", "2", "--plot", "plot.csv", "--out", "r.csv"];
    let o = run(d.path(), &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(d.path().join("r.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("scenario,method,L,mspe,se,relative"));
    let rel: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(rel.len(), 2);
    assert!(rel.iter().any(|&r| r == 1.0) && rel.iter().all(|&r| r >= 1.0));
    assert!(fs::read_to_string(d.path().join("plot.csv")).unwrap().starts_with("x,y,series\n"));

    let o = run(d.path(), &["replay", "--manifest", "r.manifest.json", "--out", "again.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv, fs::read_to_string(d.path().join("again.csv")).unwrap());

    let o = run(
        d.path(),
        &["--threads", "1", "simulate", "--scenario", "sc.txt", "--L", "8,16", "--reps", "2", "--out", "t.csv"],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(csv, fs::read_to_string(d.path().join("t.csv")).unwrap());

    let o = run(d.path(), &["simulate", "--scenario", "sc.txt", "--methods", "minhash+ols", "--out", "x.csv"]);
    assert_eq!(code(&o), 64);
}

#[test]
fn simulate_single_method_is_self_normalized() {
    let d = setup();
    fs::write(d.path().join("sc.txt"), SCENARIO).unwrap();
    for out in ["a.csv", "b.csv"] {
        let o =
            run(d.path(), &["simulate", "--scenario", "sc.txt", "--reps", "1", "--export", "data.svm", "--out", out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read_to_string(d.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(d.path().join("b.csv")).unwrap());
    assert!(a.lines().skip(1).all(|l| l.ends_with(",1.0")), "{a}");
    let exported = read_svmlight_file(&d.path().join("data.svm"), SvmlightOptions::default()).unwrap();
    assert_eq!(exported.x.n_rows(), 80);
}

#[test]
fn verify_checks_and_exit_codes() {
    let d = setup();
    // Every row holds all p = 4 columns.
    fs::write(d.path().join("full.svm"), "0 1:1 2:1 3:1 4:1\n0 1:1 2:1 3:1 4:1\n").unwrap();
    fs::write(d.path().join("beta.txt"), "0.5\n-1\n2\n0.25\n").unwrap();
    let o = run(
        d.path(),
        &[
            "verify",
            "--target",
            "unbiasedness",
            "--input",
            "full.svm",
            "--beta",
            "beta.txt",
            "--R",
            "2000",
            "--out",
            "v.jsonl",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let rec: serde_json::Value =
        serde_json::from_str(fs::read_to_string(d.path().join("v.jsonl")).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(rec["target"], "unbiasedness");
    assert_eq!(rec["pass"], true);

    assert_eq!(code(&run(d.path(), &["verify", "--input", "full.svm", "--R", "10", "--out", "v.jsonl"])), 64);
    let o = run(
        d.path(),
        &["verify", "--input", "toy.svm", "--oracle", "truncated", "--target", "unbiasedness", "--out", "t.jsonl"],
    );
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_approx_error_from_params() {
    let d = setup();
    let params = serde_json::json!({
        "rows": [[1, 4, 7], [2, 5, 8], [3, 6, 9], [1, 5, 9], [2, 6, 7], [3, 4, 8]],
        "p": 10,
        "beta": [1.0, -0.5, 0.3, 0.0, 0.8, -1.2, 0.4, 0.1, -0.6, 0.9],
        "L": 16,
        "oracle": {"kind": "bbit-shuffled", "b": 1},
        "seed": 4
    });
    fs::write(d.path().join("p.json"), params.to_string()).unwrap();
    let o = run(
        d.path(),
        &["verify", "--params", "p.json", "--target", "unbiasedness,approx_error", "--R", "4000", "--out", "a.jsonl"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let text = fs::read_to_string(d.path().join("a.jsonl")).unwrap();
    assert!(text.lines().any(|l| l.contains("\"approx_error\"")));

    let o = run(d.path(), &["replay", "--manifest", "a.manifest.json", "--out", "b.jsonl"]);
    assert_eq!(code(&o), 0);
    assert_eq!(text, fs::read_to_string(d.path().join("b.jsonl")).unwrap());
}
