use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use minwise::hashing::{
    expand_bbit, min_hash_with, random_sign_matrix, second_min_hash, Compressed, CompressorRegistry, MinHashOptions,
};
use minwise::io::{
    read_container, read_svmlight_file, write_container, write_csv, write_svmlight, CsrData, SvmlightData,
    SvmlightOptions,
};
use minwise::oracle::bounds::oracle_radius;
use minwise::regress::{
    excess_risk_logistic, importance_table, logistic_loss, mspe, sigmoid, AggregateModel, EstimatorRegistry,
    FitOptions, FitResult,
};
use minwise::simulate::{generate, run_sweep, Method, ScenarioConfig, SweepOptions};
use minwise::verify::{OracleKind, VerificationRegistry, VerifyProblem, MIN_REPLICATIONS};
use minwise::{sparsity_profile, Error, HashConfig, HashEnsemble, SparseMatrix, Variant};

use crate::util::{
    create_parent, read_table, read_vector, write_json, CliResult, Failure, EXIT_OK, EXIT_VERIFY_FAILED,
};
use crate::{FitArgs, HashArgs, SimulateArgs, VerifyArgs};

/// Exit status, written artifacts, manifest path.
pub type Outcome = (u8, Vec<PathBuf>, PathBuf);

fn manifest_beside(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn read_svm(path: &Path, opts: SvmlightOptions) -> CliResult<SvmlightData> {
    read_svmlight_file(path, opts).map_err(|e| Failure::from(e).context(path))
}

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| Failure::from(e).context(path))
}

/// The hashing variant behind a compressor name; the projection baseline only uses `L` and the seed.
fn config_variant(name: &str) -> Variant {
    name.parse().unwrap_or(Variant::RandomSign)
}

fn injected(a: &HashArgs, x: &SparseMatrix, perm_file: &Path) -> CliResult<Compressed> {
    let variant: Variant = a.variant.parse()?;
    let ranks = read_table::<u32>(perm_file)?;
    if let Some(l) = a.l.filter(|&l| l as usize != ranks.len()) {
        return Err(Failure::usage(format!("--L {l} but {} permutations in the file", ranks.len())));
    }
    if ranks.first().map(Vec::len) != Some(x.n_cols()) {
        return Err(Error::Shape(format!("permutations must have length p = {}", x.n_cols())).into());
    }
    HashConfig::new(variant, ranks.len(), a.b, a.seed).validate()?;
    if variant.is_bbit() && !x.is_binary() {
        return Err(Error::Incompatible(format!("{variant} hashing needs a binary design")).into());
    }
    let mut e = HashEnsemble::from_permutations(variant, a.b, &ranks)?;
    match variant {
        Variant::RandomSign => {
            let f = a
                .signs_file
                .as_ref()
                .ok_or_else(|| Failure::usage("random-sign with --perm-file needs --signs-file"))?;
            e = e.with_signs(&read_table::<i8>(f)?)?;
        }
        Variant::BBitShuffled => {
            let f = a
                .shuffle_file
                .as_ref()
                .ok_or_else(|| Failure::usage("bbit-shuffled with --perm-file needs --shuffle-file"))?;
            e = e.with_shuffle(&read_table::<u32>(f)?)?;
        }
        Variant::BBitPlain => {}
    }
    let out = min_hash_with(x, &e, MinHashOptions { materialize_ranks: variant.is_bbit() })?;
    let s = if variant.is_bbit() { expand_bbit(&out, &e)?.to_dense() } else { random_sign_matrix(x, &out, &e)? };
    Ok(Compressed { s, hash: Some(out), ensemble: Some(e) })
}

pub fn hash(a: &HashArgs) -> CliResult<Outcome> {
    let comp = CompressorRegistry::default();
    let comp = comp.get(&a.variant)?;
    if a.perm_file.is_none() && (a.signs_file.is_some() || a.shuffle_file.is_some()) {
        return Err(Failure::usage("--signs-file and --shuffle-file need --perm-file"));
    }
    let data = read_svm(&a.input, SvmlightOptions { rescale: a.rescale, n_features: a.features })?;
    let x = &data.x;
    let c = match &a.perm_file {
        Some(f) => injected(a, x, f)?,
        None => {
            let l = a.l.ok_or_else(|| Failure::usage("--L is required"))?;
            comp.compress(x, &HashConfig::new(config_variant(&a.variant), l as usize, a.b, a.seed))?
        }
    };
    std::fs::create_dir_all(&a.out)?;
    let s_path = a.out.join("S.mwcsr");
    let csr = CsrData::from_dense(&c.s);
    write_container(File::create(&s_path)?, &csr)?;
    let mut artifacts = vec![s_path];
    if a.emit_hm {
        let h = c.hash.as_ref().ok_or_else(|| Failure::usage("--emit-hm needs a min-wise variant"))?;
        let hp = a.out.join("H.csv");
        write_csv(File::create(&hp)?, h.n, h.l, |i, l| h.h(i, l).map_or(0, |k| k + 1))?;
        let mp = a.out.join("M.csv");
        write_csv(File::create(&mp)?, h.n, h.l, |i, l| h.m(i, l).unwrap_or(0))?;
        artifacts.extend([hp, mp]);
    }
    let (n, w) = c.s.shape();
    let density = if n * w == 0 { 0.0 } else { csr.values.len() as f64 / (n * w) as f64 };
    println!("S: {n} x {w}, density {density:.4}");
    Ok((EXIT_OK, artifacts, a.out.join("manifest.json")))
}

#[derive(Debug, Serialize)]
struct FitReport {
    estimator: String,
    variant: Option<String>,
    n: usize,
    width: usize,
    #[serde(rename = "L")]
    l: usize,
    radius: Option<f64>,
    fits: Vec<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    train_mspe: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    train_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mspe: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    excess_risk: Option<f64>,
}

fn fit_radius(a: &FitArgs, p: Option<usize>, q: Option<usize>, l: usize) -> CliResult<Option<f64>> {
    if a.estimator == "ols" {
        return Ok(None);
    }
    if let Some(r) = a.radius {
        return Ok(Some(r));
    }
    let (Some(eta), Some(norm)) = (a.eta, a.beta_norm) else {
        return Err(Failure::usage(format!("{} needs --radius or --eta with --beta-norm", a.estimator)));
    };
    let p = p.ok_or_else(|| Failure::usage("--p is required to derive the radius"))?;
    let q = q.ok_or_else(|| Failure::usage("--q is required to derive the radius"))?;
    if q == 0 || q > p {
        return Err(Failure::usage(format!("--q must lie in 1..={p}")));
    }
    Ok(Some(oracle_radius(p, q, l, eta, norm, false)))
}

fn check_len(what: &str, v: &[f64], n: usize) -> CliResult<()> {
    if v.len() != n {
        return Err(Error::Shape(format!("{what} has {} values for {n} rows", v.len())).into());
    }
    Ok(())
}

pub fn fit(a: &FitArgs) -> CliResult<Outcome> {
    let ests = EstimatorRegistry::default();
    let est = ests.get(&a.estimator)?;
    let (report_variant, fits, pred, y, n, width, l, radius);
    if let Some(input) = &a.input {
        let comps = CompressorRegistry::default();
        let comp = comps.get(&a.variant)?;
        let data = read_svm(input, SvmlightOptions { rescale: a.rescale, n_features: None })?;
        let x = &data.x;
        let yy = match &a.y {
            Some(f) => read_vector(f)?,
            None => data.y.clone(),
        };
        check_len("y", &yy, x.n_rows())?;
        let ll = a.l.ok_or_else(|| Failure::usage("--L is required with --input"))? as usize;
        let q = a.q.or(Some(sparsity_profile(x).q_max));
        let r = fit_radius(a, Some(a.p.unwrap_or(x.n_cols())), q, ll)?;
        let cfg = HashConfig::new(config_variant(&a.variant), ll, a.b, a.seed);
        let fo = FitOptions { radius: r, intercept: None };
        let seeds = AggregateModel::seeds(a.seed, a.aggregate as usize);
        let model = AggregateModel::fit(x, &yy, &cfg, comp, est, &fo, &seeds)?;
        pred = model.predict(x, comp)?;
        if let Some(path) = &a.importance {
            if a.variant != "random-sign" || a.aggregate != 1 {
                return Err(Failure::usage("--importance needs --variant random-sign and --B 1"));
            }
            let c = comp.compress(x, &model.configs[0])?;
            let (h, e) = (c.hash.unwrap(), c.ensemble.unwrap());
            let (_, s2) = second_min_hash(x, &e)?;
            let rows = importance_table(&model.fits[0], &h, &c.s, &s2, x.n_cols())?;
            create_parent(path)?;
            let mut w = csv::Writer::from_path(path)?;
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        width = model.fits[0].b_hat.len();
        (report_variant, fits, y, n, l, radius) = (Some(a.variant.clone()), model.fits, yy, x.n_rows(), ll, r);
    } else if let Some(sp) = &a.s {
        if a.aggregate != 1 {
            return Err(Failure::usage("--B > 1 needs --input so that the data can be rehashed"));
        }
        if a.importance.is_some() {
            return Err(Failure::usage("--importance needs --input"));
        }
        let s = read_container(open(sp)?)?.to_dense();
        let yy = read_vector(a.y.as_ref().ok_or_else(|| Failure::usage("--y is required with --S"))?)?;
        check_len("y", &yy, s.nrows())?;
        let ll = a.l.map_or(s.ncols(), |v| v as usize);
        let r = fit_radius(a, a.p, a.q, ll)?;
        let f = est.fit(&s, &yy, &FitOptions { radius: r, intercept: None })?;
        pred = f.predict(&s)?;
        (report_variant, fits, y, n, width, l, radius) = (None, vec![f], yy, s.nrows(), s.ncols(), ll, r);
    } else {
        return Err(Failure::usage("either --S or --input is required"));
    }

    let logistic = a.estimator == "logistic";
    let mut report = FitReport {
        estimator: a.estimator.clone(),
        variant: report_variant,
        n,
        width,
        l,
        radius,
        fits,
        train_mspe: None,
        train_loss: None,
        mspe: None,
        excess_risk: None,
    };
    if logistic {
        report.train_loss = Some(logistic_loss(&pred, &y));
    } else {
        report.train_mspe = Some(mspe(&pred, &y)?);
    }
    if let Some(f) = &a.f_star {
        let f = read_vector(f)?;
        check_len("f_star", &f, n)?;
        if logistic {
            let probs: Vec<f64> = f.iter().map(|&v| sigmoid(v)).collect();
            report.excess_risk = Some(excess_risk_logistic(&pred, &f, &probs)?);
        } else {
            report.mspe = Some(mspe(&pred, &f)?);
        }
    }
    write_json(&a.out, &report)?;
    let mut artifacts = vec![a.out.clone()];
    artifacts.extend(a.importance.clone());
    Ok((EXIT_OK, artifacts, manifest_beside(&a.out)))
}

#[derive(Serialize)]
struct PlotRow<'a> {
    x: usize,
    y: f64,
    series: &'a str,
}

pub fn simulate(a: &SimulateArgs) -> CliResult<Outcome> {
    let text = std::fs::read_to_string(&a.scenario).map_err(|e| Failure::from(e).context(&a.scenario))?;
    let mut cfg = ScenarioConfig::parse(&text)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.clip |= a.clip;
    let methods = a.methods.iter().map(|m| Method::parse(m)).collect::<minwise::Result<Vec<_>>>()?;
    let opts = SweepOptions {
        methods,
        l_grid: a.l.iter().map(|&l| l as usize).collect(),
        bits: a.b,
        aggregate: a.aggregate as usize,
        reps: a.reps as usize,
        radius: a.radius,
        eta: a.eta,
    };
    let rows = run_sweep(&cfg, &opts)?;
    create_parent(&a.out)?;
    let mut w = csv::Writer::from_path(&a.out)?;
    for r in &rows {
        w.serialize(r)?;
        println!("{} {:>6} mspe {:.5} (se {:.5}) relative {:.3}", r.method, r.l, r.mspe, r.se, r.relative);
    }
    w.flush()?;
    let mut artifacts = vec![a.out.clone()];
    if let Some(path) = &a.plot {
        create_parent(path)?;
        let mut w = csv::Writer::from_path(path)?;
        for r in &rows {
            w.serialize(PlotRow { x: r.l, y: r.mspe, series: &r.method })?;
        }
        w.flush()?;
        artifacts.push(path.clone());
    }
    if let Some(path) = &a.export {
        let d = generate(&cfg, 0)?;
        create_parent(path)?;
        write_svmlight(File::create(path)?, &d.x, &d.y)?;
        artifacts.push(path.clone());
    }
    Ok((EXIT_OK, artifacts, manifest_beside(&a.out)))
}

/// Problem file for `verify --params`. Column indices in `rows` are 1-based.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyParams {
    input: Option<PathBuf>,
    rows: Option<Vec<Vec<usize>>>,
    p: Option<usize>,
    beta: Option<Vec<f64>>,
    #[serde(rename = "L")]
    l: Option<usize>,
    oracle: OracleKind,
    seed: Option<u64>,
    eta: Option<f64>,
}

fn load_design(path: &Path) -> CliResult<SparseMatrix> {
    Ok(read_svm(path, SvmlightOptions::default())?.x)
}

fn problem_from_params(a: &VerifyArgs, path: &Path) -> CliResult<VerifyProblem> {
    let vp: VerifyParams =
        serde_json::from_str(&std::fs::read_to_string(path).map_err(|e| Failure::from(e).context(path))?)?;
    let x = match (&vp.input, &vp.rows) {
        (Some(f), None) => load_design(&path.parent().unwrap_or(Path::new(".")).join(f))?,
        (None, Some(rows)) => {
            let p = vp.p.unwrap_or_else(|| rows.iter().flatten().copied().max().unwrap_or(0));
            if rows.iter().flatten().any(|&k| k == 0 || k > p) {
                return Err(Failure::format("`rows` holds 1-based column indices up to p"));
            }
            let supports: Vec<Vec<usize>> = rows.iter().map(|r| r.iter().map(|k| k - 1).collect()).collect();
            SparseMatrix::binary(p, &supports)?
        }
        _ => return Err(Failure::format("params need exactly one of `input` and `rows`")),
    };
    let beta = vp.beta.unwrap_or_else(|| vec![1.0; x.n_cols()]);
    check_len("beta", &beta, x.n_cols())?;
    Ok(VerifyProblem {
        x,
        beta,
        l: vp.l.unwrap_or(a.l as usize),
        kind: vp.oracle,
        seed: vp.seed.unwrap_or(a.seed),
        eta: vp.eta.unwrap_or(a.eta),
    })
}

fn problem_from_flags(a: &VerifyArgs) -> CliResult<VerifyProblem> {
    let kind = match a.oracle.as_str() {
        "random-sign" => OracleKind::RandomSign,
        "bbit-shuffled" => OracleKind::BbitShuffled { b: a.b },
        "series" => OracleKind::Series { a: a.a },
        "truncated" => OracleKind::Truncated { a: a.a },
        "geometric" => OracleKind::Geometric { m: a.m },
        "interaction" => return Err(Failure::usage("the interaction oracle needs --params with a `spec`")),
        o => return Err(Failure::usage(format!("unknown oracle `{o}`"))),
    };
    let x = load_design(a.input.as_ref().ok_or_else(|| Failure::usage("--input or --params is required"))?)?;
    let beta = match &a.beta {
        Some(f) => read_vector(f)?,
        None => vec![1.0; x.n_cols()],
    };
    check_len("beta", &beta, x.n_cols())?;
    Ok(VerifyProblem { x, beta, l: a.l as usize, kind, seed: a.seed, eta: a.eta })
}

pub fn verify(a: &VerifyArgs) -> CliResult<Outcome> {
    if a.reps < MIN_REPLICATIONS {
        return Err(Failure::usage(format!("R >= {MIN_REPLICATIONS} required, got {}", a.reps)));
    }
    let reg = VerificationRegistry::default();
    let names: Vec<&str> = a.target.iter().map(String::as_str).collect();
    for n in &names {
        reg.get(n)?;
    }
    let prob = match &a.params {
        Some(p) => problem_from_params(a, p)?,
        None => problem_from_flags(a)?,
    };
    let recs = reg.run_many(&names, &prob, a.reps)?;
    create_parent(&a.out)?;
    let mut w = BufWriter::new(File::create(&a.out)?);
    for r in &recs {
        let line = serde_json::to_string(r)?;
        writeln!(w, "{line}")?;
        println!("{line}");
    }
    w.flush()?;
    let code = if recs.iter().all(|r| r.pass) { EXIT_OK } else { EXIT_VERIFY_FAILED };
    Ok((code, vec![a.out.clone()], manifest_beside(&a.out)))
}
