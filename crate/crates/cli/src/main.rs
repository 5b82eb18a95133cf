//! `minwise`: hash sparse designs, fit on the compressed data, run simulation
//! sweeps and Monte Carlo checks of the oracle bounds.

mod commands;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use util::{CliResult, Failure, RunManifest, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "minwise", version, about = "Min-wise hashing regression for sparse designs")]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Compress an svmlight file into S (and optionally H and M).
    Hash(HashArgs),
    /// Fit an estimator on a compressed design, or hash and fit in one go.
    Fit(FitArgs),
    /// Replicated comparison of methods on a generated scenario.
    Simulate(SimulateArgs),
    /// Monte Carlo checks of the oracle coefficients against their bounds.
    Verify(VerifyArgs),
    /// Re-run a previous command from its manifest.
    Replay(ReplayArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Hash(_) => "hash",
            Command::Fit(_) => "fit",
            Command::Simulate(_) => "simulate",
            Command::Verify(_) => "verify",
            Command::Replay(_) => "replay",
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Command::Hash(a) => Some(a.seed),
            Command::Fit(a) => Some(a.seed),
            Command::Simulate(a) => a.seed,
            Command::Verify(a) => Some(a.seed),
            Command::Replay(_) => None,
        }
    }

    fn out_mut(&mut self) -> Option<&mut PathBuf> {
        match self {
            Command::Hash(a) => Some(&mut a.out),
            Command::Fit(a) => Some(&mut a.out),
            Command::Simulate(a) => Some(&mut a.out),
            Command::Verify(a) => Some(&mut a.out),
            Command::Replay(_) => None,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct HashArgs {
    /// svmlight input.
    #[arg(long)]
    pub input: PathBuf,
    /// bbit, bbit-shuffled, random-sign or random-projection.
    #[arg(long, default_value = "random-sign")]
    pub variant: String,
    /// Number of permutations; taken from --perm-file when given.
    #[arg(long = "L", value_parser = clap::value_parser!(u64).range(1..))]
    pub l: Option<u64>,
    #[arg(long = "b", default_value_t = 1)]
    pub b: u32,
    #[arg(long, env = "MINHASH_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Divide values by the largest magnitude instead of rejecting |v| > 1.
    #[arg(long)]
    pub rescale: bool,
    /// Number of columns, if larger than the largest index in the file.
    #[arg(long)]
    pub features: Option<usize>,
    /// Explicit permutations: L lines of p ranks in 1..=p.
    #[arg(long)]
    pub perm_file: Option<PathBuf>,
    /// Explicit signs: L lines of p values in {-1, 1}.
    #[arg(long)]
    pub signs_file: Option<PathBuf>,
    /// Explicit recoding maps for bbit-shuffled: L lines of p codes.
    #[arg(long)]
    pub shuffle_file: Option<PathBuf>,
    /// Also write H.csv and M.csv.
    #[arg(long)]
    pub emit_hm: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Compressed design written by `hash`.
    #[arg(long = "S", conflicts_with = "input")]
    pub s: Option<PathBuf>,
    /// Responses, one per line; defaults to the svmlight labels with --input.
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// svmlight input, hashed before fitting.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "random-sign")]
    pub variant: String,
    #[arg(long = "L", value_parser = clap::value_parser!(u64).range(1..))]
    pub l: Option<u64>,
    #[arg(long = "b", default_value_t = 1)]
    pub b: u32,
    #[arg(long, env = "MINHASH_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Number of aggregated hashings (needs --input).
    #[arg(long = "B", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub aggregate: u64,
    #[arg(long)]
    pub rescale: bool,
    /// ols, ridge or logistic.
    #[arg(long, default_value = "ols")]
    pub estimator: String,
    /// Norm constraint; otherwise derived from --eta, --beta-norm and --q.
    #[arg(long, conflicts_with_all = ["eta", "beta_norm"])]
    pub radius: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub beta_norm: Option<f64>,
    /// Row sparsity for the radius; defaults to the largest row count of --input.
    #[arg(long)]
    pub q: Option<usize>,
    /// Original column count for the radius when fitting from --S.
    #[arg(long)]
    pub p: Option<usize>,
    /// True mean, one per line, for an MSPE column.
    #[arg(long)]
    pub f_star: Option<PathBuf>,
    /// Write variable importances as CSV (random-sign, B = 1).
    #[arg(long)]
    pub importance: Option<PathBuf>,
    /// Output JSON file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Scenario file of key=value lines.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Comma-separated compressor+estimator pairs.
    #[arg(long, value_delimiter = ',', default_value = "random-sign+ols")]
    pub methods: Vec<String>,
    #[arg(long = "L", value_delimiter = ',', default_value = "64", value_parser = clap::value_parser!(u64).range(1..))]
    pub l: Vec<u64>,
    #[arg(long = "b", default_value_t = 1)]
    pub b: u32,
    #[arg(long = "B", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub aggregate: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// Overrides the scenario seed.
    #[arg(long, env = "MINHASH_SEED")]
    pub seed: Option<u64>,
    /// Divide non-binary designs by their largest magnitude.
    #[arg(long)]
    pub clip: bool,
    /// Results CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Tidy plot data: x = L, y = metric, series = method.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Export the first replication as svmlight.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    /// Comma-separated checks: unbiasedness, approx_error, concentration.
    #[arg(long, value_delimiter = ',', default_value = "unbiasedness,approx_error,concentration")]
    pub target: Vec<String>,
    /// JSON problem description; replaces the design flags below.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Binary or bounded svmlight design.
    #[arg(long, required_unless_present = "params")]
    pub input: Option<PathBuf>,
    /// Coefficients, one per line; all ones when absent.
    #[arg(long)]
    pub beta: Option<PathBuf>,
    /// random-sign, bbit-shuffled, series, truncated or geometric.
    #[arg(long, default_value = "random-sign")]
    pub oracle: String,
    #[arg(long = "b", default_value_t = 1)]
    pub b: u32,
    /// Exponent of the sparsity scaling for series and truncated.
    #[arg(long, default_value_t = 0.5)]
    pub a: f64,
    /// Truncation point for geometric weights.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long = "L", default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    pub l: u64,
    #[arg(long, env = "MINHASH_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// Monte Carlo replications (at least 1000).
    #[arg(long = "R", default_value_t = 2000)]
    pub reps: usize,
    /// JSON-lines report.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write to a different output path instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs a command and records its manifest. Returns the exit status.
fn execute(cmd: Command, threads: Option<usize>) -> CliResult<u8> {
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let (code, artifacts, manifest_path) = match &cmd {
        Command::Hash(a) => commands::hash(a)?,
        Command::Fit(a) => commands::fit(a)?,
        Command::Simulate(a) => commands::simulate(a)?,
        Command::Verify(a) => commands::verify(a)?,
        Command::Replay(a) => return replay(a, threads),
    };
    let manifest = RunManifest {
        command: cmd.name().into(),
        config: serde_json::to_value(&cmd)?,
        seed: cmd.seed(),
        threads,
        cwd: std::env::current_dir()?,
        artifacts,
        started_unix,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").into(),
    };
    util::write_json(&manifest_path, &manifest)?;
    Ok(code)
}

fn replay(a: &ReplayArgs, threads: Option<usize>) -> CliResult<u8> {
    let text = std::fs::read_to_string(&a.manifest)?;
    let m: RunManifest = serde_json::from_str(&text)?;
    let mut cmd: Command = serde_json::from_value(m.config)?;
    if matches!(cmd, Command::Replay(_)) {
        return Err(Failure::format("manifest records a replay"));
    }
    if let Some(out) = &a.out {
        let abs = std::path::absolute(out)?;
        if let Some(o) = cmd.out_mut() {
            *o = abs;
        }
    }
    std::env::set_current_dir(&m.cwd)?;
    execute(cmd, threads)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::from(EXIT_OK),
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
        }
    }
    match execute(cli.command, cli.threads) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
