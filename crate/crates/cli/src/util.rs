use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Exit statuses.
pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_INCOMPATIBLE: u8 = 2;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_FORMAT: u8 = 65;
pub const EXIT_SOFTWARE: u8 = 70;
pub const EXIT_IO: u8 = 74;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, msg: msg.into() }
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Self { code: EXIT_FORMAT, msg: msg.into() }
    }

    pub fn context(self, path: &Path) -> Self {
        Self { code: self.code, msg: format!("{}: {}", path.display(), self.msg) }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<minwise::Error> for Failure {
    fn from(e: minwise::Error) -> Self {
        use minwise::Error::*;
        let code = match &e {
            Parse { .. } | NoRows | Format(_) | Shape(_) => EXIT_FORMAT,
            Incompatible(_) => EXIT_INCOMPATIBLE,
            InvalidParam(_) => EXIT_USAGE,
            Numerical(_) => EXIT_SOFTWARE,
            Io(_) => EXIT_IO,
        };
        Self { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self { code: EXIT_IO, msg: e.to_string() }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Self { code: EXIT_IO, msg: e.to_string() }
        } else {
            Self::format(e.to_string())
        }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self { code: EXIT_IO, msg: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Numbers separated by whitespace or commas, one record per line. Blank lines and `#` comments are skipped.
pub fn read_table<T: FromStr>(path: &Path) -> CliResult<Vec<Vec<T>>> {
    let text = fs::read_to_string(path).map_err(|e| Failure::from(e).context(path))?;
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<T>()
                    .map_err(|_| Failure::format(format!("{}: line {}: bad value `{t}`", path.display(), ln + 1)))
            })
            .collect::<CliResult<Vec<T>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// A single column of numbers, or a single row.
pub fn read_vector(path: &Path) -> CliResult<Vec<f64>> {
    let rows = read_table::<f64>(path)?;
    if rows.len() == 1 || rows.iter().all(|r| r.len() == 1) {
        Ok(rows.concat())
    } else {
        Err(Failure::format(format!("{}: expected one value per line", path.display())))
    }
}

pub fn create_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    create_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Written next to the outputs of every run; `replay` re-executes `config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// The parsed arguments with every default filled in.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    /// Working directory that relative paths in `config` refer to.
    pub cwd: PathBuf,
    pub artifacts: Vec<PathBuf>,
    pub started_unix: u64,
    pub wall_clock_secs: f64,
    pub version: String,
}
