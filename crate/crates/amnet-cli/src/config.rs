//! Settings resolved as flag > environment > config file > default.

use std::path::{Path, PathBuf};
use std::time::Duration;

use amnet::solver::external::{solver_path, SOLVER_ENV};
use amnet::solver::{Backend, DEFAULT_TIMEOUT};
use anyhow::{bail, Context, Result};

pub const TIMEOUT_ENV: &str = "AMNET_TIMEOUT";

#[derive(Debug, Default)]
pub struct FileConfig {
    pub solver: Option<PathBuf>,
    pub timeout: Option<f64>,
    pub backend: Option<Backend>,
}

impl FileConfig {
    /// `key = value` lines: `solver`, `timeout` (seconds), `backend`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let table: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
        let mut cfg = FileConfig::default();
        for (key, value) in &table {
            match (key.as_str(), value) {
                ("solver", toml::Value::String(s)) => cfg.solver = Some(PathBuf::from(s)),
                ("timeout", toml::Value::Integer(t)) => cfg.timeout = Some(*t as f64),
                ("timeout", toml::Value::Float(t)) => cfg.timeout = Some(*t),
                ("backend", toml::Value::String(s)) => cfg.backend = Some(s.parse().map_err(anyhow::Error::msg)?),
                (k, _) => bail!("{}: unknown or mistyped key `{k}`", path.display()),
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub solver: Option<PathBuf>,
    pub timeout: Duration,
    pub backend: Backend,
}

fn seconds(s: f64) -> Result<Duration> {
    if !(s.is_finite() && s > 0.0) {
        bail!("timeout must be a positive number of seconds");
    }
    Ok(Duration::from_secs_f64(s))
}

pub fn resolve(
    flag_solver: Option<PathBuf>,
    flag_timeout: Option<f64>,
    file: Option<&Path>,
) -> Result<Settings> {
    let file = match file {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let env_timeout = || -> Result<Option<f64>> {
        match std::env::var(TIMEOUT_ENV) {
            Ok(s) => Ok(Some(s.trim().parse::<f64>().with_context(|| format!("{TIMEOUT_ENV}={s}"))?)),
            Err(_) => Ok(None),
        }
    };
    let timeout = match flag_timeout.map_or_else(env_timeout, |t| Ok(Some(t)))?.or(file.timeout) {
        Some(s) => seconds(s)?,
        None => DEFAULT_TIMEOUT,
    };
    let env_solver = std::env::var_os(SOLVER_ENV).filter(|s| !s.is_empty()).map(PathBuf::from);
    let solver = flag_solver.or(env_solver).or(file.solver).or_else(solver_path);
    Ok(Settings {
        solver,
        timeout,
        backend: file.backend.unwrap_or_default(),
    })
}
