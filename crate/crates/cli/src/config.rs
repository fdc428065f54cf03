use std::fmt;
use std::fs;
use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use biobench_core::Error;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

pub const WORKERS_ENV: &str = "BIOBENCH_WORKERS";

/// Config problems exit 1, everything that fails while running exits 2.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

/// Errors while reading user-supplied inputs count as configuration errors.
pub fn input<T>(r: Result<T, Error>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Config(e.to_string()))
}

pub fn require_seed(seed: Option<u64>) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::Config("--seed is required; runs never draw a clock seed".into()))
}

/// Parse TOML, falling back to JSON. Returns the raw tree too so callers can
/// check which keys were actually present.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<(T, Value), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|x| x == "json");
    let raw: Value = if is_json {
        serde_json::from_str(&text).map_err(|e| bad(path, e))?
    } else {
        match toml::from_str::<Value>(&text) {
            Ok(v) => v,
            Err(te) => serde_json::from_str(&text).map_err(|_| bad(path, te))?,
        }
    };
    let parsed = serde_json::from_value(raw.clone()).map_err(|e| bad(path, e))?;
    Ok((parsed, raw))
}

fn bad(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

/// `250ms`, `90s`, `10m`, `2h`, or a bare number of seconds.
pub fn parse_budget(s: &str) -> Result<Duration, CliError> {
    let s = s.trim();
    let split = s.find(|c: char| c.is_ascii_alphabetic()).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("bad budget `{s}`")))?;
    let secs = match unit {
        "ms" => v / 1e3,
        "" | "s" => v,
        "m" => v * 60.0,
        "h" => v * 3600.0,
        _ => return Err(CliError::Config(format!("bad budget unit in `{s}`"))),
    };
    Duration::try_from_secs_f64(secs).map_err(|_| CliError::Config(format!("bad budget `{s}`")))
}

/// Worker count: flag, then environment, then config.
pub fn resolve_workers(flag: Option<usize>, configured: usize) -> Result<usize, CliError> {
    if let Some(w) = flag {
        return Ok(w);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .ok()
            .filter(|&w: &usize| w > 0)
            .ok_or_else(|| {
                CliError::Config(format!("{WORKERS_ENV}=`{v}` is not a positive integer"))
            }),
        Err(_) => Ok(configured),
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

/// `manifest.json` beside the outputs: enough to re-run the command.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    argv: &[String],
    seeds: &[u64],
    config: &impl Serialize,
) -> Result<(), CliError> {
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "tool": "biobench",
        "command": command,
        "argv": argv,
        "seeds": seeds,
        "config": config,
        "versions": {
            "biobench": env!("CARGO_PKG_VERSION"),
            "results_schema": biobench_core::eval::RESULTS_SCHEMA_VERSION,
        },
        "created_unix": created,
    });
    let path = dir.join("manifest.json");
    let text =
        serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(&path, text + "\n")
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}
