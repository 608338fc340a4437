//! Key-value config files and flag > file > default resolution.
//!
//! File format: one `key = value` per line, `#` starts a comment. Keys are the
//! long flag names without dashes (`psi-max`, `psi_max` and `PSI_MAX` are the same key).

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Every key any subcommand understands. Anything else in a config file is a typo.
pub const KNOWN_KEYS: &[&str] = &[
    "a",
    "alpha",
    "bfun",
    "constraint-tol",
    "gamma",
    "grid-max",
    "grid-step",
    "kind",
    "knots",
    "lipschitz",
    "log",
    "max-iter",
    "mc-draws",
    "n",
    "n-values",
    "out",
    "psi-max",
    "q",
    "seed",
    "spread",
    "step",
    "tau",
    "tol",
    "w",
    "x-max",
    "x-min",
];

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::usage(format!("config line {}: expected key = value, got '{raw}'", lineno + 1)));
        };
        let key = normalize(key);
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(CliError::usage(format!("config line {}: unknown key '{key}'", lineno + 1)));
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::usage(format!("config line {}: duplicate key '{key}'", lineno + 1)));
        }
    }
    Ok(out)
}

/// Resolves settings for one run and records the effective value of each.
#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    effective: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", p.display())))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        Ok(Settings { file, effective: BTreeMap::new() })
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = self.lookup(key, flag)?.unwrap_or(default);
        self.effective.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Flag, then file; `None` if neither sets `key`. Nothing is recorded.
    pub fn lookup<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(text) => text
                .parse()
                .map(Some)
                .map_err(|e| CliError::usage(format!("config key '{key}': cannot parse '{text}': {e}"))),
            None => Ok(None),
        }
    }

    /// Like `get`, but a missing value is a usage error.
    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = self
            .lookup(key, flag)?
            .ok_or_else(|| CliError::usage(format!("--{key} is required (flag or config key)")))?;
        self.effective.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Records a value that was derived rather than read, e.g. alpha taken from a b-function file.
    pub fn record(&mut self, key: &str, value: impl Display) {
        self.effective.insert(key.to_string(), value.to_string());
    }

    /// Comma-separated list, e.g. `n-values = 10,50,200`.
    pub fn get_list<T>(&mut self, key: &str, flag: Option<String>, default: &[T]) -> Result<Vec<T>, CliError>
    where
        T: FromStr + Display + Clone,
        T::Err: Display,
    {
        let text = flag.or_else(|| self.file.get(key).cloned());
        let values = match text {
            Some(text) => text
                .split(',')
                .map(|s| s.trim().parse::<T>().map_err(|e| CliError::usage(format!("'{key}': cannot parse '{s}': {e}"))))
                .collect::<Result<Vec<T>, _>>()?,
            None => default.to_vec(),
        };
        if values.is_empty() {
            return Err(CliError::usage(format!("'{key}' must not be empty")));
        }
        let joined: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        self.effective.insert(key.to_string(), joined.join(","));
        Ok(values)
    }

    pub fn effective(&self) -> &BTreeMap<String, String> {
        &self.effective
    }
}
