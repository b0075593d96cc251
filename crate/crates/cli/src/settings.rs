//! Run settings: built-in defaults, then a `key = value` config file, then flags.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::CliError;

/// One option of a subcommand. Every option is reachable both as `--key` and as a
/// config-file line `key = value`.
#[derive(Debug, Clone, Copy)]
pub struct OptSpec {
    pub key: &'static str,
    pub help: &'static str,
    pub default: Option<&'static str>,
    pub flag: bool,
}

pub const fn opt(key: &'static str, default: Option<&'static str>, help: &'static str) -> OptSpec {
    OptSpec { key, help, default, flag: false }
}

pub const fn flag(key: &'static str, help: &'static str) -> OptSpec {
    OptSpec { key, help, default: Some("false"), flag: true }
}

/// Keys shared by every run command.
pub const COMMON: &[OptSpec] = &[
    opt("out", Some("ricci-out"), "output directory"),
    opt("seed", Some("0"), "64-bit seed for every randomized suite"),
];

#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Invalid(format!("config line {}: expected `key = value`", i + 1)));
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CliError::Invalid(format!("config line {}: empty key", i + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

impl Settings {
    /// Merges defaults, file values and explicit flags. Unknown file keys are rejected.
    pub fn resolve(
        specs: &[&[OptSpec]],
        file: Option<&Path>,
        flags: BTreeMap<String, String>,
    ) -> Result<Self, CliError> {
        let known = |k: &str| specs.iter().flat_map(|s| s.iter()).any(|o| o.key == k);
        let mut values = BTreeMap::new();
        for o in specs.iter().flat_map(|s| s.iter()) {
            if let Some(d) = o.default {
                values.insert(o.key.to_string(), d.to_string());
            }
        }
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
            for (k, v) in parse_config(&text)? {
                if !known(&k) {
                    return Err(CliError::Invalid(format!("unknown config key `{k}`")));
                }
                values.insert(k, v);
            }
        }
        for (k, v) in flags {
            if !known(&k) {
                return Err(CliError::Invalid(format!("unknown option `{k}`")));
            }
            values.insert(k, v);
        }
        Ok(Self { values })
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn string(&self, key: &str) -> Result<&str, CliError> {
        self.raw(key).ok_or_else(|| CliError::Invalid(format!("missing value for `{key}`")))
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        let s = self.string(key)?;
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| CliError::Invalid(format!("`{key}`: expected a finite number, got `{s}`")))
    }

    pub fn positive(&self, key: &str) -> Result<f64, CliError> {
        let v = self.f64(key)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(CliError::Invalid(format!("`{key}` must be positive, got {v}")))
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        let s = self.string(key)?;
        s.parse().map_err(|_| CliError::Invalid(format!("`{key}`: expected a non-negative integer, got `{s}`")))
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        let s = self.string(key)?;
        s.parse().map_err(|_| CliError::Invalid(format!("`{key}`: expected a 64-bit unsigned integer, got `{s}`")))
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key).unwrap_or("false") {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(CliError::Invalid(format!("`{key}`: expected true/false, got `{other}`"))),
        }
    }

    /// Comma-separated numbers.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let s = self.string(key)?;
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::Invalid(format!("`{key}`: bad number `{}`", p.trim())))
            })
            .collect()
    }

    /// Comma-separated words.
    pub fn list(&self, key: &str) -> Vec<String> {
        self.raw(key)
            .map(|s| s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect())
            .unwrap_or_default()
    }
}
