//! Line-oriented `key = value` configuration files.
//!
//! Lines starting with `#` and blank lines are ignored. Keys may not
//! repeat. Values are plain strings; typed accessors parse on demand.
//! Axis values accept either a space-separated list (`0.5 1.0 1.5`) or
//! an inclusive range `lo:hi:count`.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(HarnessError::Config(format!(
                    "config line {line}: expected 'key = value', got '{trimmed}'"
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(HarnessError::Config(format!("config line {line}: empty key")));
            }
            if values.insert(key.clone(), value).is_some() {
                return Err(HarnessError::Config(format!(
                    "config line {line}: duplicate key '{key}'"
                )));
            }
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| HarnessError::Config(format!("missing config key '{key}'")))
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| HarnessError::Config(format!("key '{key}': invalid number '{v}'"))),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| HarnessError::Config(format!("key '{key}': invalid count '{v}'"))),
        }
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| HarnessError::Config(format!("key '{key}': invalid integer '{v}'"))),
        }
    }

    /// Axis: explicit list or inclusive `lo:hi:count` range.
    pub fn get_axis(&self, key: &str, default: &str) -> Result<Vec<f64>> {
        let spec = self.get(key).unwrap_or(default);
        parse_axis(spec)
            .map_err(|msg| HarnessError::Config(format!("key '{key}': {msg}")))
    }
}

pub fn parse_axis(spec: &str) -> std::result::Result<Vec<f64>, String> {
    let spec = spec.trim();
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range must be lo:hi:count, got '{spec}'"));
        }
        let lo: f64 = parts[0].parse().map_err(|_| format!("bad range start '{}'", parts[0]))?;
        let hi: f64 = parts[1].parse().map_err(|_| format!("bad range end '{}'", parts[1]))?;
        let count: usize = parts[2]
            .parse()
            .map_err(|_| format!("bad range count '{}'", parts[2]))?;
        if count < 2 {
            return Err("range needs at least 2 points".into());
        }
        let step = (hi - lo) / (count - 1) as f64;
        Ok((0..count).map(|k| lo + step * k as f64).collect())
    } else {
        let vals: std::result::Result<Vec<f64>, _> =
            spec.split_whitespace().map(str::parse::<f64>).collect();
        match vals {
            Ok(v) if !v.is_empty() => Ok(v),
            _ => Err(format!("expected numbers or lo:hi:count, got '{spec}'")),
        }
    }
}
