//! Flat experiment configuration: `section.key = value` lines.
//!
//! One value per line; `#` starts a full-line comment; arrays are bracketed
//! comma lists (`constraint.radii = [0.5, 1.0, inf]`); strings may be bare
//! or double-quoted. Command-line flags override file keys. Every key is
//! checked against the known schema so typos fail loudly, and typed getters
//! report errors with the full field path.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;

use anyhow::Result;

/// Configuration or validation problem; mapped to exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn err<T>(message: impl Display) -> Result<T> {
    Err(ConfigError(message.to_string()).into())
}

/// Every key the tool understands, by section.
const KNOWN_KEYS: &[&str] = &[
    "seed",
    "out",
    "data.source",
    "data.csv_path",
    "data.n",
    "data.d",
    "data.classes",
    "data.separation",
    "data.standardize",
    "split.train",
    "split.val",
    "split.test",
    "net.hidden",
    "net.activation",
    "pretrain.learning_rate",
    "pretrain.batch_size",
    "pretrain.epochs",
    "pretrain.eval_every",
    "pretrain.lr_decay",
    "noise.kind",
    "noise.rate",
    "noise.record_path",
    "noise.heldout_fraction",
    "noise.aux_hidden",
    "noise.aux_learning_rate",
    "noise.aux_batch_size",
    "noise.aux_target_accuracy",
    "noise.aux_max_epochs",
    "train.mode",
    "train.init_snapshot",
    "train.learning_rate",
    "train.batch_size",
    "train.epochs",
    "train.eval_every",
    "train.lr_decay",
    "train.snapshot_every",
    "train.no_correction",
    "train.no_reweight",
    "train.no_regularization",
    "constraint.base_d",
    "constraint.gamma",
    "constraint.radii",
    "selflabel.enabled",
    "selflabel.temperature",
    "selflabel.reweight_start_epoch",
    "selflabel.reweight_start_step",
    "selflabel.correction_start_epoch",
    "selflabel.correction_start_step",
    "selflabel.correction_threshold",
    "diagnose.sigmas",
    "diagnose.samples",
    "diagnose.perturb_biases",
    "bound.eps",
    "bound.delta",
    "bound.c1",
    "bound.c2",
    "bound.b",
    "bound.d",
    "grid.base_d",
    "grid.gamma",
    "grid.tau",
    "grid.reweight_start_epoch",
    "grid.correction_start_epoch",
];

#[derive(Debug, Clone, Default)]
pub struct FlatConfig {
    entries: BTreeMap<String, String>,
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!(
                    "line {line_no}: expected `key = value`, got `{line}`"
                ));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return err(format!("line {line_no}: empty key"));
            }
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return err(format!("line {line_no}: unknown key `{key}`"));
            }
            let value = unquote(value.trim());
            if entries.insert(key.clone(), value).is_some() {
                return err(format!("line {line_no}: duplicate key `{key}`"));
            }
        }
        Ok(FlatConfig { entries })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError(format!("config file {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    /// Sets or overrides a key (used for flag overrides and grid points).
    pub fn set(&mut self, key: &str, value: impl Display) {
        debug_assert!(KNOWN_KEYS.contains(&key), "unknown key {key}");
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get_raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Serializes back to the flat text format, keys sorted.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.entries {
            let needs_quotes =
                value.is_empty() || value.starts_with(' ') || value.ends_with(' ');
            if needs_quotes {
                out.push_str(&format!("{key} = \"{value}\"\n"));
            } else {
                out.push_str(&format!("{key} = {value}\n"));
            }
        }
        out
    }

    pub fn require_str(&self, key: &str) -> Result<String> {
        match self.get_raw(key) {
            Some(v) => Ok(v.to_string()),
            None => err(format!("{key}: missing required key")),
        }
    }

    pub fn get_str_or(&self, key: &str, default: &str) -> String {
        self.get_raw(key).unwrap_or(default).to_string()
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get_raw(key).map(|v| parse_f64(key, v)).transpose()
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        match self.get_f64(key)? {
            Some(v) => Ok(v),
            None => err(format!("{key}: missing required key")),
        }
    }

    pub fn get_f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.get_f64(key)?.unwrap_or(default))
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.get_raw(key).map(|v| parse_usize(key, v)).transpose()
    }

    pub fn require_usize(&self, key: &str) -> Result<usize> {
        match self.get_usize(key)? {
            Some(v) => Ok(v),
            None => err(format!("{key}: missing required key")),
        }
    }

    pub fn get_usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.get_usize(key)?.unwrap_or(default))
    }

    pub fn get_u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get_raw(key) {
            Some(v) => v
                .parse::<u64>()
                .map_err(|_| ConfigError(format!("{key}: expected an integer, got `{v}`")).into()),
            None => Ok(default),
        }
    }

    pub fn get_bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get_raw(key) {
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(other) => err(format!("{key}: expected true or false, got `{other}`")),
            None => Ok(default),
        }
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get_raw(key) {
            Some(v) => parse_list(key, v)?
                .iter()
                .map(|item| parse_f64(key, item).map(Some))
                .collect::<Result<Option<Vec<_>>>>(),
            None => Ok(None),
        }
    }

    pub fn get_usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.get_raw(key) {
            Some(v) => parse_list(key, v)?
                .iter()
                .map(|item| parse_usize(key, item).map(Some))
                .collect::<Result<Option<Vec<_>>>>(),
            None => Ok(None),
        }
    }
}

fn unquote(value: &str) -> String {
    if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
        value[1..value.len() - 1].to_string()
    } else {
        value.to_string()
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    // `inf` expresses an unconstrained radius.
    let v = match value {
        "inf" | "+inf" => f64::INFINITY,
        other => other
            .parse::<f64>()
            .map_err(|_| ConfigError(format!("{key}: expected a number, got `{value}`")))?,
    };
    if v.is_nan() {
        return err(format!("{key}: NaN is not a valid value"));
    }
    Ok(v)
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| ConfigError(format!("{key}: expected a nonnegative integer, got `{value}`")).into())
}

fn parse_list(key: &str, value: &str) -> Result<Vec<String>> {
    let inner = value
        .strip_prefix('[')
        .and_then(|v| v.strip_suffix(']'))
        .ok_or_else(|| ConfigError(format!("{key}: expected a bracketed list, got `{value}`")))?;
    let inner = inner.trim();
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    Ok(inner.split(',').map(|s| s.trim().to_string()).collect())
}
