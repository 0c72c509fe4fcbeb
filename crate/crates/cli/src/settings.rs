//! Resolved key=value settings for one command run.
//!
//! Precedence is command-line flags, then a `--config` file, then built-in
//! defaults. Keys use snake_case (`--min-hol` is `min_hol`).

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

pub const CONFIG_FORMAT: &str = "puffscan-config/1";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn from_defaults(defaults: &[(&str, &str)]) -> Self {
        Self {
            values: defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &String)> {
        self.values.iter()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    /// Overrides known keys; an unknown key is a usage error.
    pub fn merge(&mut self, other: BTreeMap<String, String>, source: &str) -> Result<(), CliError> {
        for (k, v) in other {
            if !self.values.contains_key(&k) {
                return Err(CliError::usage(format!("{source}: unknown setting `{k}`")));
            }
            self.values.insert(k, v);
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn get<T>(&self, key: &str) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|e| CliError::usage(format!("invalid value `{raw}` for `{key}`: {e}")))
    }

    pub fn list<T>(&self, key: &str) -> Result<Vec<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.raw(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|e| CliError::usage(format!("invalid item `{s}` in `{key}`: {e}")))
            })
            .collect()
    }

    /// Required path setting.
    pub fn path(&self, key: &str) -> Result<PathBuf, CliError> {
        match self.raw(key) {
            "" => Err(CliError::usage(format!("missing required setting `{key}`"))),
            p => Ok(PathBuf::from(p)),
        }
    }

    /// Fills an empty path setting with `base` plus `suffix`.
    pub fn derive_path(&mut self, key: &str, base_key: &str, suffix: &str) -> Result<(), CliError> {
        if self.raw(key).is_empty() {
            let base = self.path(base_key)?;
            self.set(key, format!("{}{suffix}", base.display()));
        }
        Ok(())
    }
}

/// Parses a config file: optional `format=` line, `#` comments, `key=value` lines.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected key=value", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k == "format" {
            if v != CONFIG_FORMAT {
                return Err(CliError::usage(format!("unsupported config format `{v}`")));
            }
            continue;
        }
        out.insert(k.replace('-', "_"), v.to_string());
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::MissingFile(path.display().to_string()),
        _ => CliError::Io(format!("{}: {e}", path.display())),
    })?;
    parse_config(&text)
}
