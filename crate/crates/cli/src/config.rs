//! Flat `key=value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. List values are
//! comma separated. Command-line flags take precedence over file values.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key=value", k + 1))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Config::default()),
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                Self::parse(&text)
            }
        }
    }

    /// Rejects keys outside `known`, so typos do not pass silently.
    pub fn check_keys(&self, known: &[&str]) -> CliResult<()> {
        match self.values.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(CliError::Usage(format!(
                "unknown config key {k:?} (known: {})",
                known.join(", ")
            ))),
            None => Ok(()),
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|e| CliError::Usage(format!("config key {key}: {e}")))
            })
            .transpose()
    }

    /// The flag if given, else the config value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }

    pub fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    /// List-valued variant of [`Config::pick`].
    pub fn pick_list<T: FromStr + Clone>(
        &self,
        flag: &[T],
        key: &str,
        default: &[T],
    ) -> CliResult<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        if !flag.is_empty() {
            return Ok(flag.to_vec());
        }
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some(raw) => raw
                .split(',')
                .map(|item| {
                    item.trim()
                        .parse()
                        .map_err(|e| CliError::Usage(format!("config key {key}: {e}")))
                })
                .collect(),
        }
    }
}
