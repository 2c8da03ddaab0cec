//! Merging of command-line flags over an optional config file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use par_core::io::{read_text, FlatConfig};

use crate::error::CliError;

/// Resolved settings for one command. Every value consulted is recorded so the
/// manifest and `config.txt` carry the full configuration.
pub struct Settings {
    file: FlatConfig,
    pub resolved: BTreeMap<String, String>,
}

impl Settings {
    /// Loads `path` if given and rejects keys outside `allowed`.
    pub fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => {
                FlatConfig::parse(&read_text(p)?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
            }
            None => FlatConfig::default(),
        };
        if let Some(k) = file.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(CliError::Usage(format!(
                "unknown config key `{k}` (this command accepts: {})",
                allowed.join(", ")
            )));
        }
        Ok(Self {
            file,
            resolved: BTreeMap::new(),
        })
    }

    pub fn opt<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError> {
        let value = match flag {
            Some(v) => Some(v),
            None => self.file.get(key).map_err(|e| CliError::Usage(e.to_string()))?,
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    pub fn or<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError> {
        let v = self.opt(key, flag)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    pub fn required<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError> {
        self.opt(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("`--{key}` is required (flag or config key)")))
    }

    /// Comma-separated reals.
    pub fn list(&mut self, key: &str, flag: Option<Vec<f64>>) -> Result<Option<Vec<f64>>, CliError> {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.entries.get(key) {
                Some(text) => Some(parse_list(key, text)?),
                None => None,
            },
        };
        if let Some(v) = &value {
            let text = v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
            self.resolved.insert(key.to_string(), text);
        }
        Ok(value)
    }

    pub fn config_text(&self) -> String {
        FlatConfig {
            entries: self.resolved.clone(),
        }
        .render()
    }
}

fn parse_list(key: &str, text: &str) -> Result<Vec<f64>, CliError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("config key `{key}`: `{v}` is not a number")))
        })
        .collect()
}
