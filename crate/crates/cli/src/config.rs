//! `key = value` configuration files and flag resolution.
//!
//! Precedence: built-in defaults, then the config file, then command-line flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use rds_core::{Error, Result};

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}

/// Parsed config file plus the record of every resolved setting.
#[derive(Debug, Default)]
pub struct Resolver {
    file: BTreeMap<String, String>,
    used: Vec<String>,
    resolved: Vec<(String, String)>,
}

impl Resolver {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Resolver::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Resolver {
            file: parse(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?,
            ..Resolver::default()
        })
    }

    /// Flag value, else config value, else `default`.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = self.lookup(key, flag)?.unwrap_or(default);
        self.resolved.push((key.to_string(), value.to_string()));
        Ok(value)
    }

    /// Like [`Resolver::get`] but kept out of the header, for settings that
    /// do not change results (such as the output directory).
    pub fn get_unrecorded<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.lookup(key, flag)?.unwrap_or(default))
    }

    /// Like [`Resolver::get`] without a default; absent values are recorded as empty.
    pub fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = self.lookup(key, flag)?;
        let shown = value.as_ref().map(|v| v.to_string()).unwrap_or_default();
        self.resolved.push((key.to_string(), shown));
        Ok(value)
    }

    /// Comma-separated list.
    pub fn get_list<T>(&mut self, key: &str, flag: Option<String>, default: &str) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.get(key, flag, default.to_string())?;
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse::<T>()
                    .map_err(|e| invalid(format!("{key}: cannot parse '{}': {e}", s.trim())))
            })
            .collect()
    }

    fn lookup<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.used.push(key.to_string());
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| invalid(format!("config key {key}: cannot parse '{raw}': {e}"))),
            None => Ok(None),
        }
    }

    /// Fails when the config file holds keys this command never asked for.
    pub fn finish(&self) -> Result<()> {
        let unknown: Vec<&str> = self
            .file
            .keys()
            .filter(|k| !self.used.contains(k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(invalid(format!("unknown config keys for this command: {}", unknown.join(", "))))
        }
    }

    /// `key=value` header lines for every resolved setting.
    pub fn header(&self, command: &str, timestamp: bool) -> Vec<String> {
        let mut lines = vec![format!("command={command}")];
        lines.extend(self.resolved.iter().map(|(k, v)| format!("{k}={v}")));
        if timestamp {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
            lines.push(format!("timestamp={secs}"));
        }
        lines
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse(text: &str) -> std::result::Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(format!("line {}: duplicate key {key}", i + 1));
        }
    }
    Ok(out)
}
