//! `key = value` settings file. Keys are long flag names; `-` and `_` are interchangeable.
//! Flags given on the command line take precedence.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{Context, Result};

use crate::UsageError;

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

fn canonical(key: &str) -> String {
    key.trim().replace('_', "-").to_ascii_lowercase()
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
            values.insert(canonical(k), v.trim().to_string());
        }
        Ok(Self { values })
    }

    /// Command-line value if given, else the config value, else `default`.
    pub fn resolve<T: FromStr>(&self, key: &str, cli: Option<T>, default: T) -> Result<T> {
        if let Some(v) = cli {
            return Ok(v);
        }
        match self.values.get(&canonical(key)) {
            Some(s) => s.parse().map_err(|_| UsageError(format!("config: bad value '{s}' for '{key}'")).into()),
            None => Ok(default),
        }
    }

    pub fn resolve_opt<T: FromStr>(&self, key: &str, cli: Option<T>) -> Result<Option<T>> {
        if cli.is_some() {
            return Ok(cli);
        }
        match self.values.get(&canonical(key)) {
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| UsageError(format!("config: bad value '{s}' for '{key}'")).into()),
            None => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let c = ConfigFile::parse("# comment\nbatch_size = 4\nlearn-rate=0.01  # trailing\n").unwrap();
        assert_eq!(c.resolve("batch-size", None, 10usize).unwrap(), 4);
        assert_eq!(c.resolve("batch-size", Some(7usize), 10).unwrap(), 7);
        assert_eq!(c.resolve("learn-rate", None, 1e-3).unwrap(), 0.01);
        assert_eq!(c.resolve("epochs", None, 3usize).unwrap(), 3);
        assert!(c.resolve::<usize>("learn-rate", None, 1).is_err());
        assert!(ConfigFile::parse("novalue\n").is_err());
    }
}
