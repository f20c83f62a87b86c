//! Flat `key=value` configuration files. Keys are long option names; dashes
//! and underscores are interchangeable. `#` starts a comment.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-").to_ascii_lowercase()
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected key=value, got {line:?}", no + 1);
            };
            if values.insert(normalize(key), value.trim().to_string()).is_some() {
                bail!("line {}: key {:?} given twice", no + 1, key.trim());
            }
        }
        Ok(Self {
            values,
            used: RefCell::default(),
        })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        let key = normalize(key);
        let value = self.values.get(&key)?;
        self.used.borrow_mut().insert(key);
        Some(value)
    }

    /// Flag value if given, else the file's value, else `None`.
    pub fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            self.raw(key);
            return Ok(flag);
        }
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow::anyhow!("config key {key}: {e}")))
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    pub fn get_enum<T: ValueEnum>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        if flag.is_some() {
            self.raw(key);
        }
        match (flag, self.raw(key)) {
            (Some(v), _) => Ok(v),
            (None, Some(v)) => T::from_str(v, true).map_err(|e| anyhow::anyhow!("config key {key}: {e}")),
            (None, None) => Ok(default),
        }
    }

    pub fn get_list<T: FromStr>(&self, flag: Option<Vec<T>>, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            self.raw(key);
            return Ok(flag);
        }
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|item| {
                        item.trim()
                            .parse::<T>()
                            .map_err(|e| anyhow::anyhow!("config key {key}: {item:?}: {e}"))
                    })
                    .collect::<Result<Vec<T>>>()
            })
            .transpose()
    }

    pub fn get_flag(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.get::<bool>(None, key)?.unwrap_or(false))
    }

    /// Fails on keys no option consumed, which are usually typos.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&String> = self.values.keys().filter(|k| !used.contains(*k)).collect();
        if !unknown.is_empty() {
            bail!("unknown config keys: {unknown:?}");
        }
        Ok(())
    }
}
