//! Line-oriented `key = value` files with optional `[section]` headers.
//!
//! A header prefixes the keys that follow it, so `[model]` followed by
//! `kind = gbm` yields the key `model.kind`. `#` starts a comment.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (String, usize)>,
    used: std::cell::RefCell<BTreeSet<String>>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {lineno}: unterminated section header")))?
                    .trim();
                if name.is_empty() || name.contains(char::is_whitespace) {
                    return Err(Error::Config(format!("line {lineno}: bad section name")));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {lineno}: expected `key = value`")))?;
            let k = k.trim();
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(Error::Config(format!("line {lineno}: bad key `{k}`")));
            }
            let key = if section.is_empty() {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            if entries.insert(key.clone(), (v.trim().to_string(), lineno)).is_some() {
                return Err(Error::Config(format!("line {lineno}: duplicate key `{key}`")));
            }
        }
        Ok(Self {
            entries,
            used: Default::default(),
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        let v = self.entries.get(key).map(|(v, _)| v.as_str());
        if v.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        v
    }

    /// Whether any key lives under `[section]`.
    pub fn has_section(&self, section: &str) -> bool {
        let p = format!("{section}.");
        self.entries.keys().any(|k| k.starts_with(&p))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parse_opt(key)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    pub fn parse_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<T>()
                        .map_err(|_| Error::Config(format!("`{key}`: cannot parse item `{s}`")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    /// Keys under `prefix.` whose remainder is a dotted list of 1-based
    /// integers, e.g. `lambda.1.2`.
    pub fn indexed(&self, prefix: &str, arity: usize) -> Result<Vec<(Vec<usize>, f64)>> {
        let p = format!("{prefix}.");
        let mut out = Vec::new();
        for key in self.entries.keys().filter(|k| k.starts_with(&p)) {
            let rest = &key[p.len()..];
            let idx: Vec<usize> = rest
                .split('.')
                .map(|s| s.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("`{key}`: bad index")))?;
            if idx.len() != arity || idx.iter().any(|&i| i == 0) {
                return Err(Error::Config(format!("`{key}`: expected {arity} 1-based indices")));
            }
            let value: f64 = self.require(key)?;
            out.push((idx.into_iter().map(|i| i - 1).collect(), value));
        }
        Ok(out)
    }

    /// Keys never read through this handle.
    pub fn unused(&self) -> Vec<String> {
        let used = self.used.borrow();
        self.entries
            .keys()
            .filter(|k| !used.contains(*k))
            .cloned()
            .collect()
    }

    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|(_, l)| *l)
    }
}
