//! Flat `key = value` configuration files.
//!
//! One pair per line; `#` starts a comment; blank lines are ignored. Keys are
//! unique. Consumers take keys out one by one and then call [`KvConfig::finish`],
//! which rejects anything left over.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Result, SmrdError};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SmrdError::Config(format!("line {}: expected 'key = value', got '{raw}'", lineno + 1))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(SmrdError::Config(format!("line {}: empty key", lineno + 1)));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(SmrdError::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Removes and parses `key`, if present.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| SmrdError::Config(format!("key '{key}': cannot parse '{v}': {e}"))),
        }
    }

    pub fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.take(key)?.unwrap_or(default))
    }

    /// Errors if any key was never taken.
    pub fn finish(self) -> Result<()> {
        if self.entries.is_empty() {
            Ok(())
        } else {
            let keys: Vec<_> = self.entries.keys().cloned().collect();
            Err(SmrdError::Config(format!("unknown keys: {}", keys.join(", "))))
        }
    }

    /// Serializes with keys in sorted order.
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let mut kv = KvConfig::parse("# header\n\nmask.accel = 4  # trailing\nnoise.sigma=0.01\n").unwrap();
        assert_eq!(kv.take::<f64>("mask.accel").unwrap(), Some(4.0));
        assert_eq!(kv.take_or("noise.sigma", 0.0).unwrap(), 0.01);
        assert_eq!(kv.take_or("seed", 7u64).unwrap(), 7);
        kv.finish().unwrap();
    }

    #[test]
    fn rejects_malformed_duplicate_and_unknown() {
        assert!(KvConfig::parse("no equals sign").is_err());
        assert!(KvConfig::parse("a = 1\na = 2").is_err());
        assert!(KvConfig::parse(" = 2").is_err());
        let kv = KvConfig::parse("mystery = 1").unwrap();
        assert!(matches!(kv.finish(), Err(SmrdError::Config(_))));
        let mut kv = KvConfig::parse("n = abc").unwrap();
        assert!(kv.take::<usize>("n").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut kv = KvConfig::new();
        kv.set("b", 2.5);
        kv.set("a", "x");
        let text = kv.to_text();
        assert_eq!(text, "a = x\nb = 2.5\n");
        assert_eq!(KvConfig::parse(&text).unwrap(), kv);
    }
}
