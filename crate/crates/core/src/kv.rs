//! `key = value` line format shared by run configs and phantom specs.
//!
//! Blank lines and `#` comments are ignored. Keys may repeat; callers decide
//! what repetition means.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub(crate) fn parse(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected `key = value`, got `{line}`",
                n + 1
            )));
        };
        out.push(Entry {
            line: n + 1,
            key: k.trim().to_string(),
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

impl Entry {
    pub fn err(&self, what: impl std::fmt::Display) -> Error {
        Error::Config(format!("line {}: `{}`: {what}", self.line, self.key))
    }

    pub fn parse<T: std::str::FromStr>(&self) -> Result<T> {
        parse_value(&self.value).map_err(|e| self.err(e))
    }

    pub fn list<T: std::str::FromStr>(&self, n: usize) -> Result<Vec<T>> {
        parse_list(&self.value, n).map_err(|e| self.err(e))
    }
}

pub(crate) fn parse_value<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("cannot parse `{s}`"))
}

/// Comma-separated list of exactly `n` items (any length if `n == 0`).
pub(crate) fn parse_list<T: std::str::FromStr>(s: &str, n: usize) -> std::result::Result<Vec<T>, String> {
    let items = s
        .split(',')
        .map(parse_value)
        .collect::<std::result::Result<Vec<T>, _>>()?;
    if n != 0 && items.len() != n {
        return Err(format!("expected {n} comma-separated values, got {}", items.len()));
    }
    Ok(items)
}

pub(crate) fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.trim() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(format!("expected a boolean, got `{other}`")),
    }
}
