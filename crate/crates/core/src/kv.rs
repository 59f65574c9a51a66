//! Flat key-value documents with dotted sections.
//!
//! ```text
//! # comment
//! model = flat
//! time.t_end = 1.0
//! [initial]
//! x = 0, 0        # same as initial.x
//! ```
//!
//! Lists are comma or whitespace separated. Every key must be consumed by the
//! reader; leftovers are reported by [`KvDocument::finish`].

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: `{}`: {}", self.field, self.message),
            None => write!(f, "`{}`: {}", self.field, self.message),
        }
    }
}

impl ConfigError {
    pub fn new(line: Option<usize>, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            line,
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    raw: String,
    used: bool,
}

#[derive(Debug, Clone, Default)]
pub struct KvDocument {
    entries: BTreeMap<String, Entry>,
}

impl KvDocument {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (n, raw_line) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = strip_comment(raw_line).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| {
                    ConfigError::new(Some(line_no), line, "unterminated section header")
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::new(Some(line_no), line, "expected `key = value`")
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(ConfigError::new(Some(line_no), key, "malformed key"));
            }
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            if entries.contains_key(&full) {
                return Err(ConfigError::new(Some(line_no), full, "duplicate key"));
            }
            entries.insert(
                full,
                Entry {
                    line: line_no,
                    raw: value.trim().to_string(),
                    used: false,
                },
            );
        }
        Ok(Self { entries })
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Keys beginning with `prefix`, in sorted order.
    pub fn keys_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.entries
            .keys()
            .filter(|k| k.starts_with(prefix))
            .cloned()
            .collect()
    }

    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    fn take_raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.raw.clone())
        })
    }

    pub fn take_str(&mut self, key: &str) -> Option<String> {
        self.take_raw(key).map(|(_, raw)| unquote(&raw).to_string())
    }

    pub fn take_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.take_raw(key) {
            None => Ok(None),
            Some((line, raw)) => parse_f64(&raw)
                .map(Some)
                .ok_or_else(|| ConfigError::new(Some(line), key, format!("expected a number, found `{raw}`"))),
        }
    }

    pub fn take_usize(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.take_raw(key) {
            None => Ok(None),
            Some((line, raw)) => raw.parse::<usize>().map(Some).map_err(|_| {
                ConfigError::new(Some(line), key, format!("expected a non-negative integer, found `{raw}`"))
            }),
        }
    }

    pub fn take_u64(&mut self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.take_raw(key) {
            None => Ok(None),
            Some((line, raw)) => raw.parse::<u64>().map(Some).map_err(|_| {
                ConfigError::new(Some(line), key, format!("expected an unsigned integer, found `{raw}`"))
            }),
        }
    }

    pub fn take_bool(&mut self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.take_raw(key) {
            None => Ok(None),
            Some((line, raw)) => match raw.as_str() {
                "true" | "yes" | "1" => Ok(Some(true)),
                "false" | "no" | "0" => Ok(Some(false)),
                _ => Err(ConfigError::new(Some(line), key, format!("expected a boolean, found `{raw}`"))),
            },
        }
    }

    pub fn take_list(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.take_raw(key) {
            None => Ok(None),
            Some((line, raw)) => parse_list(&raw).map(Some).ok_or_else(|| {
                ConfigError::new(Some(line), key, format!("expected a list of numbers, found `{raw}`"))
            }),
        }
    }

    pub fn take_usize_list(&mut self, key: &str) -> Result<Option<Vec<usize>>, ConfigError> {
        let line = self.line_of(key);
        match self.take_list(key)? {
            None => Ok(None),
            Some(values) => values
                .into_iter()
                .map(|v| {
                    if v >= 0.0 && v.fract() == 0.0 {
                        Ok(v as usize)
                    } else {
                        Err(ConfigError::new(line, key, "expected a list of non-negative integers"))
                    }
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    /// Fails on the first key (in line order) nobody consumed.
    pub fn finish(&self) -> Result<(), ConfigError> {
        let leftover = self
            .entries
            .iter()
            .filter(|(_, e)| !e.used)
            .min_by_key(|(_, e)| e.line);
        match leftover {
            Some((k, e)) => Err(ConfigError::new(Some(e.line), k.clone(), "unknown key")),
            None => Ok(()),
        }
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(raw: &str) -> &str {
    raw.strip_prefix('"')
        .and_then(|r| r.strip_suffix('"'))
        .unwrap_or(raw)
}

fn parse_f64(raw: &str) -> Option<f64> {
    let v = match raw.trim() {
        "pi" => std::f64::consts::PI,
        "-pi" => -std::f64::consts::PI,
        s => s.parse::<f64>().ok()?,
    };
    Some(v)
}

fn parse_list(raw: &str) -> Option<Vec<f64>> {
    let raw = raw.trim();
    let raw = raw
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .unwrap_or(raw);
    raw.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(parse_f64)
        .collect()
}
