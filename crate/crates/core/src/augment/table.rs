//! Data-defined predicate tables (`.tsv`).
//!
//! ```text
//! #default 0
//! car	automobile	1
//! car	wheel	0.6
//! ```
//!
//! Each line holds `arity` keys followed by a truth degree in `[0, 1]`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("{name}:{line}: {message}")]
    Syntax {
        name: String,
        line: usize,
        message: String,
    },
    #[error("{name}:{line}: degree {value} is outside [0, 1]")]
    DegreeOutOfRange { name: String, line: usize, value: f64 },
    #[error("{name}: {source}")]
    Io {
        name: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalPredicateTable {
    pub name: String,
    pub arity: usize,
    entries: HashMap<Vec<String>, f64>,
    pub default: f64,
}

impl ExternalPredicateTable {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        ExternalPredicateTable {
            name: name.into(),
            arity,
            entries: HashMap::new(),
            default: 0.0,
        }
    }

    pub fn with_default(mut self, default: f64) -> Self {
        assert!((0.0..=1.0).contains(&default), "default degree must lie in [0, 1]");
        self.default = default;
        self
    }

    /// Insert or overwrite an entry. Panics on a wrong key count or a degree outside `[0, 1]`.
    pub fn insert<S: Into<String>>(&mut self, keys: impl IntoIterator<Item = S>, degree: f64) {
        let keys: Vec<String> = keys.into_iter().map(Into::into).collect();
        assert_eq!(keys.len(), self.arity, "table `{}` has arity {}", self.name, self.arity);
        assert!((0.0..=1.0).contains(&degree), "degree {degree} is outside [0, 1]");
        self.entries.insert(keys, degree);
    }

    pub fn remove(&mut self, keys: &[String]) -> Option<f64> {
        self.entries.remove(keys)
    }

    pub fn degree<S: AsRef<str>>(&self, keys: &[S]) -> f64 {
        let k: Vec<String> = keys.iter().map(|s| s.as_ref().to_string()).collect();
        self.entries.get(&k).copied().unwrap_or(self.default)
    }

    pub fn contains<S: AsRef<str>>(&self, keys: &[S]) -> bool {
        let k: Vec<String> = keys.iter().map(|s| s.as_ref().to_string()).collect();
        self.entries.contains_key(&k)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries sorted by key, for stable output.
    pub fn entries(&self) -> Vec<(&[String], f64)> {
        let mut v: Vec<_> = self.entries.iter().map(|(k, d)| (k.as_slice(), *d)).collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }

    /// Parse a table. When `arity` is `None` it is taken from the first entry.
    pub fn parse(name: &str, text: &str, arity: Option<usize>) -> Result<Self, TableError> {
        let syntax = |line: usize, message: String| TableError::Syntax {
            name: name.to_string(),
            line,
            message,
        };
        let mut table = ExternalPredicateTable::new(name, arity.unwrap_or(0));
        let mut arity = arity;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("default") {
                    let value: f64 = v
                        .trim()
                        .parse()
                        .map_err(|_| syntax(line, format!("bad default `{}`", v.trim())))?;
                    if !(0.0..=1.0).contains(&value) {
                        return Err(TableError::DegreeOutOfRange {
                            name: name.to_string(),
                            line,
                            value,
                        });
                    }
                    table.default = value;
                }
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
            if fields.len() < 2 {
                return Err(syntax(line, "expected keys followed by a degree".into()));
            }
            let k = fields.len() - 1;
            match arity {
                None => {
                    arity = Some(k);
                    table.arity = k;
                }
                Some(a) if a != k => {
                    return Err(syntax(line, format!("expected {a} key(s), found {k}")));
                }
                _ => {}
            }
            let value: f64 = fields[k]
                .parse()
                .map_err(|_| syntax(line, format!("bad degree `{}`", fields[k])))?;
            if !(0.0..=1.0).contains(&value) {
                return Err(TableError::DegreeOutOfRange {
                    name: name.to_string(),
                    line,
                    value,
                });
            }
            table
                .entries
                .insert(fields[..k].iter().map(|s| s.to_string()).collect(), value);
        }
        Ok(table)
    }

    pub fn load(path: &Path, name: &str, arity: Option<usize>) -> Result<Self, TableError> {
        let text = std::fs::read_to_string(path).map_err(|source| TableError::Io {
            name: name.to_string(),
            source,
        })?;
        Self::parse(name, &text, arity)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("#default {}\n", self.default);
        for (keys, d) in self.entries() {
            let _ = writeln!(out, "{}\t{d}", keys.join("\t"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_lookup() {
        let t = ExternalPredicateTable::parse("k", "#default 0.1\na\tb\t1\na\tc\t0.5\n", None).unwrap();
        assert_eq!(t.arity, 2);
        assert_eq!(t.degree(&["a", "b"]), 1.0);
        assert_eq!(t.degree(&["a", "c"]), 0.5);
        assert_eq!(t.degree(&["b", "a"]), 0.1);
        let back = ExternalPredicateTable::parse("k", &t.to_tsv(), Some(2)).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(matches!(
            ExternalPredicateTable::parse("k", "a\tb\t1.5\n", None),
            Err(TableError::DegreeOutOfRange { line: 1, .. })
        ));
        assert!(matches!(
            ExternalPredicateTable::parse("k", "a\tb\t1\nc\t1\n", None),
            Err(TableError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            ExternalPredicateTable::parse("k", "a\tb\tx\n", Some(2)),
            Err(TableError::Syntax { .. })
        ));
    }
}
