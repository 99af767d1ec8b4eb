//! `steklov-report v1`: one `key=value` per line after the header.
//!
//! Key hierarchy:
//!
//! | prefix | content |
//! |---|---|
//! | `config.*` | full config echo |
//! | `mesh.*` | node, triangle and boundary-edge counts, max edge, boundary length |
//! | `spectrum.*` | `k`, `mu.<i>`, residual and orthogonality checks |
//! | `audit.<condition>.*` | `verdict`, `witness`, `note` |
//! | `solution.<i>.*` | one block per finder run, see [`SOLUTION_KEYS`] |
//! | `distance.<i>.<j>` | boundary-norm distance between solutions |
//! | `probe.*` | geometry probe rows |
//! | `summary.*` | scenario-level checks |
//! | `artifacts.*` | sidecar file names, relative to the report |
//! | `timing.*` | wall-clock seconds; excluded from comparisons |
//! | `status` | `ok` or `incomplete` |

use std::fmt::Display;
use std::path::Path;

use crate::error::{Error, Result};

pub const REPORT_HEADER: &str = "steklov-report v1";
const MODULE: &str = "cli";

/// Ordered key-value report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    entries: Vec<(String, String)>,
}

impl RunReport {
    pub fn new() -> Self {
        RunReport::default()
    }

    /// Appends or overwrites `key`.
    pub fn set(&mut self, key: impl Into<String>, value: impl Display) {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    /// Floats in shortest round-trip form.
    pub fn set_f64(&mut self, key: impl Into<String>, value: f64) {
        self.set(key, format!("{value:?}"));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::param(MODULE, format!("report has no `{key}`")))
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        let v = self.require(key)?;
        v.parse().map_err(|_| Error::validation(MODULE, format!("`{key}` is not a number: `{v}`")))
    }

    pub fn get_usize(&self, key: &str) -> Result<usize> {
        let v = self.require(key)?;
        v.parse().map_err(|_| Error::validation(MODULE, format!("`{key}` is not a count: `{v}`")))
    }

    pub fn get_bool(&self, key: &str) -> Result<bool> {
        let v = self.require(key)?;
        v.parse().map_err(|_| Error::validation(MODULE, format!("`{key}` is not a bool: `{v}`")))
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Entries under `prefix.` with the prefix stripped.
    pub fn section<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.entries.iter().filter_map(move |(k, v)| {
            k.strip_prefix(prefix).and_then(|r| r.strip_prefix('.')).map(|r| (r, v.as_str()))
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Report text without `timing.*` lines.
    pub fn comparable_text(&self) -> String {
        strip_timing(&self.to_text())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == REPORT_HEADER => {}
            _ => return Err(Error::Parse { line: 1, detail: format!("expected `{REPORT_HEADER}` header") }),
        }
        let mut report = RunReport::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, detail: format!("expected key=value, got `{line}`") })?;
            if report.get(k).is_some() {
                return Err(Error::Parse { line: i + 1, detail: format!("duplicate key `{k}`") });
            }
            report.entries.push((k.to_string(), v.to_string()));
        }
        Ok(report)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunReport::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Drops `timing.*` lines from report text.
pub fn strip_timing(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with("timing.")).map(|l| format!("{l}\n")).collect()
}

/// Keys written for every finder run, below `solution.<i>.`. Mountain-pass
/// runs add `path_profile`.
pub const SOLUTION_KEYS: [&str; 18] = [
    "label",
    "finder",
    "J",
    "grad_norm",
    "cerami_metric",
    "converged",
    "iterations",
    "constraint_active",
    "morse.negatives",
    "morse.near_zeros",
    "t_coefficient",
    "boundary_norm",
    "tol",
    "reverified_grad_norm",
    "reverified_cerami_metric",
    "verified",
    "file",
    "log",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_timing() {
        let mut r = RunReport::new();
        r.set("status", "ok");
        r.set_f64("spectrum.mu.1", 0.1 + 0.2);
        r.set_f64("timing.total_seconds", 1.5);
        r.set("status", "incomplete");
        let back = RunReport::parse(&r.to_text()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.get_f64("spectrum.mu.1").unwrap(), 0.1 + 0.2);
        assert_eq!(back.get("status"), Some("incomplete"));
        assert!(!r.comparable_text().contains("timing"));
        assert_eq!(r.section("spectrum").collect::<Vec<_>>(), vec![("mu.1", "0.30000000000000004")]);
    }

    #[test]
    fn parse_errors_carry_lines() {
        assert!(matches!(RunReport::parse("nope\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(RunReport::parse("steklov-report v1\na=1\nbad\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(RunReport::parse("steklov-report v1\na=1\na=2\n"), Err(Error::Parse { line: 3, .. })));
    }
}
