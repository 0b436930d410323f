//! Run summaries and their aggregation over a results directory.
//!
//! A summary is plain text: a title line, `key = value` metrics and one
//! `PASS name: detail` or `FAIL name: detail` line per check.

use std::fmt::{self, Display};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{AppError, AppResult};
use crate::formats::write_atomic;

pub const SUMMARY_SUFFIX: &str = "_summary.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Summary {
    pub title: String,
    pub metrics: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            ..Self::default()
        }
    }

    pub fn metric(&mut self, key: &str, value: impl Display) {
        self.metrics.push((key.to_string(), value.to_string()));
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            pass,
            detail: detail.into(),
        });
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn metric_value(&self, key: &str) -> Option<&str> {
        self.metrics
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn parse(text: &str) -> Self {
        let mut lines = text.lines();
        let mut s = Summary::new(lines.next().unwrap_or_default().trim_start_matches("# "));
        for line in lines {
            let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
            if tag == "PASS" || tag == "FAIL" {
                let (name, detail) = rest.split_once(": ").unwrap_or((rest, ""));
                s.check(name, tag == "PASS", detail);
            } else if let Some((k, v)) = line.split_once(" = ") {
                s.metric(k, v);
            }
        }
        s
    }

    pub fn write(&self, path: &Path) -> AppResult<()> {
        write_atomic(path, self.to_string().as_bytes())
    }
}

impl Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {}", self.title)?;
        for (k, v) in &self.metrics {
            writeln!(f, "{k} = {v}")?;
        }
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> AppResult<()> {
    let entries = fs::read_dir(dir).map_err(|e| AppError::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .map(|e| e.map(|e| e.path()).map_err(|err| AppError::io(dir, err)))
        .collect::<AppResult<_>>()?;
    paths.sort();
    for p in paths {
        if p.is_dir() {
            collect(&p, out)?;
        } else if p
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with(SUMMARY_SUFFIX))
        {
            out.push(p);
        }
    }
    Ok(())
}

/// Every check of every summary below `dir`, prefixed by its file.
pub fn aggregate(dir: &Path) -> AppResult<Summary> {
    let mut files = Vec::new();
    collect(dir, &mut files)?;
    if files.is_empty() {
        return Err(AppError::format(dir, "no run summaries found"));
    }
    let mut total = Summary::new(format!("report for {}", dir.display()));
    total.metric("summaries", files.len());
    for path in &files {
        let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        let rel = path.strip_prefix(dir).unwrap_or(path).display().to_string();
        for c in Summary::parse(&text).checks {
            total.check(&format!("{rel} {}", c.name), c.pass, c.detail);
        }
    }
    let failed = total.checks.iter().filter(|c| !c.pass).count();
    total.metric("checks", total.checks.len());
    total.metric("failed", failed);
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_inverts_display() {
        let mut s = Summary::new("profile run");
        s.metric("sup_abs", 0.25);
        s.check("abp", true, "0.25 <= 4");
        s.check("oracle", false, "relative error 2e-3");
        let back = Summary::parse(&s.to_string());
        assert_eq!(back, s);
        assert!(!back.all_pass());
        assert_eq!(back.metric_value("sup_abs"), Some("0.25"));
    }
}
