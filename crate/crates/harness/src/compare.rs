//! Side-by-side comparison of report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Result};
use rwre_core::classifier::Verdict;
use serde::Serialize;

use crate::report::{read_reports, Agreement};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub file: String,
    pub label: String,
    pub spec_hash: String,
    pub theoretical: Verdict,
    pub empirical: Verdict,
    pub confidence: f64,
    pub agreement: Agreement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Spec hashes whose reports disagree with each other.
    pub conflicts: Vec<String>,
}

impl Comparison {
    pub fn disagreements(&self) -> usize {
        self.rows.iter().filter(|r| r.agreement == Agreement::Disagree).count()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<32} {:<14} {:<16} {:<16} {:>10}  agreement", "label", "spec", "theoretical", "empirical", "confidence");
        for r in &self.rows {
            let flag = match r.agreement {
                Agreement::Agree => "agree",
                Agreement::Disagree => "DISAGREE",
                Agreement::NotApplicable => "n/a",
            };
            let _ = writeln!(
                out,
                "{:<32} {:<14} {:<16} {:<16} {:>10.3}  {flag}",
                r.label,
                &r.spec_hash[..r.spec_hash.len().min(12)],
                r.theoretical.to_string(),
                r.empirical.to_string(),
                r.confidence
            );
        }
        let _ = writeln!(
            out,
            "{} rows, {} disagreements, {} conflicting specs",
            self.rows.len(),
            self.disagreements(),
            self.conflicts.len()
        );
        for h in &self.conflicts {
            let _ = writeln!(out, "conflict: reports for spec {h} differ");
        }
        out
    }
}

pub fn compare(paths: &[PathBuf]) -> Result<Comparison> {
    if paths.len() < 2 {
        bail!("compare needs at least two reports, got {}", paths.len());
    }
    let mut rows = Vec::new();
    for p in paths {
        for r in read_reports(p)? {
            rows.push(ComparisonRow {
                file: p.display().to_string(),
                label: r.label,
                spec_hash: r.spec_hash,
                theoretical: r.verdict,
                empirical: r.empirical_verdict,
                confidence: r.confidence,
                agreement: r.agreement,
            });
        }
    }
    let mut by_spec: BTreeMap<&str, Vec<&ComparisonRow>> = BTreeMap::new();
    for r in &rows {
        by_spec.entry(&r.spec_hash).or_default().push(r);
    }
    let conflicts = by_spec
        .into_iter()
        .filter(|(_, group)| group.iter().any(|r| (r.theoretical, r.empirical) != (group[0].theoretical, group[0].empirical)))
        .map(|(h, _)| h.to_string())
        .collect();
    Ok(Comparison { rows, conflicts })
}
