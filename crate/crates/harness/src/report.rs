//! Report rows and the CSV encodings of ledgers, environments and trajectories.

use std::path::Path;

use anyhow::{Context, Result};
use rwre_core::classifier::{corroborates, Classification, Verdict};
use rwre_core::lyapunov::LedgerEntry;
use rwre_core::simulator::TrajectoryStats;
use rwre_core::EnvironmentSpec;
use serde::{Deserialize, Serialize};

use crate::manifest::sha256_hex;

/// Hash of the canonical TOML form of a spec.
pub fn spec_hash(spec: &EnvironmentSpec) -> Result<String> {
    Ok(sha256_hex(toml::to_string(spec)?.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agreement {
    Agree,
    Disagree,
    /// No definite theoretical verdict to compare with.
    NotApplicable,
}

impl Agreement {
    /// `trajectory` is the walk-based verdict when walks were run; it only
    /// counts on the transient/recurrent axis.
    pub fn of(theory: Verdict, empirical: Verdict, trajectory: Option<Verdict>) -> Self {
        match corroborates(theory, empirical, trajectory) {
            None => Agreement::NotApplicable,
            Some(true) => Agreement::Agree,
            Some(false) => Agreement::Disagree,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub spec_hash: String,
    pub verdict: Verdict,
    pub clause: String,
    pub source: String,
    pub mean_zeta: f64,
    pub sigma2: f64,
    pub lambda: f64,
    /// `lambda_1 .. lambda_R`, space separated.
    pub lambda_r: String,
    pub moment_method: String,
    pub criticality: String,
    pub detail: String,
    pub n_envs: usize,
    pub empirical_verdict: Verdict,
    pub confidence: f64,
    /// Empty when no walks were run.
    pub trajectory_verdict: Option<Verdict>,
    pub escape_fraction: f64,
    pub mean_origin_fraction: f64,
    pub agreement: Agreement,
    pub warnings: String,
}

pub struct Empirical {
    pub n_envs: usize,
    pub verdict: Verdict,
    pub confidence: f64,
    pub trajectory_verdict: Option<Verdict>,
    pub escape_fraction: f64,
    pub mean_origin_fraction: f64,
}

impl ReportRow {
    pub fn new(label: &str, spec: &EnvironmentSpec, c: &Classification, e: &Empirical) -> Result<Self> {
        let m = &c.moments;
        Ok(ReportRow {
            label: label.to_string(),
            spec_hash: spec_hash(spec)?,
            verdict: c.verdict,
            clause: c.source.clause.to_string(),
            source: c.source.rule.clone(),
            mean_zeta: m.mean_zeta,
            sigma2: m.sigma2,
            lambda: m.lambda,
            lambda_r: m.lambda_r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
            moment_method: format!("{:?}", m.method),
            criticality: c.criticality.map(|v| v.label()).unwrap_or_default(),
            detail: c.detail.clone().unwrap_or_default(),
            n_envs: e.n_envs,
            empirical_verdict: e.verdict,
            confidence: e.confidence,
            trajectory_verdict: e.trajectory_verdict,
            escape_fraction: e.escape_fraction,
            mean_origin_fraction: e.mean_origin_fraction,
            agreement: Agreement::of(c.verdict, e.verdict, e.trajectory_verdict),
            warnings: c.warnings.join(" | "),
        })
    }
}

pub fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}

pub fn read_reports(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize().collect::<std::result::Result<_, _>>().with_context(|| format!("reading {}", path.display()))
}

#[derive(Debug, Serialize)]
struct LedgerRow {
    n: u64,
    #[serde(rename = "L_n")]
    l_n: f64,
    log_delta: f64,
    log_f: f64,
    #[serde(rename = "log_D_partial")]
    log_d_partial: f64,
    log_mu: f64,
}

pub fn ledger_csv(ledger: &[LedgerEntry]) -> Result<Vec<u8>> {
    to_csv(ledger.iter().map(|e| LedgerRow {
        n: e.n,
        l_n: e.log_ratio_sum,
        log_delta: e.log_delta,
        log_f: e.log_f,
        log_d_partial: e.log_d_partial,
        log_mu: e.log_mu,
    }))
}

#[derive(Debug, Serialize)]
pub struct TrajectoryRow {
    pub env_seed: u64,
    pub walk_index: usize,
    pub walk_seed: u64,
    pub escaped: bool,
    pub t_max: u64,
    pub start: u64,
    pub returns_to_origin: u64,
    pub return_time_truncated_mean: Option<f64>,
    pub max_position: u64,
    pub final_position: u64,
    pub min_after_burn_in: u64,
    pub occupation_overflow: u64,
    pub overflowed: bool,
    pub origin_window: u64,
    pub origin_fraction: f64,
    pub origin_steps: u64,
    pub origin_stays: u64,
}

impl TrajectoryRow {
    pub fn new(env_seed: u64, walk_index: usize, escaped: bool, s: &TrajectoryStats) -> Self {
        TrajectoryRow {
            env_seed,
            walk_index,
            walk_seed: s.seed,
            escaped,
            t_max: s.t_max,
            start: s.start,
            returns_to_origin: s.returns_to_origin,
            return_time_truncated_mean: s.return_time_truncated_mean,
            max_position: s.max_position,
            final_position: s.final_position,
            min_after_burn_in: s.min_after_burn_in,
            occupation_overflow: s.occupation_overflow,
            overflowed: s.overflowed,
            origin_window: s.origin_window,
            origin_fraction: s.origin_fraction,
            origin_steps: s.origin_steps,
            origin_stays: s.origin_stays,
        }
    }
}

#[derive(Debug, Serialize)]
struct HistogramRow {
    position: String,
    count: u64,
}

/// `position,count` rows for visited sites; the overflow bucket is labelled `>=ceiling`.
pub fn histogram_csv(s: &TrajectoryStats) -> Result<Vec<u8>> {
    let mut rows: Vec<HistogramRow> = s
        .occupation
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0)
        .map(|(k, c)| HistogramRow { position: k.to_string(), count: *c })
        .collect();
    if s.occupation_overflow > 0 {
        rows.push(HistogramRow { position: format!(">={}", s.occupation.len()), count: s.occupation_overflow });
    }
    to_csv(rows)
}
