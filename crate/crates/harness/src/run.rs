//! Running a configured experiment grid and writing its artifacts.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use rwre_core::classifier::{majority_verdict, trajectory_verdict};
use rwre_core::lyapunov::{growth_diagnostic, GrowthModel, GrowthSuggestion};
use rwre_core::rng::child_seed;
use rwre_core::simulator::{run_trajectory, LazySites, TrajectoryStats, DEFAULT_ESCAPE_THRESHOLD};
use rwre_core::{classify, ledger_scan, realize, EnvironmentSpec, PerturbationSpec};

use crate::config::{Budgets, Experiment, ExperimentConfig, Outputs};
use crate::manifest::{emit, Manifest};
use crate::report::{histogram_csv, ledger_csv, to_csv, Empirical, ReportRow, TrajectoryRow};

pub const REPORT_FILE: &str = "report.csv";
pub const TRAJECTORY_FILE: &str = "trajectories.csv";

/// Command-line or environment overrides of the config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed_offset: u64,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
    pub reports: Vec<ReportRow>,
}

impl RunOutcome {
    pub fn succeeded(&self) -> bool {
        self.manifest.failures.is_empty()
    }
}

/// Walk seeds are derived from the environment seed, independent of the
/// environment's own stream.
pub fn walk_seed(env_seed: u64, walk: usize) -> u64 {
    child_seed(!env_seed, walk as u64)
}

struct SeedResult {
    env_seed: u64,
    suggestion: GrowthSuggestion,
    ledger_csv: Option<Vec<u8>>,
    environment_csv: Option<Vec<u8>>,
    walks: Vec<TrajectoryStats>,
}

fn run_seed(spec: &EnvironmentSpec, env_seed: u64, budgets: &Budgets, outputs: &Outputs) -> Result<SeedResult> {
    let env = realize(spec, env_seed, budgets.ledger_n)?;
    let ledger = ledger_scan(&env, budgets.ledger_n)?;
    let beta = match spec.chi {
        PerturbationSpec::Power { beta, .. } => Some(beta),
        _ => None,
    };
    let suggestion = growth_diagnostic(&ledger, GrowthModel { beta }).suggestion;
    let ledger_csv = outputs.ledgers.then(|| ledger_csv(&ledger)).transpose()?;
    let environment_csv = outputs.environments.then(|| to_csv(env.rows())).transpose()?;
    drop(ledger);

    let sites = LazySites::new(env.source().clone(), budgets.start + budgets.t_max + 1);
    let walks = (0..budgets.walks_per_env)
        .map(|j| run_trajectory(&sites, budgets.t_max, walk_seed(env_seed, j), budgets.start))
        .collect::<rwre_core::Result<Vec<_>>>()?;
    Ok(SeedResult { env_seed, suggestion, ledger_csv, environment_csv, walks })
}

fn run_experiment(exp: &Experiment, seeds: &[u64], cfg: &ExperimentConfig, dir: &Path) -> Result<(Manifest, ReportRow)> {
    let classification = classify(&exp.spec)?;
    let results = seeds
        .par_iter()
        .map(|&s| run_seed(&exp.spec, s, &cfg.budgets, &cfg.outputs).with_context(|| format!("seed {s}")))
        .collect::<Result<Vec<_>>>()?;

    let mut manifest = Manifest::default();
    let label = &exp.label;
    let mut rows = Vec::new();
    let mut escaped_count = 0usize;
    let mut origin_total = 0.0;
    for r in &results {
        if let Some(bytes) = &r.ledger_csv {
            emit(dir, &format!("{label}/ledger_seed{}.csv", r.env_seed), bytes, &mut manifest)?;
        }
        if let Some(bytes) = &r.environment_csv {
            emit(dir, &format!("{label}/environment_seed{}.csv", r.env_seed), bytes, &mut manifest)?;
        }
        for (j, s) in r.walks.iter().enumerate() {
            let escaped = s.min_after_burn_in > DEFAULT_ESCAPE_THRESHOLD;
            escaped_count += usize::from(escaped);
            origin_total += s.origin_fraction;
            rows.push(TrajectoryRow::new(r.env_seed, j, escaped, s));
            if cfg.outputs.histograms {
                let bytes = histogram_csv(s)?;
                emit(dir, &format!("{label}/histogram_seed{}_walk{j}.csv", r.env_seed), &bytes, &mut manifest)?;
            }
        }
    }
    let walks = rows.len() as f64;
    if cfg.outputs.trajectories {
        emit(dir, &format!("{label}/{TRAJECTORY_FILE}"), &to_csv(rows)?, &mut manifest)?;
    }

    let suggestions: Vec<GrowthSuggestion> = results.iter().map(|r| r.suggestion).collect();
    let (verdict, confidence) = majority_verdict(&suggestions);
    let walked = walks > 0.0 && cfg.budgets.t_max > 0;
    let escape_fraction = if walked { escaped_count as f64 / walks } else { 0.0 };
    let mean_origin_fraction = if walked { origin_total / walks } else { 0.0 };
    let empirical = Empirical {
        n_envs: seeds.len(),
        verdict,
        confidence,
        trajectory_verdict: walked.then(|| trajectory_verdict(escape_fraction, mean_origin_fraction)),
        escape_fraction,
        mean_origin_fraction,
    };
    let report = ReportRow::new(label, &exp.spec, &classification, &empirical)?;
    if cfg.outputs.reports {
        emit(dir, &format!("{label}/{REPORT_FILE}"), &to_csv([&report])?, &mut manifest)?;
    }
    Ok((manifest, report))
}

/// Run every experiment of `cfg`. Failed experiments are listed in the
/// manifest; artifacts of the others are kept.
pub fn run(cfg: &ExperimentConfig, overrides: &Overrides) -> Result<RunOutcome> {
    cfg.validate()?;
    let out_dir = overrides.out.clone().unwrap_or_else(|| cfg.outputs.dir.clone());
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let seeds = cfg.seeds.expand(overrides.seed_offset);
    let workers = overrides.workers.or(cfg.workers);

    let body = || {
        let mut manifest = Manifest::default();
        let mut reports = Vec::new();
        for exp in cfg.experiments() {
            match run_experiment(&exp, &seeds, cfg, &out_dir) {
                Ok((m, r)) => {
                    manifest.merge(m);
                    reports.push(r);
                }
                Err(e) => manifest.fail(&exp.label, format!("{e:#}")),
            }
        }
        (manifest, reports)
    };
    let (manifest, reports) = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(body),
        None => body(),
    };
    let manifest_path = manifest.write(&out_dir)?;
    Ok(RunOutcome { out_dir, manifest_path, manifest, reports })
}
