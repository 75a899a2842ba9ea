//! The quenched chain on `{0, 1, 2, ...}`: from `n >= 1` it steps to `n - 1`
//! with probability `p_n` and to `n + 1` otherwise; from 0 it stays or moves
//! to 1 with probability 1/2 each.

use std::sync::OnceLock;

use rand_core::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{Environment, EnvironmentSpec, SiteSource};
use crate::error::{precondition, Result};
use crate::numeric::quantile;
use crate::rng::{child_seed, stream, unit_f64, walk_rng};

pub const DEFAULT_ESCAPE_THRESHOLD: u64 = 100;
pub const DEFAULT_ORIGIN_WINDOW: u64 = 10;
pub const DEFAULT_HISTOGRAM_CEILING: usize = 1 << 16;
pub const DEFAULT_RESERVOIR: usize = 1024;

/// Read access to `p_n` for every `n >= 1`.
pub trait Sites: Sync {
    fn p(&self, n: u64) -> f64;
}

impl Sites for Environment {
    /// Sites past the realized prefix are generated on the fly from the same counters.
    #[inline]
    fn p(&self, n: u64) -> f64 {
        if (n as usize) <= self.n_realized() {
            Environment::p(self, n as usize)
        } else {
            self.source().site(n).p
        }
    }
}

const CHUNK_BITS: u32 = 12;
const CHUNK: usize = 1 << CHUNK_BITS;

/// Environment realized in chunks on first visit. Each chunk is published
/// once, fully initialized, so concurrent walkers share it safely.
#[derive(Debug)]
pub struct LazySites {
    source: SiteSource,
    chunks: Vec<OnceLock<Box<[f64]>>>,
}

impl LazySites {
    /// Table able to cache sites `1..=max_site`; farther sites are computed directly.
    pub fn new(source: SiteSource, max_site: u64) -> Self {
        let n_chunks = (max_site as usize).div_ceil(CHUNK).max(1);
        Self { source, chunks: (0..n_chunks).map(|_| OnceLock::new()).collect() }
    }

    pub fn from_spec(spec: &EnvironmentSpec, seed: u64, max_site: u64) -> Result<Self> {
        Ok(Self::new(SiteSource::new(spec, seed)?, max_site))
    }

    /// Number of sites realized so far.
    pub fn realized(&self) -> usize {
        self.chunks.iter().filter(|c| c.get().is_some()).count() * CHUNK
    }

    fn fill(&self, c: usize) -> Box<[f64]> {
        let first = (c * CHUNK) as u64 + 1;
        (0..CHUNK as u64).map(|i| self.source.site(first + i).p).collect()
    }
}

impl Sites for LazySites {
    #[inline]
    fn p(&self, n: u64) -> f64 {
        let i = (n - 1) as usize;
        let c = i >> CHUNK_BITS;
        match self.chunks.get(c) {
            Some(cell) => cell.get_or_init(|| self.fill(c))[i & (CHUNK - 1)],
            None => self.source.site(n).p,
        }
    }
}

/// One step of the chain from `position` driven by the uniform draw `u`.
#[inline]
pub fn step<S: Sites + ?Sized>(sites: &S, position: u64, u: f64) -> u64 {
    if position == 0 {
        if u < 0.5 {
            0
        } else {
            1
        }
    } else if u < sites.p(position) {
        position - 1
    } else {
        position + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOptions {
    /// Positions `>= histogram_ceiling` share one overflow bucket.
    pub histogram_ceiling: usize,
    pub reservoir_size: usize,
    /// `origin_fraction` counts times at positions `<= origin_window`.
    pub origin_window: u64,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            histogram_ceiling: DEFAULT_HISTOGRAM_CEILING,
            reservoir_size: DEFAULT_RESERVOIR,
            origin_window: DEFAULT_ORIGIN_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub t_max: u64,
    pub start: u64,
    pub seed: u64,
    /// Arrivals at 0 from 1.
    pub returns_to_origin: u64,
    /// Uniform sample (reservoir) of completed excursion lengths away from 0.
    pub return_times: Vec<u64>,
    /// Mean excursion length with the unfinished excursion cut at `t_max`.
    pub return_time_truncated_mean: Option<f64>,
    pub max_position: u64,
    pub final_position: u64,
    /// Minimum position over `t >= t_max / 10`.
    pub min_after_burn_in: u64,
    /// `occupation[k]` = number of times `t in 0..=t_max` spent at `k`.
    pub occupation: Vec<u64>,
    pub occupation_overflow: u64,
    pub overflowed: bool,
    pub origin_window: u64,
    pub origin_fraction: f64,
    /// Steps taken from 0, and how many of them stayed at 0.
    pub origin_steps: u64,
    pub origin_stays: u64,
}

impl TrajectoryStats {
    pub fn occupation_total(&self) -> u64 {
        self.occupation.iter().sum::<u64>() + self.occupation_overflow
    }
}

/// Run `t_max` steps from `start` with the walk randomness of `seed`.
pub fn run_trajectory<S: Sites + ?Sized>(sites: &S, t_max: u64, seed: u64, start: u64) -> Result<TrajectoryStats> {
    run_trajectory_with(sites, t_max, seed, start, &TrajectoryOptions::default())
}

pub fn run_trajectory_with<S: Sites + ?Sized>(
    sites: &S,
    t_max: u64,
    seed: u64,
    start: u64,
    opts: &TrajectoryOptions,
) -> Result<TrajectoryStats> {
    if t_max == 0 {
        return Err(precondition("a trajectory needs t_max >= 1"));
    }
    let mut rng = walk_rng(seed, stream::WALK);
    let mut reservoir_rng = walk_rng(seed, stream::RESERVOIR);
    let burn_in = t_max / 10;
    let ceiling = opts.histogram_ceiling.max(1);

    let mut occupation = vec![0u64; ceiling.min(start as usize + 1).max(1)];
    let mut overflow = 0u64;
    let mut record = |pos: u64, occ: &mut Vec<u64>| {
        let k = pos as usize;
        if k >= ceiling {
            overflow += 1;
        } else {
            if k >= occ.len() {
                occ.resize((k + 1).max(occ.len() * 2).min(ceiling), 0);
            }
            occ[k] += 1;
        }
    };

    let mut pos = start;
    record(pos, &mut occupation);
    let mut max_position = start;
    let mut min_after = if burn_in == 0 { start } else { u64::MAX };
    let mut near_origin = u64::from(pos <= opts.origin_window);
    let mut returns = 0u64;
    let mut origin_steps = 0u64;
    let mut origin_stays = 0u64;
    let mut reservoir: Vec<u64> = Vec::with_capacity(opts.reservoir_size.min(1024));
    let mut completed = 0u64;
    let mut completed_total = 0u64;
    let mut left_origin_at: Option<u64> = None;

    for t in 1..=t_max {
        let u = unit_f64(rng.next_u64());
        let next = step(sites, pos, u);
        if pos == 0 {
            origin_steps += 1;
            if next == 0 {
                origin_stays += 1;
            } else {
                left_origin_at = Some(t - 1);
            }
        } else if next == 0 {
            returns += 1;
            if let Some(t0) = left_origin_at.take() {
                let length = t - t0;
                completed += 1;
                completed_total += length;
                if reservoir.len() < opts.reservoir_size {
                    reservoir.push(length);
                } else {
                    let j = reservoir_rng.next_u64() % completed;
                    if (j as usize) < opts.reservoir_size {
                        reservoir[j as usize] = length;
                    }
                }
            }
        }
        pos = next;
        record(pos, &mut occupation);
        max_position = max_position.max(pos);
        if t >= burn_in {
            min_after = min_after.min(pos);
        }
        near_origin += u64::from(pos <= opts.origin_window);
    }

    let (censored, censored_n) = match left_origin_at {
        Some(t0) => (t_max - t0, 1),
        None => (0, 0),
    };
    let episodes = completed + censored_n;
    let return_time_truncated_mean =
        (episodes > 0).then(|| (completed_total + censored) as f64 / episodes as f64);

    Ok(TrajectoryStats {
        t_max,
        start,
        seed,
        returns_to_origin: returns,
        return_times: reservoir,
        return_time_truncated_mean,
        max_position,
        final_position: pos,
        min_after_burn_in: min_after,
        occupation,
        occupation_overflow: overflow,
        overflowed: overflow > 0,
        origin_window: opts.origin_window,
        origin_fraction: near_origin as f64 / (t_max + 1) as f64,
        origin_steps,
        origin_stays,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_envs: usize,
    pub walks_per_env: usize,
    pub t_max: u64,
    pub start: u64,
    /// Environment `i` uses `child_seed(env_seed, i)`.
    pub env_seed: u64,
    /// Walk `j` of environment `i` uses `child_seed(walk_seed, i * walks_per_env + j)`.
    pub walk_seed: u64,
    pub escape_threshold: u64,
    pub options: TrajectoryOptions,
}

impl EnsembleConfig {
    pub fn new(n_envs: usize, walks_per_env: usize, t_max: u64, env_seed: u64, walk_seed: u64) -> Self {
        Self {
            n_envs,
            walks_per_env,
            t_max,
            start: 0,
            env_seed,
            walk_seed,
            escape_threshold: DEFAULT_ESCAPE_THRESHOLD,
            options: TrajectoryOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub env_index: usize,
    pub walk_index: usize,
    pub env_seed: u64,
    pub walk_seed: u64,
    pub escaped: bool,
    pub stats: TrajectoryStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub t_max: u64,
    pub burn_in: u64,
    pub escape_threshold: u64,
    /// Fraction of trajectories whose minimum after burn-in exceeds the threshold.
    pub escape_fraction: f64,
    pub mean_origin_fraction: f64,
    /// Pooled excursion-length quantiles at 0.5, 0.9, 0.99.
    pub return_time_quantiles: Option<[f64; 3]>,
    pub trajectories: Vec<TrajectoryRecord>,
}

/// Independent `(environment, walk)` pairs run in parallel.
pub fn ensemble(spec: &EnvironmentSpec, cfg: &EnsembleConfig) -> Result<EnsembleReport> {
    if cfg.n_envs == 0 || cfg.walks_per_env == 0 || cfg.t_max == 0 {
        return Err(precondition("ensemble budgets must be positive"));
    }
    spec.validate()?;
    let max_site = cfg.start + cfg.t_max + 1;
    let per_env: Vec<Vec<TrajectoryRecord>> = (0..cfg.n_envs)
        .into_par_iter()
        .map(|i| -> Result<Vec<TrajectoryRecord>> {
            let env_seed = child_seed(cfg.env_seed, i as u64);
            let sites = LazySites::from_spec(spec, env_seed, max_site)?;
            (0..cfg.walks_per_env)
                .into_par_iter()
                .map(|j| {
                    let walk_seed = child_seed(cfg.walk_seed, (i * cfg.walks_per_env + j) as u64);
                    let stats = run_trajectory_with(&sites, cfg.t_max, walk_seed, cfg.start, &cfg.options)?;
                    Ok(TrajectoryRecord {
                        env_index: i,
                        walk_index: j,
                        env_seed,
                        walk_seed,
                        escaped: stats.min_after_burn_in > cfg.escape_threshold,
                        stats,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let trajectories: Vec<TrajectoryRecord> = per_env.into_iter().flatten().collect();
    let m = trajectories.len() as f64;
    let escape_fraction = trajectories.iter().filter(|r| r.escaped).count() as f64 / m;
    let mean_origin_fraction = trajectories.iter().map(|r| r.stats.origin_fraction).sum::<f64>() / m;
    let pooled: Vec<f64> = trajectories.iter().flat_map(|r| r.stats.return_times.iter().map(|&t| t as f64)).collect();
    let return_time_quantiles = (!pooled.is_empty()).then(|| {
        let q = |p| quantile(&pooled, p).unwrap();
        [q(0.5), q(0.9), q(0.99)]
    });
    Ok(EnsembleReport {
        t_max: cfg.t_max,
        burn_in: cfg.t_max / 10,
        escape_threshold: cfg.escape_threshold,
        escape_fraction,
        mean_origin_fraction,
        return_time_quantiles,
        trajectories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{realize, PerturbationSpec, XiLaw, YLaw};

    fn constant(p: f64) -> EnvironmentSpec {
        EnvironmentSpec {
            epsilon: 0.1,
            xi_law: XiLaw::Degenerate { value: p },
            y_law: YLaw::Degenerate { value: 0.0 },
            chi: PerturbationSpec::Zero,
        }
    }

    #[test]
    fn step_rules() {
        let env = realize(&constant(0.5), 0, 10).unwrap();
        assert_eq!(step(&env, 0, 0.49), 0);
        assert_eq!(step(&env, 0, 0.5), 1);
        assert_eq!(step(&env, 3, 0.2), 2);
        assert_eq!(step(&env, 3, 0.7), 4);
        // past the realized prefix the same counters are used
        assert_eq!(Sites::p(&env, 50), 0.5);
    }

    #[test]
    fn clamped_site_moves_down_with_clamped_probability() {
        let spec = EnvironmentSpec {
            epsilon: 0.2,
            xi_law: XiLaw::Degenerate { value: 0.5 },
            y_law: YLaw::Degenerate { value: 1.0 },
            chi: PerturbationSpec::Power { a: 1.0, beta: 1.0 },
        };
        let env = realize(&spec, 0, 2).unwrap();
        assert_eq!(env.p(1), 0.9);
        assert_eq!(step(&env, 1, 0.8999), 0);
        assert_eq!(step(&env, 1, 0.9), 2);
    }

    #[test]
    fn single_step_trajectory() {
        let env = realize(&constant(0.5), 0, 10).unwrap();
        for seed in 0..20 {
            let s = run_trajectory(&env, 1, seed, 0).unwrap();
            assert!(s.final_position <= 1);
            assert_eq!(s.occupation_total(), 2);
        }
        assert!(run_trajectory(&env, 0, 0, 0).is_err());
    }

    #[test]
    fn lazy_table_matches_realized_environment() {
        let spec = EnvironmentSpec {
            epsilon: 0.1,
            xi_law: XiLaw::TwoPoint { v1: 0.3, v2: 0.7, w: 0.5 },
            y_law: YLaw::Degenerate { value: 1.0 },
            chi: PerturbationSpec::Power { a: 1.0, beta: 0.5 },
        };
        let env = realize(&spec, 77, 10_000).unwrap();
        let lazy = LazySites::from_spec(&spec, 77, 5000).unwrap();
        for n in [1u64, 2, 4095, 4096, 4097, 9000, 10_000] {
            assert_eq!(lazy.p(n), env.p(n as usize));
        }
        assert!(lazy.realized() >= 4096 && lazy.realized() <= 2 * 4096);
        let a = run_trajectory(&env, 20_000, 5, 0).unwrap();
        let b = run_trajectory(&lazy, 20_000, 5, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn histogram_overflow_is_flagged() {
        let env = realize(&constant(0.25), 0, 10).unwrap();
        let opts = TrajectoryOptions { histogram_ceiling: 8, ..Default::default() };
        let s = run_trajectory_with(&env, 5000, 1, 0, &opts).unwrap();
        assert!(s.overflowed);
        assert_eq!(s.occupation.len(), 8);
        assert_eq!(s.occupation_total(), 5001);
    }

    #[test]
    fn drifts_show_in_ensembles() {
        let cfg = EnsembleConfig::new(4, 2, 20_000, 1, 2);
        let up = ensemble(&constant(0.75), &cfg).unwrap();
        assert!(up.mean_origin_fraction > 0.99);
        assert_eq!(up.escape_fraction, 0.0);
        let down = ensemble(&constant(0.25), &cfg).unwrap();
        assert_eq!(down.escape_fraction, 1.0);
        assert_eq!(down.trajectories.len(), 8);
        let again = ensemble(&constant(0.25), &cfg).unwrap();
        assert_eq!(down, again);
    }
}
