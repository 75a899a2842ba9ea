//! Ergodic / null-recurrent / transient classification of the quenched chain
//! from the law of the environment, plus an empirical cross-check.

use std::cmp::Ordering;
use std::fmt;

use num_traits::Signed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criticality::{check_criticality, iter_log, CriticalityStatus, CriticalityVerdict, DEFAULT_K_MAX};
use crate::environment::exact::recover_rational;
use crate::environment::{law_facts, moments_auto, realize, EnvironmentSpec, LawFacts, MomentSummary, PerturbationSpec, DEFAULT_R_MAX};
use crate::error::{domain, precondition, Result};
use crate::lyapunov::{growth_diagnostic, ledger_scan, GrowthModel, GrowthSuggestion};
use crate::rng::child_seed;
use crate::simulator::{ensemble, EnsembleConfig};

/// Depth of the nested-log thresholds tried for the fair-coin environment.
const MAX_NESTING: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Ergodic,
    NullRecurrent,
    Transient,
    /// Recurrent, with positive versus null recurrence not settled. No rule produces it yet.
    RecurrentUnresolved,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Ergodic => "ergodic",
            Verdict::NullRecurrent => "null-recurrent",
            Verdict::Transient => "transient",
            Verdict::RecurrentUnresolved => "recurrent-unresolved",
            Verdict::Indeterminate => "indeterminate",
        };
        f.write_str(s)
    }
}

/// Branch of the decision tree, in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Clause {
    /// Random xi, nonzero mean log-ratio.
    A,
    /// Random xi, zero mean log-ratio, no perturbation.
    B,
    /// Random xi, zero mean log-ratio, `Y/xi` and `-Y/(1-xi)` equal in law.
    C,
    /// Random xi, zero mean log-ratio, `lambda != 0`.
    D,
    /// Constant xi, constant Y.
    E,
    /// Constant xi, random Y.
    F,
    /// Random xi, zero mean log-ratio, `lambda = 0` without the ratio symmetry.
    G,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format!("{self:?}").to_lowercase())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Source {
    pub clause: Clause,
    pub rule: String,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) {}", self.clause, self.rule)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub source: Source,
    pub moments: MomentSummary,
    pub facts: LawFacts,
    pub criticality: Option<CriticalityVerdict>,
    /// The verdict holds for almost every environment.
    pub almost_sure: bool,
    /// Extra context, e.g. the range a tabulated perturbation was checked over.
    pub detail: Option<String>,
    pub warnings: Vec<String>,
}

/// `1/(4n) + 1/(4n log n) + ... + h / (4n prod_{i=1}^{s} log_i n)`.
pub fn nested_log_threshold(n: f64, s: u32, h: f64) -> Result<f64> {
    let (base, last) = threshold_parts(n, s)?;
    Ok(base + h * last)
}

/// The `h`-free part of the threshold and the coefficient of `h`.
fn threshold_parts(n: f64, s: u32) -> Result<(f64, f64)> {
    let mut prod = 1.0;
    let mut base = 0.0;
    for i in 1..=s {
        base += 1.0 / (4.0 * n * prod);
        let l = iter_log(i, n).filter(|l| *l > 0.0).ok_or_else(|| domain(format!("log_{i}({n}) is not positive")))?;
        prod *= l;
    }
    if !(n > 0.0) {
        return Err(domain(format!("threshold needs n > 0, got {n}")));
    }
    Ok((base, 1.0 / (4.0 * n * prod)))
}

fn src(clause: Clause, rule: &str) -> Source {
    Source { clause, rule: rule.to_string() }
}

/// Exact comparison of `4ab` with 1 when both parameters are short rationals.
fn four_ab_cmp_one(a: f64, b: f64, warnings: &mut Vec<String>) -> Ordering {
    match (recover_rational(a), recover_rational(b)) {
        (Some(a), Some(b)) => {
            let k = a * b * num_rational::BigRational::from_integer(4.into());
            k.abs().cmp(&num_rational::BigRational::from_integer(1.into()))
        }
        _ => {
            warnings.push("4ab compared with 1 in floating point".into());
            let k = (4.0 * a * b).abs();
            if (k - 1.0).abs() <= crate::environment::exact::FLOAT_TOLERANCE {
                Ordering::Equal
            } else {
                k.total_cmp(&1.0)
            }
        }
    }
}

/// Fair-coin environment with `Y = b`: compare `b chi(n)` with the nested-log thresholds.
fn fair_coin_constant_y(chi: &PerturbationSpec, b: f64, warnings: &mut Vec<String>) -> (Verdict, String, Option<String>) {
    let sign_b = b.total_cmp(&0.0);
    match chi {
        PerturbationSpec::Zero => (Verdict::NullRecurrent, "fair coin, no perturbation".into(), None),
        _ if sign_b == Ordering::Equal => (Verdict::NullRecurrent, "fair coin, Y = 0".into(), None),
        PerturbationSpec::Power { a, beta } => {
            if *beta < 1.0 {
                let v = if sign_b == Ordering::Greater { Verdict::Ergodic } else { Verdict::Transient };
                (v, "fair coin, b chi(n) dominates 1/(4n)".into(), None)
            } else if *beta > 1.0 {
                (Verdict::NullRecurrent, "fair coin, b chi(n) inside the nested-log window".into(), None)
            } else {
                match four_ab_cmp_one(*a, b, warnings) {
                    Ordering::Greater if sign_b == Ordering::Greater => {
                        (Verdict::Ergodic, "fair coin, b chi(n) = h/(4n) with h > 1".into(), None)
                    }
                    Ordering::Greater => (Verdict::Transient, "fair coin, b chi(n) = -h/(4n) with h > 1".into(), None),
                    _ => (Verdict::NullRecurrent, "fair coin, |b chi(n)| <= 1/(4n)".into(), None),
                }
            }
        }
        PerturbationSpec::Table { values } => table_thresholds(values, b),
        PerturbationSpec::IterLogCritical { .. } => (
            Verdict::Indeterminate,
            "fair coin, nested-log thresholds not evaluated for this perturbation family".into(),
            None,
        ),
    }
}

fn table_thresholds(values: &[f64], b: f64) -> (Verdict, String, Option<String>) {
    let len = values.len() as u64;
    // log_3 n > 0 needs n >= 16
    let k = (len / 10).max(16);
    if k > len {
        return (Verdict::Indeterminate, "fair coin, table too short for the nested-log thresholds".into(), None);
    }
    let detail = Some(format!("nested-log thresholds checked over n in [{k}, {len}]"));
    let g = |n: u64| b * values[(n - 1) as usize];
    // for each depth s: (min (g - base)/u, max (g - base)/u, min (-g - base)/u, max (-g - base)/u)
    let mut stats = Vec::new();
    for s in 0..=MAX_NESTING {
        let mut st = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for n in k..=len {
            let (base, u) = threshold_parts(n as f64, s).expect("n >= 16 keeps nested logs positive");
            let up = (g(n) - base) / u;
            let down = (-g(n) - base) / u;
            st[0] = st[0].min(up);
            st[1] = st[1].max(up);
            st[2] = st[2].min(down);
            st[3] = st[3].max(down);
        }
        stats.push(st);
    }
    for (s, st) in stats.iter().enumerate() {
        if st[0] > 1.0 {
            return (Verdict::Ergodic, format!("fair coin, b chi(n) above the depth-{s} threshold with h > 1"), detail);
        }
        if st[2] > 1.0 {
            return (Verdict::Transient, format!("fair coin, b chi(n) below minus the depth-{s} threshold with h > 1"), detail);
        }
    }
    for (s, lower) in stats.iter().enumerate() {
        for (t, upper) in stats.iter().enumerate() {
            if lower[3] < 1.0 && upper[1] < 1.0 {
                return (
                    Verdict::NullRecurrent,
                    format!("fair coin, b chi(n) inside the nested-log window (depths {s}, {t}) with h < 1"),
                    detail,
                );
            }
        }
    }
    (Verdict::Indeterminate, "fair coin, b chi(n) in no nested-log band".into(), detail)
}

/// Classify the chain from the law of its environment.
pub fn classify(spec: &EnvironmentSpec) -> Result<Classification> {
    let facts = law_facts(spec)?;
    let moments = moments_auto(spec, DEFAULT_R_MAX)?;
    let mut warnings = facts.warnings.clone();
    let mut criticality = None;
    let mut detail = None;

    let (verdict, source) = if facts.sigma2_positive {
        match facts.mean_zeta_sign {
            Ordering::Less => (Verdict::Transient, src(Clause::A, "random environment, E[zeta] < 0")),
            Ordering::Greater => (Verdict::Ergodic, src(Clause::A, "random environment, E[zeta] > 0")),
            Ordering::Equal if facts.y_zero => {
                (Verdict::NullRecurrent, src(Clause::B, "unperturbed random environment, E[zeta] = 0"))
            }
            Ordering::Equal if facts.ratio_symmetric => {
                (Verdict::NullRecurrent, src(Clause::C, "Y/xi equal in law to -Y/(1-xi)"))
            }
            Ordering::Equal if facts.lambda_sign != Ordering::Equal => {
                let v = check_criticality(&spec.chi, moments.lambda, moments.sigma(), DEFAULT_K_MAX, None)?;
                criticality = Some(v);
                let positive = facts.lambda_sign == Ordering::Greater;
                match v.status {
                    CriticalityStatus::Supercritical { k, .. } if positive => {
                        (Verdict::Ergodic, src(Clause::D, &format!("{k}-supercritical perturbation, lambda > 0")))
                    }
                    CriticalityStatus::Supercritical { k, .. } => {
                        (Verdict::Transient, src(Clause::D, &format!("{k}-supercritical perturbation, lambda < 0")))
                    }
                    CriticalityStatus::Subcritical { k, .. } => {
                        (Verdict::NullRecurrent, src(Clause::D, &format!("{k}-subcritical perturbation")))
                    }
                    CriticalityStatus::Neither => (
                        Verdict::Indeterminate,
                        src(Clause::D, "perturbation neither supercritical nor subcritical"),
                    ),
                }
            }
            Ordering::Equal => {
                let lr: Vec<String> = moments.lambda_r.iter().map(|v| format!("{v:.6e}")).collect();
                detail = Some(format!("lambda_r = [{}]", lr.join(", ")));
                (Verdict::Indeterminate, src(Clause::G, "lambda = 0 without ratio symmetry; higher moments decide"))
            }
        }
    } else {
        let half = facts.half_cmp.expect("constant xi has a comparison with 1/2");
        if facts.y_var_zero {
            match half {
                Ordering::Less => (Verdict::Transient, src(Clause::E, "constant environment, c < 1/2")),
                Ordering::Greater => (Verdict::Ergodic, src(Clause::E, "constant environment, c > 1/2")),
                Ordering::Equal => {
                    let b = facts.y_value.unwrap_or(0.0);
                    let (v, rule, d) = fair_coin_constant_y(&spec.chi, b, &mut warnings);
                    detail = d;
                    (v, src(Clause::E, &rule))
                }
            }
        } else {
            match half {
                Ordering::Less => (Verdict::Transient, src(Clause::F, "constant xi < 1/2, random Y")),
                Ordering::Greater => (Verdict::Ergodic, src(Clause::F, "constant xi > 1/2, random Y")),
                Ordering::Equal if facts.y_symmetric => {
                    (Verdict::NullRecurrent, src(Clause::F, "fair coin, Y symmetric"))
                }
                Ordering::Equal if facts.mean_y_sign == Ordering::Equal => (
                    Verdict::Indeterminate,
                    src(Clause::F, "fair coin, E[Y] = 0 but Y not symmetric"),
                ),
                Ordering::Equal => {
                    let up = facts.mean_y_sign == Ordering::Greater;
                    match &spec.chi {
                        PerturbationSpec::Zero => {
                            (Verdict::NullRecurrent, src(Clause::F, "fair coin, random Y, no perturbation"))
                        }
                        PerturbationSpec::Power { beta, .. } if *beta < 1.0 => {
                            if up {
                                (Verdict::Ergodic, src(Clause::F, "fair coin, E[Y] > 0, beta < 1"))
                            } else {
                                (Verdict::Transient, src(Clause::F, "fair coin, E[Y] < 0, beta < 1"))
                            }
                        }
                        PerturbationSpec::Power { beta, .. } if *beta > 1.0 => {
                            (Verdict::NullRecurrent, src(Clause::F, "fair coin, E[Y] != 0, beta > 1"))
                        }
                        PerturbationSpec::Power { .. } => {
                            (Verdict::Indeterminate, src(Clause::F, "fair coin, E[Y] != 0, beta = 1"))
                        }
                        _ => (
                            Verdict::Indeterminate,
                            src(Clause::F, "fair coin, E[Y] != 0, perturbation not a power law"),
                        ),
                    }
                }
            }
        }
    };
    Ok(Classification {
        verdict,
        source,
        moments,
        facts,
        criticality,
        almost_sure: true,
        detail,
        warnings,
    })
}

/// Budget for the empirical cross-check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalBudget {
    pub n_envs: usize,
    pub ledger_n: usize,
    /// Trajectory length; 0 skips the trajectory cross-check.
    pub t_max: u64,
    pub walks_per_env: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalClassification {
    /// Majority verdict of the per-environment growth diagnostics.
    pub verdict: Verdict,
    /// Fraction of environments agreeing with the majority.
    pub confidence: f64,
    pub per_env: Vec<GrowthSuggestion>,
    /// Verdict suggested by trajectory statistics, if they were run.
    pub trajectory_verdict: Option<Verdict>,
    pub escape_fraction: Option<f64>,
    pub mean_origin_fraction: Option<f64>,
    pub theory: Classification,
    /// Whether the empirical verdict matches a definite theoretical one.
    pub agrees_with_theory: Option<bool>,
}

/// `None` when the theory has no definite verdict. Otherwise the growth
/// verdict must match it, and the trajectory verdict, if any, must match it
/// on the transient/recurrent axis.
pub fn corroborates(theory: Verdict, growth: Verdict, trajectory: Option<Verdict>) -> Option<bool> {
    let transient = |v: Verdict| v == Verdict::Transient;
    match theory {
        Verdict::Indeterminate | Verdict::RecurrentUnresolved => None,
        v => Some(v == growth && trajectory.is_none_or(|t| transient(t) == transient(v))),
    }
}

pub fn suggestion_verdict(s: GrowthSuggestion) -> Verdict {
    match s {
        GrowthSuggestion::TransientConsistent => Verdict::Transient,
        GrowthSuggestion::ErgodicConsistent => Verdict::Ergodic,
        GrowthSuggestion::NullRecurrentConsistent => Verdict::NullRecurrent,
        GrowthSuggestion::Inconclusive => Verdict::Indeterminate,
    }
}

/// Most common suggestion and the fraction of environments giving it.
/// Ties go to the earlier of ergodic, null-recurrent, transient, inconclusive.
pub fn majority_verdict(per_env: &[GrowthSuggestion]) -> (Verdict, f64) {
    if per_env.is_empty() {
        return (Verdict::Indeterminate, 0.0);
    }
    let order = [
        GrowthSuggestion::ErgodicConsistent,
        GrowthSuggestion::NullRecurrentConsistent,
        GrowthSuggestion::TransientConsistent,
        GrowthSuggestion::Inconclusive,
    ];
    let mut best = (order[0], 0);
    for s in order {
        let c = per_env.iter().filter(|x| **x == s).count();
        if c > best.1 {
            best = (s, c);
        }
    }
    (suggestion_verdict(best.0), best.1 as f64 / per_env.len() as f64)
}

/// Regime suggested by trajectory statistics: mostly escaping is transient,
/// mostly near the origin is ergodic, anything else null-recurrent.
pub fn trajectory_verdict(escape_fraction: f64, mean_origin_fraction: f64) -> Verdict {
    if escape_fraction > 0.5 {
        Verdict::Transient
    } else if mean_origin_fraction > 0.5 {
        Verdict::Ergodic
    } else {
        Verdict::NullRecurrent
    }
}

/// Growth diagnostics over independent environments, cross-checked against
/// trajectory statistics. Corroborates `classify`; never overrides it.
pub fn empirical_classify(spec: &EnvironmentSpec, budget: &EmpiricalBudget) -> Result<EmpiricalClassification> {
    if budget.n_envs == 0 || budget.ledger_n == 0 {
        return Err(precondition("empirical classification needs environments and a ledger length"));
    }
    let theory = classify(spec)?;
    let model = GrowthModel {
        beta: match spec.chi {
            PerturbationSpec::Power { beta, .. } => Some(beta),
            _ => None,
        },
    };
    let per_env: Vec<GrowthSuggestion> = (0..budget.n_envs)
        .into_par_iter()
        .map(|i| {
            let env = realize(spec, child_seed(budget.seed, i as u64), budget.ledger_n)?;
            let ledger = ledger_scan(&env, budget.ledger_n)?;
            Ok(growth_diagnostic(&ledger, model).suggestion)
        })
        .collect::<Result<_>>()?;

    let (verdict, confidence) = majority_verdict(&per_env);

    let (trajectory_verdict, escape_fraction, mean_origin_fraction) = if budget.t_max > 0 && budget.walks_per_env > 0 {
        let cfg = EnsembleConfig::new(budget.n_envs, budget.walks_per_env, budget.t_max, budget.seed, child_seed(budget.seed, u64::MAX));
        let report = ensemble(spec, &cfg)?;
        (
            Some(trajectory_verdict(report.escape_fraction, report.mean_origin_fraction)),
            Some(report.escape_fraction),
            Some(report.mean_origin_fraction),
        )
    } else {
        (None, None, None)
    };
    let agrees_with_theory = corroborates(theory.verdict, verdict, trajectory_verdict);
    Ok(EmpiricalClassification {
        verdict,
        confidence,
        per_env,
        trajectory_verdict,
        escape_fraction,
        mean_origin_fraction,
        theory,
        agrees_with_theory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn threshold_hand_values() {
        assert_eq!(nested_log_threshold(100.0, 0, 1.0).unwrap(), 0.0025);
        let n = E * E;
        // 1/(4e^2) + 2/(4e^2 * 2)
        let want = 1.0 / (4.0 * E * E) + 2.0 / (4.0 * E * E * 2.0);
        assert!((nested_log_threshold(n, 1, 2.0).unwrap() / want - 1.0).abs() < 1e-14);
        assert!(nested_log_threshold(2.0, 2, 1.0).is_err());
        assert!(nested_log_threshold(1.0, 1, 1.0).is_err());
        let mut prev = f64::INFINITY;
        for n in 20..2000 {
            let t = nested_log_threshold(n as f64, 3, 1.5).unwrap();
            assert!(t < prev);
            prev = t;
        }
    }

    #[test]
    fn four_ab_exact() {
        let mut w = Vec::new();
        assert_eq!(four_ab_cmp_one(0.5, 0.5, &mut w), Ordering::Equal);
        assert_eq!(four_ab_cmp_one(0.5, -0.6, &mut w), Ordering::Greater);
        assert_eq!(four_ab_cmp_one(0.1, 1.0, &mut w), Ordering::Less);
        assert!(w.is_empty());
    }

    #[test]
    fn majority_and_ties() {
        use GrowthSuggestion::*;
        assert_eq!(majority_verdict(&[]), (Verdict::Indeterminate, 0.0));
        assert_eq!(majority_verdict(&[TransientConsistent, TransientConsistent, ErgodicConsistent]).0, Verdict::Transient);
        let (v, c) = majority_verdict(&[TransientConsistent, NullRecurrentConsistent]);
        assert_eq!((v, c), (Verdict::NullRecurrent, 0.5));
        assert_eq!(trajectory_verdict(0.9, 0.0), Verdict::Transient);
        assert_eq!(trajectory_verdict(0.1, 0.8), Verdict::Ergodic);
        assert_eq!(trajectory_verdict(0.1, 0.2), Verdict::NullRecurrent);
    }
}
