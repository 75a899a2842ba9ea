mod common;

use rwre_core::classifier::{EmpiricalBudget, Verdict};
use rwre_core::{classify, empirical_classify, nested_log_threshold, Clause, CriticalityStatus, PerturbationSpec, YLaw};

use common::*;

#[test]
fn decision_table_matches() {
    let mut seen = std::collections::HashSet::new();
    for c in decision_table() {
        let r = classify(&c.spec).unwrap_or_else(|e| panic!("{}: {e}", c.name));
        assert_eq!((r.verdict, r.source.clause), (c.verdict, c.clause), "{}: {}", c.name, r.source);
        assert!(r.almost_sure);
        seen.insert(c.clause);
    }
    assert_eq!(seen.len(), 7, "every clause is exercised");
}

#[test]
fn critical_exponent_contrast() {
    let deterministic = classify(&spec(constant_xi(0.5), y_const(1.0), power(1.0, 0.75))).unwrap();
    let random = classify(&spec(two_point(0.5), y_const(1.0), power(1.0, 0.75))).unwrap();
    assert_eq!(deterministic.verdict, Verdict::Ergodic);
    assert_eq!(random.verdict, Verdict::NullRecurrent);
    assert!(matches!(random.criticality.unwrap().status, CriticalityStatus::Subcritical { k: 1, .. }));
}

#[test]
fn zero_perturbation_with_nonzero_y_is_null() {
    let r = classify(&spec(two_point(0.5), y_const(1.0), PerturbationSpec::Zero)).unwrap();
    assert_eq!(r.verdict, Verdict::NullRecurrent);
}

#[test]
fn exact_decisions_carry_no_warnings() {
    for c in decision_table().iter().filter(|c| !matches!(c.spec.xi_law, rwre_core::XiLaw::Uniform { .. })) {
        let r = classify(&c.spec).unwrap();
        assert!(r.warnings.is_empty(), "{}: {:?}", c.name, r.warnings);
    }
}

#[test]
fn lambda_zero_reports_higher_moments() {
    let r = classify(&spec(two_point(0.5), lambda_zero_asymmetric_joint(), power(1.0, 0.5))).unwrap();
    assert_eq!(r.source.clause, Clause::G);
    assert_eq!(r.moments.lambda_r[0], r.moments.lambda);
    assert!(r.moments.lambda.abs() < 1e-12);
    assert!(r.moments.lambda_r[1].abs() > 1e-3);
    assert!(r.detail.unwrap().starts_with("lambda_r"));
}

#[test]
fn tabulated_fair_coin_perturbations() {
    let table = |f: &dyn Fn(f64) -> f64| PerturbationSpec::Table { values: (1..=100_000).map(|n| f(n as f64)).collect() };
    let strong = classify(&spec(constant_xi(0.5), y_const(1.0), table(&|n| n.powf(-0.75)))).unwrap();
    assert_eq!(strong.verdict, Verdict::Ergodic);
    assert!(strong.detail.unwrap().contains("[10000, 100000]"));
    let weak = classify(&spec(constant_xi(0.5), y_const(1.0), table(&|n| 0.1 / n))).unwrap();
    assert_eq!(weak.verdict, Verdict::NullRecurrent);
    let negative = classify(&spec(constant_xi(0.5), y_const(-1.0), table(&|n| n.powf(-0.75)))).unwrap();
    assert_eq!(negative.verdict, Verdict::Transient);
    // h slightly above 1 at depth 1: b chi = 1/(4n) + 1.5/(4n log n)
    let edge = classify(&spec(
        constant_xi(0.5),
        y_const(1.0),
        table(&|n| nested_log_threshold(n.max(3.0), 1, 1.5).unwrap()),
    ))
    .unwrap();
    assert_eq!(edge.verdict, Verdict::Ergodic);
}

#[test]
fn fair_coin_with_unsymmetric_zero_mean_y() {
    let y = YLaw::Discrete {
        atoms: vec![
            rwre_core::environment::Atom { value: -0.5, weight: 2.0 / 3.0 },
            rwre_core::environment::Atom { value: 1.0, weight: 1.0 / 3.0 },
        ],
    };
    let r = classify(&spec(constant_xi(0.5), y, power(1.0, 0.5))).unwrap();
    assert_eq!((r.verdict, r.source.clause), (Verdict::Indeterminate, Clause::F));
}

#[test]
fn empirical_agrees_on_clear_cases() {
    let budget = EmpiricalBudget { n_envs: 6, ledger_n: 20_000, t_max: 20_000, walks_per_env: 2, seed: 4 };
    let erg = empirical_classify(&geometric(0.75), &budget).unwrap();
    assert_eq!(erg.verdict, Verdict::Ergodic);
    assert_eq!(erg.confidence, 1.0);
    assert_eq!(erg.agrees_with_theory, Some(true));
    assert_eq!(erg.trajectory_verdict, Some(Verdict::Ergodic));

    let tr = empirical_classify(&geometric(0.25), &budget).unwrap();
    assert_eq!(tr.verdict, Verdict::Transient);
    assert_eq!(tr.confidence, 1.0);
    assert_eq!(tr.agrees_with_theory, Some(true));
    assert_eq!(tr.trajectory_verdict, Some(Verdict::Transient));

    let up = spec(two_point(0.5), y_const(1.0), power(1.0, 0.25));
    let r = empirical_classify(&up, &EmpiricalBudget { t_max: 0, ..budget }).unwrap();
    assert_eq!(r.theory.verdict, Verdict::Ergodic);
    assert_eq!(r.verdict, Verdict::Ergodic);
    assert!(r.trajectory_verdict.is_none());
}

#[test]
fn empirical_symmetric_majority_is_null() {
    let budget = EmpiricalBudget { n_envs: 5, ledger_n: 10_000, t_max: 10_000, walks_per_env: 2, seed: 9 };
    let r = empirical_classify(&geometric(0.5), &budget).unwrap();
    assert_eq!(r.verdict, Verdict::NullRecurrent);
    assert!(r.confidence > 0.5);
    assert_eq!(r.agrees_with_theory, Some(true));
}

#[test]
fn empirical_ergodic_two_point_at_a_million() {
    let budget = EmpiricalBudget { n_envs: 20, ledger_n: 1_000_000, t_max: 0, walks_per_env: 0, seed: 0 };
    let r = empirical_classify(&ergodic_two_point(), &budget).unwrap();
    assert_eq!(r.theory.verdict, Verdict::Ergodic);
    assert_eq!(r.verdict, Verdict::Ergodic);
    assert!(r.confidence >= 0.8, "{}", r.confidence);
}

#[test]
fn empirical_flags_short_transient_walks() {
    let budget = EmpiricalBudget { n_envs: 4, ledger_n: 2_000, t_max: 10, walks_per_env: 2, seed: 1 };
    let r = empirical_classify(&transient_two_point(), &budget).unwrap();
    assert_eq!(r.verdict, Verdict::Transient);
    assert_ne!(r.trajectory_verdict, Some(Verdict::Transient));
    assert_eq!(r.agrees_with_theory, Some(false));
}

#[test]
fn empirical_needs_a_budget() {
    let budget = EmpiricalBudget { n_envs: 0, ledger_n: 10, t_max: 0, walks_per_env: 0, seed: 0 };
    assert!(empirical_classify(&sinai(), &budget).is_err());
}
