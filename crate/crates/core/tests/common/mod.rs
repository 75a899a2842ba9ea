#![allow(dead_code)]

use rwre_core::environment::JointAtom;
use rwre_core::{Clause, EnvironmentSpec, PerturbationSpec, Verdict, XiLaw, YLaw};

pub const EPS: f64 = 0.1;

pub fn spec(xi_law: XiLaw, y_law: YLaw, chi: PerturbationSpec) -> EnvironmentSpec {
    EnvironmentSpec { epsilon: EPS, xi_law, y_law, chi }
}

pub fn two_point(w: f64) -> XiLaw {
    XiLaw::TwoPoint { v1: 0.3, v2: 0.7, w }
}

pub fn constant_xi(c: f64) -> XiLaw {
    XiLaw::Degenerate { value: c }
}

pub fn y_const(b: f64) -> YLaw {
    YLaw::Degenerate { value: b }
}

pub fn power(a: f64, beta: f64) -> PerturbationSpec {
    PerturbationSpec::Power { a, beta }
}

/// Fixed-probability chain: `p_n = p` for every site.
pub fn geometric(p: f64) -> EnvironmentSpec {
    spec(constant_xi(p), y_const(0.0), PerturbationSpec::Zero)
}

/// Unperturbed two-point environment with zero mean log-ratio.
pub fn sinai() -> EnvironmentSpec {
    spec(two_point(0.5), y_const(0.0), PerturbationSpec::Zero)
}

/// Two-point environment with `P[xi = 0.7] = 0.7`, so `E[zeta] > 0`.
pub fn ergodic_two_point() -> EnvironmentSpec {
    spec(two_point(0.3), y_const(0.0), PerturbationSpec::Zero)
}

/// Mirror of `ergodic_two_point`, `E[zeta] < 0`.
pub fn transient_two_point() -> EnvironmentSpec {
    spec(two_point(0.7), y_const(0.0), PerturbationSpec::Zero)
}

pub fn ratio_symmetric_joint() -> YLaw {
    YLaw::Joint {
        table: vec![
            JointAtom { xi: 0.3, y: 0.2, weight: 0.5 },
            JointAtom { xi: 0.7, y: -0.2, weight: 0.5 },
        ],
    }
}

/// `lambda = 0` without the ratio symmetry.
pub fn lambda_zero_asymmetric_joint() -> YLaw {
    YLaw::Joint {
        table: vec![
            JointAtom { xi: 0.3, y: 0.4, weight: 0.25 },
            JointAtom { xi: 0.3, y: 0.0, weight: 0.25 },
            JointAtom { xi: 0.7, y: -0.2, weight: 0.5 },
        ],
    }
}

/// Environments used by the identity checks.
pub fn battery() -> Vec<(&'static str, EnvironmentSpec)> {
    vec![
        ("sinai", sinai()),
        ("sinai, Y=1, n^-1/4", spec(two_point(0.5), y_const(1.0), power(1.0, 0.25))),
        (
            "uniform xi, uniform Y",
            spec(XiLaw::Uniform { lo: 0.1, hi: 0.9 }, YLaw::Uniform { lo: -1.0, hi: 1.0 }, power(0.5, 0.5)),
        ),
        ("ergodic two-point", ergodic_two_point()),
        (
            "joint symmetric, critical envelope",
            spec(
                two_point(0.5),
                ratio_symmetric_joint(),
                PerturbationSpec::IterLogCritical { k: 1, c: 0.5, sign: 1, lambda_abs: 1.0, sigma: 1.0 },
            ),
        ),
    ]
}

pub struct Case {
    pub name: &'static str,
    pub spec: EnvironmentSpec,
    pub verdict: Verdict,
    pub clause: Clause,
}

fn case(name: &'static str, spec: EnvironmentSpec, verdict: Verdict, clause: Clause) -> Case {
    Case { name, spec, verdict, clause }
}

/// One environment per branch of the decision tree, with the expected verdict.
pub fn decision_table() -> Vec<Case> {
    use Clause::*;
    use Verdict::*;
    let sigma = (7.0f64 / 3.0).ln();
    let lambda = 1.0 / 0.21;
    let critical = |sign: i8| PerturbationSpec::IterLogCritical { k: 1, c: 0.5, sign, lambda_abs: lambda, sigma };
    vec![
        case("solomon, E zeta > 0", ergodic_two_point(), Ergodic, A),
        case("solomon, E zeta < 0", transient_two_point(), Transient, A),
        case(
            "perturbed, E zeta < 0",
            spec(two_point(0.7), y_const(1.0), power(1.0, 0.25)),
            Transient,
            A,
        ),
        case(
            "uniform xi, E zeta > 0",
            spec(XiLaw::Uniform { lo: 0.3, hi: 0.8 }, y_const(0.0), PerturbationSpec::Zero),
            Ergodic,
            A,
        ),
        case("solomon, E zeta = 0", sinai(), NullRecurrent, B),
        case(
            "uniform symmetric xi, unperturbed",
            spec(XiLaw::Uniform { lo: 0.2, hi: 0.8 }, y_const(0.0), PerturbationSpec::Zero),
            NullRecurrent,
            B,
        ),
        case("ratio-symmetric joint law", spec(two_point(0.5), ratio_symmetric_joint(), power(1.0, 0.1)), NullRecurrent, C),
        case(
            "independent uniforms",
            spec(XiLaw::Uniform { lo: 0.1, hi: 0.9 }, YLaw::Uniform { lo: -1.0, hi: 1.0 }, power(1.0, 0.25)),
            NullRecurrent,
            C,
        ),
        case("random xi, Y=1, n^-3/4", spec(two_point(0.5), y_const(1.0), power(1.0, 0.75)), NullRecurrent, D),
        case("random xi, Y=1, n^-1/4", spec(two_point(0.5), y_const(1.0), power(1.0, 0.25)), Ergodic, D),
        case("random xi, Y=-1, n^-1/4", spec(two_point(0.5), y_const(-1.0), power(1.0, 0.25)), Transient, D),
        case("loglog envelope above c_crit", spec(two_point(0.5), y_const(1.0), critical(1)), Ergodic, D),
        case("loglog envelope below c_crit", spec(two_point(0.5), y_const(1.0), critical(-1)), NullRecurrent, D),
        case("constant c < 1/2", spec(constant_xi(0.3), y_const(1.0), power(1.0, 0.5)), Transient, E),
        case("constant c > 1/2", spec(constant_xi(0.7), y_const(-1.0), power(1.0, 0.5)), Ergodic, E),
        case("fair coin, Y=1, n^-3/4", spec(constant_xi(0.5), y_const(1.0), power(1.0, 0.75)), Ergodic, E),
        case("fair coin, Y=-1, n^-3/4", spec(constant_xi(0.5), y_const(-1.0), power(1.0, 0.75)), Transient, E),
        case("fair coin, Y=1, n^-2", spec(constant_xi(0.5), y_const(1.0), power(1.0, 2.0)), NullRecurrent, E),
        case("fair coin, Y=1, 0.5/n", spec(constant_xi(0.5), y_const(1.0), power(0.5, 1.0)), Ergodic, E),
        case("fair coin, Y=1, 0.2/n", spec(constant_xi(0.5), y_const(1.0), power(0.2, 1.0)), NullRecurrent, E),
        case(
            "constant xi < 1/2, random Y",
            spec(constant_xi(0.3), YLaw::Uniform { lo: -1.0, hi: 1.0 }, power(1.0, 0.5)),
            Transient,
            F,
        ),
        case(
            "constant xi > 1/2, random Y",
            spec(constant_xi(0.6), YLaw::Uniform { lo: -1.0, hi: 1.0 }, power(1.0, 0.5)),
            Ergodic,
            F,
        ),
        case(
            "fair coin, symmetric Y",
            spec(constant_xi(0.5), YLaw::Uniform { lo: -1.0, hi: 1.0 }, power(1.0, 0.25)),
            NullRecurrent,
            F,
        ),
        case(
            "fair coin, E Y > 0, n^-1/2",
            spec(constant_xi(0.5), YLaw::Uniform { lo: 0.0, hi: 1.0 }, power(1.0, 0.5)),
            Ergodic,
            F,
        ),
        case(
            "fair coin, E Y < 0, n^-1/2",
            spec(constant_xi(0.5), YLaw::Uniform { lo: -1.0, hi: 0.0 }, power(1.0, 0.5)),
            Transient,
            F,
        ),
        case(
            "fair coin, E Y > 0, n^-3/2",
            spec(constant_xi(0.5), YLaw::Uniform { lo: 0.0, hi: 1.0 }, power(1.0, 1.5)),
            NullRecurrent,
            F,
        ),
        case(
            "lambda = 0 without symmetry",
            spec(two_point(0.5), lambda_zero_asymmetric_joint(), power(1.0, 0.5)),
            Indeterminate,
            G,
        ),
    ]
}
