//! Exact sign and symmetry facts about an environment law.
//!
//! Parameters written as short decimals (0.3, 1/3, ...) are recovered as
//! rationals and every equality is decided in exact arithmetic. Anything that
//! cannot be decided that way falls back to a floating tolerance and leaves a
//! warning behind.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::law::{EnvironmentSpec, XiLaw, YLaw};
use crate::error::Result;

type Q = BigRational;

/// Tolerance used when a fact has to be decided in floating point.
pub const FLOAT_TOLERANCE: f64 = 1e-9;
const MAX_DENOMINATOR: i128 = 1_000_000;
/// Largest power product (in bits) built when comparing `E[zeta]` with zero.
const MAX_PRODUCT_BITS: u64 = 1 << 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawFacts {
    /// `Some(c)` when `xi = c` almost surely.
    pub xi_degenerate: Option<f64>,
    pub sigma2_positive: bool,
    #[serde(with = "ordering")]
    pub mean_zeta_sign: Ordering,
    /// `c` against 1/2 for a degenerate xi law.
    #[serde(with = "ordering_opt")]
    pub half_cmp: Option<Ordering>,
    #[serde(with = "ordering")]
    pub lambda_sign: Ordering,
    pub y_zero: bool,
    pub y_var_zero: bool,
    /// `Some(b)` when `Y = b` almost surely.
    pub y_value: Option<f64>,
    #[serde(with = "ordering")]
    pub mean_y_sign: Ordering,
    /// `Y` and `-Y` have the same law.
    pub y_symmetric: bool,
    /// `Y/xi` and `-Y/(1 - xi)` have the same law.
    pub ratio_symmetric: bool,
    pub warnings: Vec<String>,
}

impl LawFacts {
    /// Every fact was decided in exact arithmetic.
    pub fn exact(&self) -> bool {
        self.warnings.is_empty()
    }
}

mod ordering {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::cmp::Ordering;

    pub fn serialize<S: Serializer>(o: &Ordering, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i8(*o as i8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Ordering, D::Error> {
        Ok(i8::deserialize(d)?.cmp(&0))
    }
}

mod ordering_opt {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::cmp::Ordering;

    pub fn serialize<S: Serializer>(o: &Option<Ordering>, s: S) -> Result<S::Ok, S::Error> {
        match o {
            Some(o) => s.serialize_some(&(*o as i8)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Ordering>, D::Error> {
        Ok(Option::<i8>::deserialize(d)?.map(|v| v.cmp(&0)))
    }
}

/// Smallest-denominator rational (denominator up to 10^6) that rounds to `x`.
pub fn recover_rational(x: f64) -> Option<Q> {
    if !x.is_finite() {
        return None;
    }
    let neg = x < 0.0;
    let target = x.abs();
    let (mut h1, mut h2) = (1i128, 0i128);
    let (mut k1, mut k2) = (0i128, 1i128);
    let mut r = target;
    for _ in 0..64 {
        let a = r.floor();
        if a > 1e15 {
            return None;
        }
        let a = a as i128;
        let h = a * h1 + h2;
        let k = a * k1 + k2;
        if k > MAX_DENOMINATOR {
            return None;
        }
        if h as f64 / k as f64 == target {
            let h = if neg { -h } else { h };
            return Some(Q::new(BigInt::from(h), BigInt::from(k)));
        }
        let frac = r - a as f64;
        if frac == 0.0 {
            return None;
        }
        r = 1.0 / frac;
        (h2, h1) = (h1, h);
        (k2, k1) = (k1, k);
    }
    None
}

struct Ctx {
    warnings: Vec<String>,
}

impl Ctx {
    fn q(&mut self, x: f64) -> Q {
        recover_rational(x).unwrap_or_else(|| {
            self.warnings.push(format!("{x} is not a short rational; its binary value is used as exact"));
            Q::from_float(x).expect("validated parameters are finite")
        })
    }

    fn float_sign(&mut self, what: &str, v: f64) -> Ordering {
        self.warnings.push(format!("{what} decided in floating point (value {v:e}, tolerance {FLOAT_TOLERANCE:e})"));
        if v.abs() <= FLOAT_TOLERANCE {
            Ordering::Equal
        } else {
            v.total_cmp(&0.0)
        }
    }
}

fn sign(q: &Q) -> Ordering {
    q.cmp(&Q::zero())
}

fn half() -> Q {
    Q::new(BigInt::one(), BigInt::from(2))
}

/// Law of `Y` given one xi atom.
#[derive(Debug, Clone)]
enum Cond {
    Point(Q),
    Uniform(Q, Q),
}

impl Cond {
    fn mean(&self) -> Q {
        match self {
            Cond::Point(y) => y.clone(),
            Cond::Uniform(lo, hi) => (lo + hi) * half(),
        }
    }

    /// Law of `factor * Y`.
    fn scaled(&self, factor: &Q) -> Cond {
        match self {
            Cond::Point(y) => Cond::Point(y * factor),
            Cond::Uniform(lo, hi) => {
                let (a, b) = (lo * factor, hi * factor);
                if a <= b {
                    Cond::Uniform(a, b)
                } else {
                    Cond::Uniform(b, a)
                }
            }
        }
    }
}

/// A finite mixture of point masses and uniform pieces.
#[derive(Debug, Clone, Default)]
struct Mixed {
    atoms: Vec<(Q, Q)>,
    pieces: Vec<(Q, Q, Q)>,
}

impl Mixed {
    fn push(&mut self, c: &Cond, w: Q) {
        if w.is_zero() {
            return;
        }
        match c {
            Cond::Point(y) => self.atoms.push((y.clone(), w)),
            Cond::Uniform(lo, hi) => self.pieces.push((lo.clone(), hi.clone(), w)),
        }
    }

    fn atom_map(&self) -> BTreeMap<Q, Q> {
        let mut m: BTreeMap<Q, Q> = BTreeMap::new();
        for (v, w) in &self.atoms {
            *m.entry(v.clone()).or_insert_with(Q::zero) += w;
        }
        m.retain(|_, w| !w.is_zero());
        m
    }

    fn density_at(&self, x0: &Q, x1: &Q) -> Q {
        self.pieces
            .iter()
            .filter(|(lo, hi, _)| lo <= x0 && x1 <= hi)
            .fold(Q::zero(), |acc, (lo, hi, w)| acc + w / (hi - lo))
    }

    fn same_law(&self, other: &Mixed) -> bool {
        if self.atom_map() != other.atom_map() {
            return false;
        }
        let cuts: BTreeSet<Q> = self
            .pieces
            .iter()
            .chain(&other.pieces)
            .flat_map(|(lo, hi, _)| [lo.clone(), hi.clone()])
            .collect();
        let cuts: Vec<Q> = cuts.into_iter().collect();
        cuts.windows(2).all(|w| self.density_at(&w[0], &w[1]) == other.density_at(&w[0], &w[1]))
    }

    fn negated(&self) -> Mixed {
        Mixed {
            atoms: self.atoms.iter().map(|(v, w)| (-v, w.clone())).collect(),
            pieces: self.pieces.iter().map(|(lo, hi, w)| (-hi, -lo, w.clone())).collect(),
        }
    }

    fn mean(&self) -> Q {
        let a = self.atoms.iter().fold(Q::zero(), |acc, (v, w)| acc + v * w);
        self.pieces.iter().fold(a, |acc, (lo, hi, w)| acc + (lo + hi) * half() * w)
    }

    fn is_zero(&self) -> bool {
        self.pieces.is_empty() && self.atom_map().keys().all(|v| v.is_zero())
    }

    fn is_point(&self) -> Option<Q> {
        let m = self.atom_map();
        if self.pieces.is_empty() && m.len() == 1 {
            m.into_keys().next()
        } else {
            None
        }
    }
}

/// The independent (non-coupled) Y law as a mixture.
fn independent_y(ctx: &mut Ctx, y: &YLaw) -> Option<Vec<(Cond, Q)>> {
    match y {
        YLaw::Degenerate { value } => Some(vec![(Cond::Point(ctx.q(*value)), Q::one())]),
        YLaw::Discrete { atoms } => Some(
            atoms
                .iter()
                .filter(|a| a.weight > 0.0)
                .map(|a| (Cond::Point(ctx.q(a.value)), ctx.q(a.weight)))
                .collect(),
        ),
        YLaw::Uniform { lo, hi } => Some(vec![(Cond::Uniform(ctx.q(*lo), ctx.q(*hi)), Q::one())]),
        YLaw::Joint { .. } | YLaw::Affine { .. } => None,
    }
}

fn bits(x: &BigInt) -> u64 {
    x.bits().max(1)
}

/// Sign of `sum_i w_i log(v_i / (1 - v_i))`, by comparing integer powers.
fn mean_zeta_sign(ctx: &mut Ctx, xi: &[(Q, Q)]) -> Ordering {
    let denom = xi.iter().fold(BigInt::one(), |acc, (_, w)| num_integer::lcm(acc, w.denom().clone()));
    let mut exps = Vec::with_capacity(xi.len());
    let mut total_bits = 0u64;
    for (v, w) in xi {
        let a = (w * Q::from_integer(denom.clone())).to_integer();
        let r = v / (Q::one() - v);
        let Some(e) = a.to_u32() else {
            total_bits = u64::MAX;
            break;
        };
        total_bits = total_bits.saturating_add(u64::from(e).saturating_mul(bits(r.numer()) + bits(r.denom())));
        exps.push((r, e));
    }
    if total_bits > MAX_PRODUCT_BITS {
        let v: f64 = xi
            .iter()
            .map(|(v, w)| {
                let v = v.to_f64().unwrap();
                w.to_f64().unwrap() * (v / (1.0 - v)).ln()
            })
            .sum();
        return ctx.float_sign("sign of E[zeta]", v);
    }
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for (r, e) in exps {
        num *= r.numer().magnitude().pow(e);
        den *= r.denom().magnitude().pow(e);
    }
    num.cmp(&den)
}

/// Exact facts needed by the classification rules.
pub fn law_facts(spec: &EnvironmentSpec) -> Result<LawFacts> {
    spec.validate()?;
    let mut ctx = Ctx { warnings: Vec::new() };
    let facts = match &spec.xi_law {
        XiLaw::Uniform { lo, hi } => uniform_facts(&mut ctx, spec, *lo, *hi),
        law => finite_facts(&mut ctx, spec, law),
    };
    Ok(LawFacts { warnings: ctx.warnings, ..facts })
}

fn finite_facts(ctx: &mut Ctx, spec: &EnvironmentSpec, law: &XiLaw) -> LawFacts {
    // merged xi atoms
    let mut xi_map: BTreeMap<Q, Q> = BTreeMap::new();
    let exact_atoms: Vec<(Q, Q)> = match law {
        // the second weight is 1 - w, which floats round away from the intended rational
        XiLaw::TwoPoint { v1, v2, w } => {
            let w = ctx.q(*w);
            vec![(ctx.q(*v1), w.clone()), (ctx.q(*v2), Q::one() - w)]
        }
        _ => law.atoms().unwrap().iter().map(|a| (ctx.q(a.value), ctx.q(a.weight))).collect(),
    };
    for (v, w) in exact_atoms.into_iter().filter(|(_, w)| w.is_positive()) {
        *xi_map.entry(v).or_insert_with(Q::zero) += w;
    }
    let xi: Vec<(Q, Q)> = xi_map.into_iter().collect();

    // (xi value, probability, conditional Y)
    let mut comps: Vec<(Q, Q, Cond)> = Vec::new();
    match &spec.y_law {
        YLaw::Joint { table } => {
            for c in table.iter().filter(|c| c.weight > 0.0) {
                comps.push((ctx.q(c.xi), ctx.q(c.weight), Cond::Point(ctx.q(c.y))));
            }
        }
        YLaw::Affine { intercept, slope } => {
            let (a, b) = (ctx.q(*intercept), ctx.q(*slope));
            for (v, w) in &xi {
                comps.push((v.clone(), w.clone(), Cond::Point(&a + &b * v)));
            }
        }
        y => {
            let ys = independent_y(ctx, y).unwrap();
            for (v, w) in &xi {
                for (c, wy) in &ys {
                    comps.push((v.clone(), w * wy, c.clone()));
                }
            }
        }
    }

    let mut y_law = Mixed::default();
    let mut r1 = Mixed::default();
    let mut r2 = Mixed::default();
    let mut lambda = Q::zero();
    for (v, w, c) in &comps {
        let one_minus = Q::one() - v;
        y_law.push(c, w.clone());
        r1.push(&c.scaled(&v.recip()), w.clone());
        r2.push(&c.scaled(&-one_minus.recip()), w.clone());
        lambda += w * c.mean() / (v * &one_minus);
    }
    let y_point = y_law.is_point();
    let degenerate = if xi.len() == 1 { Some(xi[0].0.clone()) } else { None };
    LawFacts {
        xi_degenerate: degenerate.as_ref().map(|c| c.to_f64().unwrap()),
        sigma2_positive: xi.len() > 1,
        mean_zeta_sign: mean_zeta_sign(ctx, &xi),
        half_cmp: degenerate.map(|c| c.cmp(&half())),
        lambda_sign: sign(&lambda),
        y_zero: y_law.is_zero(),
        y_var_zero: y_point.is_some(),
        y_value: y_point.map(|b| b.to_f64().unwrap()),
        mean_y_sign: sign(&y_law.mean()),
        y_symmetric: y_law.same_law(&y_law.negated()),
        ratio_symmetric: r1.same_law(&r2),
        warnings: Vec::new(),
    }
}

fn uniform_facts(ctx: &mut Ctx, spec: &EnvironmentSpec, lo_f: f64, hi_f: f64) -> LawFacts {
    let (lo, hi) = (ctx.q(lo_f), ctx.q(hi_f));
    let xi_sum = &lo + &hi;
    let xi_symmetric = xi_sum == Q::one();
    // log(x/(1-x)) is odd about 1/2 and increasing, so the sign of its mean
    // over [lo, hi] is the side the interval leans to
    let mean_zeta_sign = xi_sum.cmp(&Q::one());
    let base = LawFacts {
        xi_degenerate: None,
        sigma2_positive: true,
        mean_zeta_sign,
        half_cmp: None,
        lambda_sign: Ordering::Equal,
        y_zero: false,
        y_var_zero: false,
        y_value: None,
        mean_y_sign: Ordering::Equal,
        y_symmetric: false,
        ratio_symmetric: false,
        warnings: Vec::new(),
    };
    match &spec.y_law {
        YLaw::Affine { intercept, slope } => {
            let (a, b) = (ctx.q(*intercept), ctx.q(*slope));
            let mean_y = &a + &b * &xi_sum * half();
            let y_zero = a.is_zero() && b.is_zero();
            let y_symmetric = if b.is_zero() { a.is_zero() } else { mean_y.is_zero() };
            // (Y, xi) and (-Y, 1 - xi) share a law when 2a + b = 0 and xi is symmetric
            let pair_symmetric = y_zero || (xi_symmetric && (&a * BigInt::from(2) + &b).is_zero());
            let lambda_sign = if pair_symmetric {
                Ordering::Equal
            } else {
                // (a + b x) / (x (1 - x)) = a / x + (a + b) / (1 - x)
                let (af, bf) = (*intercept, *slope);
                let v = (af * (hi_f / lo_f).ln() + (af + bf) * ((1.0 - lo_f) / (1.0 - hi_f)).ln()) / (hi_f - lo_f);
                ctx.float_sign("sign of lambda", v)
            };
            let ratio_symmetric = if pair_symmetric {
                true
            } else {
                if lambda_sign == Ordering::Equal {
                    ctx.warnings.push("law of Y/xi against -Y/(1-xi) not decided exactly; treated as different".into());
                }
                false
            };
            LawFacts {
                lambda_sign,
                y_zero,
                y_var_zero: b.is_zero(),
                y_value: if b.is_zero() { a.to_f64() } else { None },
                mean_y_sign: sign(&mean_y),
                y_symmetric,
                ratio_symmetric,
                ..base
            }
        }
        y => {
            let Some(ys) = independent_y(ctx, y) else {
                unreachable!("validated joint tables have a finite xi law")
            };
            let mut y_law = Mixed::default();
            for (c, w) in &ys {
                y_law.push(c, w.clone());
            }
            let mean_y = y_law.mean();
            let y_zero = y_law.is_zero();
            let y_symmetric = y_law.same_law(&y_law.negated());
            let y_point = y_law.is_point();
            // independence: lambda = E[Y] E[1 / (xi (1 - xi))]
            let lambda_sign = sign(&mean_y);
            let ratio_symmetric = if y_zero || (xi_symmetric && y_symmetric) {
                true
            } else {
                if lambda_sign == Ordering::Equal {
                    ctx.warnings.push("law of Y/xi against -Y/(1-xi) not decided exactly; treated as different".into());
                }
                false
            };
            LawFacts {
                lambda_sign,
                y_zero,
                y_var_zero: y_point.is_some(),
                y_value: y_point.map(|b| b.to_f64().unwrap()),
                mean_y_sign: sign(&mean_y),
                y_symmetric,
                ratio_symmetric,
                ..base
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{Atom, JointAtom, PerturbationSpec};

    fn spec(xi_law: XiLaw, y_law: YLaw) -> EnvironmentSpec {
        EnvironmentSpec { epsilon: 0.1, xi_law, y_law, chi: PerturbationSpec::Zero }
    }

    fn q(n: i64, d: i64) -> Q {
        Q::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn short_decimals_become_rationals() {
        assert_eq!(recover_rational(0.3), Some(q(3, 10)));
        assert_eq!(recover_rational(-0.75), Some(q(-3, 4)));
        assert_eq!(recover_rational(1.0 / 3.0), Some(q(1, 3)));
        assert_eq!(recover_rational(0.0), Some(q(0, 1)));
        assert_eq!(recover_rational(2.0), Some(q(2, 1)));
        assert_eq!(recover_rational(0.123_456_789_012_345), None);
        assert_eq!(recover_rational(f64::NAN), None);
    }

    #[test]
    fn sign_of_mean_log_ratio() {
        let two = |w| law_facts(&spec(XiLaw::TwoPoint { v1: 0.3, v2: 0.7, w }, YLaw::Degenerate { value: 0.0 })).unwrap();
        assert_eq!(two(0.5).mean_zeta_sign, Ordering::Equal);
        // P[xi = 0.7] = 0.7 leans towards moving down
        assert_eq!(two(0.3).mean_zeta_sign, Ordering::Greater);
        assert_eq!(two(0.7).mean_zeta_sign, Ordering::Less);
        assert!(two(0.5).exact());

        // log(2/3) + log(3/2) = 0 with unequal-looking atoms
        let f = law_facts(&spec(
            XiLaw::Discrete { atoms: vec![Atom { value: 0.4, weight: 0.5 }, Atom { value: 0.6, weight: 0.5 }] },
            YLaw::Degenerate { value: 1.0 },
        ))
        .unwrap();
        assert_eq!(f.mean_zeta_sign, Ordering::Equal);
        let f = law_facts(&spec(
            XiLaw::Discrete { atoms: vec![Atom { value: 0.25, weight: 2.0 / 3.0 }, Atom { value: 0.9, weight: 1.0 / 3.0 }] },
            YLaw::Degenerate { value: 0.0 },
        ))
        .unwrap();
        // (1/3)^{2/3} 9^{1/3} = 1
        assert_eq!(f.mean_zeta_sign, Ordering::Equal);
        assert!(f.exact());
    }

    #[test]
    fn uniform_xi_facts() {
        let f = law_facts(&spec(XiLaw::Uniform { lo: 0.1, hi: 0.9 }, YLaw::Uniform { lo: -1.0, hi: 1.0 })).unwrap();
        assert_eq!(f.mean_zeta_sign, Ordering::Equal);
        assert_eq!(f.lambda_sign, Ordering::Equal);
        assert!(f.ratio_symmetric && f.y_symmetric && f.exact());
        let f = law_facts(&spec(XiLaw::Uniform { lo: 0.2, hi: 0.9 }, YLaw::Degenerate { value: -0.5 })).unwrap();
        assert_eq!(f.mean_zeta_sign, Ordering::Greater);
        assert_eq!(f.lambda_sign, Ordering::Less);
        assert!(!f.ratio_symmetric);
        let f = law_facts(&spec(XiLaw::Uniform { lo: 0.1, hi: 0.9 }, YLaw::Affine { intercept: 0.5, slope: -1.0 })).unwrap();
        assert!(f.ratio_symmetric && f.exact());
        assert_eq!(f.lambda_sign, Ordering::Equal);
        let f = law_facts(&spec(XiLaw::Uniform { lo: 0.1, hi: 0.9 }, YLaw::Affine { intercept: 0.5, slope: 0.0 })).unwrap();
        assert_eq!(f.lambda_sign, Ordering::Greater);
        assert!(!f.exact());
    }

    #[test]
    fn ratio_symmetry_on_joint_tables() {
        let xi = XiLaw::TwoPoint { v1: 0.3, v2: 0.7, w: 0.5 };
        // Y = 0.5 (1 - 2 xi) pairs with the mirror image (-Y, 1 - xi)
        let sym = law_facts(&spec(
            xi.clone(),
            YLaw::Joint {
                table: vec![JointAtom { xi: 0.3, y: 0.2, weight: 0.5 }, JointAtom { xi: 0.7, y: -0.2, weight: 0.5 }],
            },
        ))
        .unwrap();
        assert!(sym.ratio_symmetric);
        assert_eq!(sym.lambda_sign, Ordering::Equal);
        // lambda vanishes without the symmetry
        let asym = law_facts(&spec(
            xi,
            YLaw::Joint {
                table: vec![
                    JointAtom { xi: 0.3, y: 0.4, weight: 0.25 },
                    JointAtom { xi: 0.3, y: 0.0, weight: 0.25 },
                    JointAtom { xi: 0.7, y: -0.2, weight: 0.5 },
                ],
            },
        ))
        .unwrap();
        assert_eq!(asym.lambda_sign, Ordering::Equal);
        assert!(!asym.ratio_symmetric);
        assert!(asym.exact());
    }

    #[test]
    fn mixtures_of_uniforms_compare_by_density() {
        let mut a = Mixed::default();
        a.push(&Cond::Uniform(q(0, 1), q(2, 1)), q(1, 1));
        let mut b = Mixed::default();
        b.push(&Cond::Uniform(q(0, 1), q(1, 1)), q(1, 2));
        b.push(&Cond::Uniform(q(1, 1), q(2, 1)), q(1, 2));
        assert!(a.same_law(&b));
        let mut c = Mixed::default();
        c.push(&Cond::Uniform(q(0, 1), q(1, 1)), q(1, 3));
        c.push(&Cond::Uniform(q(1, 1), q(2, 1)), q(2, 3));
        assert!(!a.same_law(&c));
        assert!(!a.same_law(&a.negated()));
    }

    #[test]
    fn degenerate_facts() {
        let f = law_facts(&spec(XiLaw::Degenerate { value: 0.5 }, YLaw::Degenerate { value: -0.25 })).unwrap();
        assert_eq!(f.xi_degenerate, Some(0.5));
        assert_eq!(f.half_cmp, Some(Ordering::Equal));
        assert!(!f.sigma2_positive && f.y_var_zero);
        assert_eq!(f.y_value, Some(-0.25));
        let f = law_facts(&spec(
            XiLaw::Degenerate { value: 0.5 },
            YLaw::Discrete { atoms: vec![Atom { value: -0.5, weight: 0.5 }, Atom { value: 0.5, weight: 0.5 }] },
        ))
        .unwrap();
        assert!(f.y_symmetric && !f.y_var_zero);
        assert_eq!(f.mean_y_sign, Ordering::Equal);
    }
}
