//! Iterated-logarithm envelopes and the super/subcritical classification of
//! perturbations.
//!
//! All logarithms are natural. `log_k` is the k-fold iterate:
//! `log_1 x = ln x`, `log_k x = ln(log_{k-1} x)`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::environment::PerturbationSpec;
use crate::error::{domain, precondition, Result};
use crate::numeric::NeumaierSum;

/// Default depth of the criticality search.
pub const DEFAULT_K_MAX: u32 = 4;
/// Upper end of the search interval for the implicit constant.
pub const C_SEARCH_MAX: f64 = 100.0;
/// Absolute tolerance of the bisection on the implicit constant.
pub const C_TOLERANCE: f64 = 1e-6;

/// Relative tolerance under which two `sigma/|lambda|` prefactors are treated
/// as the same number.
const PREFACTOR_SNAP: f64 = 1e-9;

/// Coefficient `a_i` of the envelope: 3 for `i = 3`, 2 otherwise.
pub fn a_coeff(i: u32) -> f64 {
    if i == 3 {
        3.0
    } else {
        2.0
    }
}

/// `log_k x`, or `None` when an intermediate argument is not positive.
pub fn iter_log(k: u32, x: f64) -> Option<f64> {
    let mut v = x;
    for _ in 0..k {
        if !(v > 0.0) {
            return None;
        }
        v = v.ln();
    }
    Some(v)
}

/// Radicand of the envelope, `phi_k(x; d)^2`, when every nested log is defined.
pub fn phi_radicand(k: u32, x: f64, d: f64) -> Result<f64> {
    if k == 0 {
        return Err(precondition("envelope order k must be at least 1"));
    }
    let mut logs = Vec::with_capacity(k as usize + 1);
    let mut v = x;
    for level in 1..=k + 1 {
        if !(v > 0.0) {
            return Err(domain(format!("log_{level}({x}) is undefined")));
        }
        v = v.ln();
        logs.push(v);
    }
    // logs[i - 1] = log_i x
    let mut r = NeumaierSum::default();
    for i in 1..k {
        r.add(a_coeff(i + 1) * logs[i as usize]);
    }
    r.add((a_coeff(k + 1) + d) * logs[k as usize]);
    Ok(r.value())
}

/// The envelope `phi_k(x; d)`.
///
/// Defined wherever `log_{k+1} x` exists and the radicand is non-negative;
/// anything else is a domain error.
pub fn phi(k: u32, x: f64, d: f64) -> Result<f64> {
    let r = phi_radicand(k, x, d)?;
    if r < 0.0 {
        return Err(domain(format!("phi_{k}({x}; {d}) has negative radicand {r:e}")));
    }
    Ok(r.sqrt())
}

/// Smallest positive integer `n` with `log_{k+1}(n) >= 0`.
///
/// `None` when that integer does not fit in a `u64` (k >= 4).
pub fn n_k(k: u32) -> Option<u64> {
    if k == 0 {
        return Some(1);
    }
    // log_{k+1} n >= 0  <=>  n >= exp^k(1)
    let mut t = 1.0f64;
    for _ in 0..k {
        t = t.exp();
        if !t.is_finite() || t > 1.0e18 {
            return None;
        }
    }
    let ok = |n: u64| iter_log(k + 1, n as f64).is_some_and(|v| v >= 0.0);
    let mut n = (t.ceil() as u64).max(1);
    while n > 1 && ok(n - 1) {
        n -= 1;
    }
    while !ok(n) {
        n += 1;
    }
    Some(n)
}

fn n_k_or_err(k: u32) -> Result<u64> {
    n_k(k).ok_or_else(|| domain(format!("n_{k} is not representable as a 64-bit integer")))
}

/// `alpha_n = sum_{i=n_k}^{n} i^{-1/2} phi_k(i; d) - 2 n^{1/2} phi_k(n; d)`.
///
/// For `n < n_k` the sum is empty and only the envelope term remains.
pub fn phi_sum_residual(k: u32, d: f64, n: u64) -> Result<f64> {
    let start = n_k_or_err(k)?;
    let mut sum = NeumaierSum::default();
    for i in start..=n {
        let x = i as f64;
        sum.add(phi(k, x, d)? / x.sqrt());
    }
    let x = n as f64;
    Ok(sum.value() - 2.0 * x.sqrt() * phi(k, x, d)?)
}

/// `alpha_n` for every `n` in `[n_lo, n_hi]`, in one pass.
pub fn phi_sum_residuals(k: u32, d: f64, n_lo: u64, n_hi: u64) -> Result<Vec<f64>> {
    if n_lo > n_hi {
        return Ok(Vec::new());
    }
    let start = n_k_or_err(k)?;
    let mut sum = NeumaierSum::default();
    let mut out = Vec::with_capacity((n_hi - n_lo + 1) as usize);
    for i in start.min(n_lo)..=n_hi {
        let x = i as f64;
        let p = if i >= start || i >= n_lo {
            Some(phi(k, x, d)?)
        } else {
            None
        };
        if i >= start {
            sum.add(p.unwrap() / x.sqrt());
        }
        if i >= n_lo {
            out.push(sum.value() - 2.0 * x.sqrt() * p.unwrap());
        }
    }
    Ok(out)
}

/// Number of indices `n >= n_min` (1-based) with `S_n > s_n phi_k(s_n^2; eps)`.
///
/// `partial_sums[n-1] = S_n` and `variances[n-1] = s_n^2`. Indices where the
/// envelope is undefined are not eligible and are skipped.
pub fn lil_crossings(partial_sums: &[f64], variances: &[f64], k: u32, eps: f64, n_min: usize) -> usize {
    partial_sums
        .iter()
        .zip(variances)
        .enumerate()
        .skip(n_min.saturating_sub(1))
        .filter(|(_, (&s, &v))| match phi(k, v, eps) {
            Ok(env) => s > v.sqrt() * env,
            Err(_) => false,
        })
        .count()
}

/// Where the criticality inequality was certified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckedRange {
    /// Exact asymptotic comparison; holds for all large `n`.
    Asymptotic,
    /// Pointwise check over `n0..=n_max` only.
    Finite { n0: u64, n_max: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CriticalityStatus {
    Supercritical { k: u32, c: f64 },
    Subcritical { k: u32, c: f64 },
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalityVerdict {
    pub status: CriticalityStatus,
    pub checked_range: CheckedRange,
    pub k_max_searched: u32,
}

impl CriticalityVerdict {
    pub fn label(&self) -> String {
        match self.status {
            CriticalityStatus::Supercritical { k, c } => format!("{k}-supercritical(c={c:.6})"),
            CriticalityStatus::Subcritical { k, c } => format!("{k}-subcritical(c={c:.6})"),
            CriticalityStatus::Neither => "neither".to_string(),
        }
    }
}

// ---------------------------------------------------------------------------
// Asymptotic comparison.
//
// A perturbation is summarized by the eventual behaviour of
//     (chi(n) / ((sigma / 2|lambda|) n^{-1/2}))^2
// as a finite combination of scales ordered by dominance:
// n^p (p > 0)  >>  log_2 n >> log_3 n >> ...  >>  1  >>  n^p (p < 0).

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scale {
    Power(f64),
    Log(u32),
    Const,
}

impl Scale {
    fn rank(&self) -> (u8, f64) {
        match *self {
            Scale::Power(p) if p > 0.0 => (0, -p),
            Scale::Log(i) => (1, i as f64),
            Scale::Const => (2, 0.0),
            Scale::Power(p) => (3, -p),
        }
    }

    fn cmp_dominance(&self, other: &Self) -> Ordering {
        let (a, x) = self.rank();
        let (b, y) = other.rank();
        a.cmp(&b).then(x.total_cmp(&y))
    }
}

#[derive(Debug, Clone, Default)]
struct Asymptotic {
    terms: Vec<(Scale, f64)>,
}

impl Asymptotic {
    fn push(&mut self, scale: Scale, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        if let Some(t) = self.terms.iter_mut().find(|(s, _)| s.cmp_dominance(&scale) == Ordering::Equal) {
            t.1 += coeff;
        } else {
            self.terms.push((scale, coeff));
        }
        self.terms.sort_by(|a, b| a.0.cmp_dominance(&b.0));
    }

    /// Squared envelope `phi_j(n; d)^2` as a combination of log scales.
    fn envelope(j: u32, d: f64) -> Self {
        let mut a = Asymptotic::default();
        for i in 1..j {
            a.push(Scale::Log(i + 1), a_coeff(i + 1));
        }
        a.push(Scale::Log(j + 1), a_coeff(j + 1) + d);
        a
    }

    fn scaled(mut self, factor: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= factor;
        }
        self
    }

    /// Sign of the leading term: the eventual sign of the function.
    fn eventual_sign(&self) -> Ordering {
        self.terms
            .iter()
            .find(|(_, c)| *c != 0.0)
            .map(|(_, c)| c.total_cmp(&0.0))
            .unwrap_or(Ordering::Equal)
    }

    /// Eventual ordering of `self` against `other`.
    fn eventual_cmp(&self, other: &Self) -> Ordering {
        let mut diff = self.clone();
        for &(s, c) in &other.terms {
            diff.push(s, -c);
        }
        diff.eventual_sign()
    }
}

/// Supplies the "holds for constant c" predicates for one perturbation.
enum Checker<'a> {
    Analytic(Asymptotic),
    Pointwise { values: &'a [f64], prefactor: f64, n0: u64, n_max: u64 },
}

impl Checker<'_> {
    fn supercritical(&self, j: u32, c: f64) -> Option<bool> {
        match self {
            Checker::Analytic(a) => {
                let env = Asymptotic::envelope(j, c);
                Some(env.eventual_sign() != Ordering::Less && a.eventual_cmp(&env) != Ordering::Less)
            }
            Checker::Pointwise { .. } => self.pointwise(j, c, true),
        }
    }

    fn subcritical(&self, j: u32, c: f64) -> Option<bool> {
        match self {
            Checker::Analytic(a) => {
                let env = Asymptotic::envelope(j, -c);
                Some(env.eventual_sign() != Ordering::Less && a.eventual_cmp(&env) != Ordering::Greater)
            }
            Checker::Pointwise { .. } => self.pointwise(j, c, false),
        }
    }

    /// `None` when the range holds no point where `phi_j` is defined.
    fn pointwise(&self, j: u32, c: f64, upper: bool) -> Option<bool> {
        let Checker::Pointwise { values, prefactor, n0, n_max } = self else {
            unreachable!()
        };
        let start = (*n0).max(n_k(j)?);
        let end = (*n_max).min(values.len() as u64);
        if start > end {
            return None;
        }
        let d = if upper { c } else { -c };
        let holds = (start..=end).all(|n| {
            let x = n as f64;
            let chi = values[(n - 1) as usize];
            match phi(j, x, d) {
                Ok(env) => {
                    let bound = prefactor * env / x.sqrt();
                    if upper {
                        chi >= bound
                    } else {
                        chi <= bound
                    }
                }
                Err(_) => false,
            }
        });
        Some(holds)
    }
}

/// Largest `c` in `(0, C_SEARCH_MAX]` for which `holds(c)`, assuming the
/// predicate is true on an initial segment of the interval.
fn largest_constant(holds: impl Fn(f64) -> Option<bool>) -> Option<f64> {
    if holds(C_SEARCH_MAX)? {
        return Some(C_SEARCH_MAX);
    }
    let mut lo = C_TOLERANCE;
    if !holds(lo)? {
        return None;
    }
    let mut hi = C_SEARCH_MAX;
    while hi - lo > C_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if holds(mid).unwrap_or(false) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

fn checker<'a>(
    chi: &'a PerturbationSpec,
    lambda: f64,
    sigma: f64,
    n_range: Option<(u64, u64)>,
) -> Result<(Checker<'a>, CheckedRange)> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(precondition("criticality needs a finite nonzero lambda"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(precondition("criticality needs a finite positive sigma"));
    }
    let prefactor = sigma / (2.0 * lambda.abs());
    let analytic = |a: Asymptotic| Ok((Checker::Analytic(a), CheckedRange::Asymptotic));
    match chi {
        PerturbationSpec::Zero => analytic(Asymptotic::default()),
        PerturbationSpec::Power { a, beta } => {
            let k2 = (a / prefactor).powi(2);
            let e = 1.0 - 2.0 * beta;
            let mut form = Asymptotic::default();
            if e == 0.0 {
                form.push(Scale::Const, k2);
            } else {
                form.push(Scale::Power(e), k2);
            }
            analytic(form)
        }
        PerturbationSpec::IterLogCritical { k, c, sign, lambda_abs, sigma: own_sigma } => {
            let mut ratio = (own_sigma / lambda_abs) / (sigma / lambda.abs());
            if (ratio - 1.0).abs() <= PREFACTOR_SNAP {
                ratio = 1.0;
            }
            let d = f64::from(*sign) * c;
            analytic(Asymptotic::envelope(*k, d).scaled(ratio * ratio))
        }
        PerturbationSpec::Table { values } => {
            let len = values.len() as u64;
            let (n0, n_max) = n_range.unwrap_or(((len / 10).max(1), len));
            Ok((
                Checker::Pointwise { values, prefactor, n0, n_max },
                CheckedRange::Finite { n0, n_max },
            ))
        }
    }
}

/// Classify `chi` as k-supercritical, k-subcritical, or neither, for the
/// smallest `k <= k_max` where one of the two holds.
///
/// `n_range` only matters for tabulated perturbations; it defaults to the last
/// nine tenths of the table.
pub fn check_criticality(
    chi: &PerturbationSpec,
    lambda: f64,
    sigma: f64,
    k_max: u32,
    n_range: Option<(u64, u64)>,
) -> Result<CriticalityVerdict> {
    let (checker, checked_range) = checker(chi, lambda, sigma, n_range)?;
    let mut status = CriticalityStatus::Neither;
    for k in 1..=k_max {
        if let Some(c) = largest_constant(|c| checker.supercritical(k, c)) {
            status = CriticalityStatus::Supercritical { k, c };
            break;
        }
        if let Some(c) = largest_constant(|c| checker.subcritical(k, c)) {
            status = CriticalityStatus::Subcritical { k, c };
            break;
        }
    }
    Ok(CriticalityVerdict { status, checked_range, k_max_searched: k_max })
}

/// Whether `chi` satisfies the k-supercritical inequality with constant `c`.
pub fn is_supercritical(chi: &PerturbationSpec, lambda: f64, sigma: f64, k: u32, c: f64) -> Result<bool> {
    let (checker, _) = checker(chi, lambda, sigma, None)?;
    Ok(checker.supercritical(k, c).unwrap_or(false))
}

/// Whether `chi` satisfies the k-subcritical inequality with constant `c`.
pub fn is_subcritical(chi: &PerturbationSpec, lambda: f64, sigma: f64, k: u32, c: f64) -> Result<bool> {
    let (checker, _) = checker(chi, lambda, sigma, None)?;
    Ok(checker.subcritical(k, c).unwrap_or(false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn phi_hand_values() {
        let x = E.exp();
        assert!((phi(1, x, 0.0).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(phi(1, x, -2.0).unwrap(), 0.0);
        assert!(phi(1, x, -2.5).is_err());
        assert!(phi(1, 2.0, 0.0).is_err());
        assert!(phi(1, 0.5, 0.0).is_err());
        assert!(phi(0, 10.0, 0.0).is_err());
    }

    #[test]
    fn phi_two_at_triple_exponential() {
        // log_2 x = e and log_3 x = 1 at x = e^{e^e}
        let x = E.exp().exp();
        for d in [-1.0, 0.0, 0.5, 2.0] {
            let want = 2.0 * E + (3.0 + d);
            let got = phi_radicand(2, x, d).unwrap();
            assert!((got - want).abs() < 1e-12, "d={d}: {got} vs {want}");
        }
    }

    #[test]
    fn a_coefficients() {
        assert_eq!(a_coeff(3), 3.0);
        for i in [1, 2, 4, 5, 9] {
            assert_eq!(a_coeff(i), 2.0);
        }
    }

    #[test]
    fn n_k_by_scanning_integers() {
        for k in 1..=2u32 {
            let scanned = (1u64..).find(|&n| iter_log(k + 1, n as f64).is_some_and(|v| v >= 0.0)).unwrap();
            assert_eq!(n_k(k), Some(scanned));
        }
        assert_eq!(n_k(1), Some(3));
        assert_eq!(n_k(2), Some(16));
        assert_eq!(n_k(3), Some(3_814_280));
        assert!(iter_log(4, 3_814_279.0).unwrap() < 0.0);
        assert!(iter_log(4, 3_814_280.0).unwrap() >= 0.0);
        assert_eq!(n_k(4), None);
    }

    #[test]
    fn residual_single_term() {
        for (k, d) in [(1u32, 0.0), (2, 1.0), (1, -0.5)] {
            let nk = n_k(k).unwrap();
            let x = nk as f64;
            let p = phi(k, x, d).unwrap();
            let want = p / x.sqrt() - 2.0 * x.sqrt() * p;
            assert!((phi_sum_residual(k, d, nk).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_series_matches_pointwise() {
        let series = phi_sum_residuals(2, 1.0, 20, 400).unwrap();
        for (i, n) in (20..=400u64).enumerate().step_by(37) {
            let direct = phi_sum_residual(2, 1.0, n).unwrap();
            assert!((series[i] - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn lil_crossing_edge_cases() {
        let n = 5000;
        let var: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        assert_eq!(lil_crossings(&vec![0.0; n], &var, 1, 1.0, 100), 0);
        let s: Vec<f64> = var.iter().map(|&v| 2.0 * v.sqrt() * phi(1, v, 1.0).unwrap_or(0.0)).collect();
        let eligible = (100..=n).filter(|&i| phi(1, i as f64, 1.0).is_ok()).count();
        assert_eq!(lil_crossings(&s, &var, 1, 1.0, 100), eligible);
        assert_eq!(eligible, n - 99);
    }

    #[test]
    fn power_laws_against_the_half_exponent() {
        let sub = PerturbationSpec::Power { a: 1.0, beta: 0.75 };
        let v = check_criticality(&sub, 2.0, 0.8, DEFAULT_K_MAX, None).unwrap();
        assert!(matches!(v.status, CriticalityStatus::Subcritical { k: 1, c } if c > 0.0));
        let sup = PerturbationSpec::Power { a: 1.0, beta: 0.25 };
        let v = check_criticality(&sup, -3.0, 0.8, DEFAULT_K_MAX, None).unwrap();
        assert!(matches!(v.status, CriticalityStatus::Supercritical { k: 1, c } if c > 0.0));
        // bare n^{-1/2} loses to the growing envelope
        let half = PerturbationSpec::Power { a: 50.0, beta: 0.5 };
        let v = check_criticality(&half, 1.0, 0.5, DEFAULT_K_MAX, None).unwrap();
        assert!(matches!(v.status, CriticalityStatus::Subcritical { k: 1, .. }));
        assert_eq!(v.checked_range, CheckedRange::Asymptotic);
    }

    #[test]
    fn iterated_log_family_recovers_its_constant() {
        let (lambda, sigma) = (1.5, 0.9);
        for k in 1..=3u32 {
            for c in [0.3, 1.0, 1.7] {
                let sup = PerturbationSpec::IterLogCritical { k, c, sign: 1, lambda_abs: lambda, sigma };
                let v = check_criticality(&sup, lambda, sigma, DEFAULT_K_MAX, None).unwrap();
                match v.status {
                    CriticalityStatus::Supercritical { k: kk, c: cc } => {
                        assert_eq!(kk, k);
                        assert!(cc >= c / 2.0 && cc <= c + 1e-9, "{cc} vs {c}");
                    }
                    s => panic!("expected supercritical, got {s:?}"),
                }
                let sub = PerturbationSpec::IterLogCritical { k, c, sign: -1, lambda_abs: lambda, sigma };
                let v = check_criticality(&sub, -lambda, sigma, DEFAULT_K_MAX, None).unwrap();
                assert!(matches!(v.status, CriticalityStatus::Subcritical { k: kk, .. } if kk == k), "{v:?}");
            }
        }
    }

    #[test]
    fn log_log_form_above_critical_constant() {
        // chi(n) = c n^{-1/2} (log log n)^{1/2} / |lambda| with c > sigma / sqrt 2,
        // written through the k = 1 family with d = 0.
        let (lambda, sigma) = (2.0f64, 1.2f64);
        let c_crit = sigma / 2f64.sqrt();
        let c = 1.1 * c_crit;
        let chi = PerturbationSpec::IterLogCritical {
            k: 1,
            c: 0.0,
            sign: 1,
            lambda_abs: lambda,
            sigma: 2f64.sqrt() * c,
        };
        assert!(is_supercritical(&chi, lambda, sigma, 2, 1.0).unwrap());
        assert!(is_supercritical(&chi, lambda, sigma, 3, 1.0).unwrap());
        let v = check_criticality(&chi, lambda, sigma, DEFAULT_K_MAX, None).unwrap();
        assert!(matches!(v.status, CriticalityStatus::Supercritical { .. }));
        // at or below the critical constant it is subcritical
        let chi = PerturbationSpec::IterLogCritical { k: 1, c: 0.0, sign: 1, lambda_abs: lambda, sigma: 2f64.sqrt() * c_crit };
        assert!(is_subcritical(&chi, lambda, sigma, 2, 1.0).unwrap());
    }

    #[test]
    fn smaller_constants_inherit_the_inequality() {
        let chi = PerturbationSpec::IterLogCritical { k: 2, c: 1.4, sign: 1, lambda_abs: 1.0, sigma: 1.0 };
        for c in [1.4, 1.0, 0.5, 0.01] {
            assert!(is_supercritical(&chi, 1.0, 1.0, 2, c).unwrap());
        }
        assert!(!is_supercritical(&chi, 1.0, 1.0, 2, 1.5).unwrap());
    }

    #[test]
    fn tables_are_checked_pointwise() {
        let (lambda, sigma) = (1.0, 1.0);
        let pref = sigma / (2.0 * lambda);
        let n = 20_000usize;
        let above: Vec<f64> = (1..=n)
            .map(|i| {
                let x = i as f64;
                phi(1, x, 1.0).map(|p| 1.5 * pref * p / x.sqrt()).unwrap_or(1.0)
            })
            .collect();
        let v = check_criticality(&PerturbationSpec::Table { values: above }, lambda, sigma, 3, None).unwrap();
        assert!(matches!(v.status, CriticalityStatus::Supercritical { k: 1, .. }), "{v:?}");
        assert_eq!(v.checked_range, CheckedRange::Finite { n0: 2000, n_max: 20_000 });

        let below: Vec<f64> = (1..=n).map(|i| 0.1 / i as f64).collect();
        let v = check_criticality(&PerturbationSpec::Table { values: below }, lambda, sigma, 3, None).unwrap();
        assert!(matches!(v.status, CriticalityStatus::Subcritical { k: 1, .. }));

        // alternates between far above and far below the envelope
        let wild: Vec<f64> = (1..=n).map(|i| if i % 2 == 0 { 0.5 } else { 1e-9 }).collect();
        let v = check_criticality(&PerturbationSpec::Table { values: wild }, lambda, sigma, 3, None).unwrap();
        assert_eq!(v.status, CriticalityStatus::Neither);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let chi = PerturbationSpec::Power { a: 1.0, beta: 0.75 };
        assert!(check_criticality(&chi, 0.0, 1.0, 4, None).is_err());
        assert!(check_criticality(&chi, 1.0, 0.0, 4, None).is_err());
    }
}
