use serde::{Deserialize, Serialize};

use super::law::{EnvironmentSpec, Sampler, XiLaw, YLaw};
use crate::error::{precondition, Error, Result};
use crate::numeric::integrate;
use crate::rng::{stream, CounterRng};

pub const DEFAULT_R_MAX: usize = 5;
const QUAD_REL_TOL: f64 = 1e-10;
const QUAD_ABS_TOL: f64 = 1e-14;
const FALLBACK_SAMPLES: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentMethod {
    Analytic,
    Quadrature,
    MonteCarlo { samples: u64, seed: u64 },
}

/// Standard errors attached to Monte Carlo estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentErrors {
    pub mean_zeta: f64,
    pub sigma2: f64,
    pub lambda: f64,
    pub lambda_r: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean_zeta: f64,
    pub sigma2: f64,
    pub lambda: f64,
    /// `lambda_r[r - 1]` for `r = 1..=r_max`.
    pub lambda_r: Vec<f64>,
    pub method: MomentMethod,
    pub standard_errors: Option<MomentErrors>,
}

impl MomentSummary {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

#[inline]
fn zeta(v: f64) -> f64 {
    (v / (1.0 - v)).ln()
}

/// Integrand weight of `lambda_r` given `xi = v` and `E[Y^r | xi = v] = m`.
#[inline]
fn lambda_r_term(r: usize, v: f64, m: f64) -> f64 {
    let ri = r as i32;
    let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
    m * ((1.0 - v).powi(-ri) + sign * v.powi(-ri)) / r as f64
}

/// Law of `Y` given one xi atom.
#[derive(Debug, Clone, Copy)]
enum Cond {
    Point(f64),
    Uniform(f64, f64),
}

impl Cond {
    fn moment(&self, r: usize) -> f64 {
        match *self {
            Cond::Point(y) => y.powi(r as i32),
            Cond::Uniform(lo, hi) => {
                let k = r as i32 + 1;
                (hi.powi(k) - lo.powi(k)) / (k as f64 * (hi - lo))
            }
        }
    }
}

/// `(xi value, probability, conditional Y law)` for a finite xi law, with
/// equal xi values merged into one component per Y piece.
fn finite_components(spec: &EnvironmentSpec) -> Option<Vec<(f64, f64, Cond)>> {
    let atoms = spec.xi_law.atoms()?;
    let mut xi: Vec<(f64, f64)> = Vec::new();
    for a in atoms.iter().filter(|a| a.weight > 0.0) {
        match xi.iter_mut().find(|e| e.0 == a.value) {
            Some(e) => e.1 += a.weight,
            None => xi.push((a.value, a.weight)),
        }
    }
    let mut out = Vec::new();
    for &(v, w) in &xi {
        match &spec.y_law {
            YLaw::Degenerate { value } => out.push((v, w, Cond::Point(*value))),
            YLaw::Discrete { atoms } => {
                for a in atoms.iter().filter(|a| a.weight > 0.0) {
                    out.push((v, w * a.weight, Cond::Point(a.value)));
                }
            }
            YLaw::Uniform { lo, hi } => out.push((v, w, Cond::Uniform(*lo, *hi))),
            YLaw::Joint { table } => {
                for c in table.iter().filter(|c| c.weight > 0.0 && c.xi == v) {
                    out.push((v, c.weight, Cond::Point(c.y)));
                }
            }
            YLaw::Affine { intercept, slope } => out.push((v, w, Cond::Point(intercept + slope * v))),
        }
    }
    Some(out)
}

fn analytic(spec: &EnvironmentSpec, r_max: usize) -> Result<MomentSummary> {
    let comps = finite_components(spec)
        .ok_or_else(|| precondition("analytic moments need a finite xi law; use quadrature for continuous laws"))?;
    let mut xi: Vec<(f64, f64)> = Vec::new();
    for &(v, w, _) in &comps {
        match xi.iter_mut().find(|e| e.0 == v) {
            Some(e) => e.1 += w,
            None => xi.push((v, w)),
        }
    }
    let mean_zeta: f64 = xi.iter().map(|&(v, w)| w * zeta(v)).sum();
    let sigma2: f64 = if xi.len() == 1 {
        0.0
    } else {
        xi.iter().map(|&(v, w)| w * (zeta(v) - mean_zeta).powi(2)).sum()
    };
    let lambda_r: Vec<f64> = (1..=r_max.max(1))
        .map(|r| comps.iter().map(|&(v, w, c)| w * lambda_r_term(r, v, c.moment(r))).sum())
        .collect();
    Ok(MomentSummary {
        mean_zeta,
        sigma2,
        lambda: lambda_r[0],
        lambda_r: lambda_r[..r_max].to_vec(),
        method: MomentMethod::Analytic,
        standard_errors: None,
    })
}

fn quadrature(spec: &EnvironmentSpec, r_max: usize) -> Result<MomentSummary> {
    let XiLaw::Uniform { lo, hi } = spec.xi_law else {
        return Err(precondition("quadrature moments need a continuous xi law"));
    };
    let width = hi - lo;
    let mean = |what: &str, f: &dyn Fn(f64) -> f64| -> Result<f64> {
        Ok(integrate(what, f, lo, hi, QUAD_REL_TOL, QUAD_ABS_TOL)? / width)
    };
    // E[Y^r | xi = v]
    let cond_moment = |r: usize, v: f64| -> f64 {
        match &spec.y_law {
            YLaw::Degenerate { value } => value.powi(r as i32),
            YLaw::Discrete { atoms } => atoms.iter().map(|a| a.weight * a.value.powi(r as i32)).sum(),
            YLaw::Uniform { lo, hi } => Cond::Uniform(*lo, *hi).moment(r),
            YLaw::Affine { intercept, slope } => (intercept + slope * v).powi(r as i32),
            YLaw::Joint { .. } => unreachable!("joint tables need a finite xi law"),
        }
    };
    let mean_zeta = mean("E[zeta]", &zeta)?;
    let sigma2 = mean("Var[zeta]", &|v| (zeta(v) - mean_zeta).powi(2))?;
    let mut lambda_r = Vec::with_capacity(r_max);
    for r in 1..=r_max.max(1) {
        let independent_zero = !matches!(spec.y_law, YLaw::Affine { .. }) && cond_moment(r, lo) == 0.0;
        let value = if independent_zero {
            0.0
        } else {
            mean(&format!("lambda_{r}"), &|v| lambda_r_term(r, v, cond_moment(r, v)))?
        };
        lambda_r.push(value);
    }
    Ok(MomentSummary {
        mean_zeta,
        sigma2,
        lambda: lambda_r[0],
        lambda_r: lambda_r[..r_max].to_vec(),
        method: MomentMethod::Quadrature,
        standard_errors: None,
    })
}

fn monte_carlo(spec: &EnvironmentSpec, r_max: usize, samples: u64, seed: u64) -> Result<MomentSummary> {
    if samples < 2 {
        return Err(precondition("Monte Carlo moments need at least two samples"));
    }
    let sampler = Sampler::new(spec);
    let rng = CounterRng::new(seed, stream::MOMENTS);
    let r_top = r_max.max(1);
    let draw = |i: u64| sampler.draw(rng.uniform(i, 0), rng.uniform(i, 1));
    let n = samples as f64;

    // first pass: means
    let mut s_zeta = 0.0;
    let mut s_lr = vec![0.0; r_top];
    for i in 0..samples {
        let (v, y) = draw(i);
        s_zeta += zeta(v);
        for (r, acc) in s_lr.iter_mut().enumerate() {
            *acc += lambda_r_term(r + 1, v, y.powi(r as i32 + 1));
        }
    }
    let mean_zeta = s_zeta / n;
    let lambda_r: Vec<f64> = s_lr.iter().map(|s| s / n).collect();

    // second pass over the same counters: central moments
    let mut c2 = 0.0;
    let mut c4 = 0.0;
    let mut v_lr = vec![0.0; r_top];
    for i in 0..samples {
        let (v, y) = draw(i);
        let d = zeta(v) - mean_zeta;
        c2 += d * d;
        c4 += d.powi(4);
        for (r, acc) in v_lr.iter_mut().enumerate() {
            *acc += (lambda_r_term(r + 1, v, y.powi(r as i32 + 1)) - lambda_r[r]).powi(2);
        }
    }
    let sigma2 = c2 / (n - 1.0);
    let m4 = c4 / n;
    let se_lr: Vec<f64> = v_lr.iter().map(|s| (s / (n - 1.0) / n).sqrt()).collect();
    let errors = MomentErrors {
        mean_zeta: (sigma2 / n).sqrt(),
        sigma2: ((m4 - sigma2 * sigma2).max(0.0) / n).sqrt(),
        lambda: se_lr[0],
        lambda_r: se_lr[..r_max].to_vec(),
    };
    Ok(MomentSummary {
        mean_zeta,
        sigma2,
        lambda: lambda_r[0],
        lambda_r: lambda_r[..r_max].to_vec(),
        method: MomentMethod::MonteCarlo { samples, seed },
        standard_errors: Some(errors),
    })
}

/// `E[zeta]`, `Var[zeta]`, `lambda` and `lambda_1..lambda_{r_max}` of the law.
pub fn moments(spec: &EnvironmentSpec, r_max: usize, method: MomentMethod) -> Result<MomentSummary> {
    spec.validate()?;
    match method {
        MomentMethod::Analytic => analytic(spec, r_max),
        MomentMethod::Quadrature => quadrature(spec, r_max),
        MomentMethod::MonteCarlo { samples, seed } => monte_carlo(spec, r_max, samples, seed),
    }
}

/// Analytic for finite xi laws; quadrature for continuous ones, falling back
/// to Monte Carlo when quadrature does not converge.
pub fn moments_auto(spec: &EnvironmentSpec, r_max: usize) -> Result<MomentSummary> {
    spec.validate()?;
    if spec.xi_law.atoms().is_some() {
        return analytic(spec, r_max);
    }
    match quadrature(spec, r_max) {
        Err(Error::Numerical { .. }) => monte_carlo(spec, r_max, FALLBACK_SAMPLES, 0),
        other => other,
    }
}
