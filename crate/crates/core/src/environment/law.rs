use serde::{Deserialize, Serialize};

use crate::criticality::{a_coeff, n_k, phi};
use crate::error::{config, Result};

/// Tolerance for probability weights summing to one.
const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub weight: f64,
}

/// One cell of a joint `(xi, Y)` probability table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointAtom {
    pub xi: f64,
    pub y: f64,
    pub weight: f64,
}

/// Law of `xi_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XiLaw {
    Degenerate { value: f64 },
    /// `P[xi = v1] = w`, `P[xi = v2] = 1 - w`.
    TwoPoint { v1: f64, v2: f64, w: f64 },
    Uniform { lo: f64, hi: f64 },
    Discrete { atoms: Vec<Atom> },
}

/// Law of `Y_1`, possibly coupled to `xi_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum YLaw {
    Degenerate { value: f64 },
    Discrete { atoms: Vec<Atom> },
    Uniform { lo: f64, hi: f64 },
    /// Joint probability table of `(xi, Y)`; its xi-marginal must equal the xi law.
    Joint { table: Vec<JointAtom> },
    /// `Y = intercept + slope * xi`.
    Affine { intercept: f64, slope: f64 },
}

/// The vanishing perturbation `chi(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationSpec {
    Zero,
    /// `chi(n) = a n^{-beta}`.
    Power { a: f64, beta: f64 },
    /// `chi(n) = (sigma / 2 lambda_abs) n^{-1/2} phi_k(n; sign c)` for `n >= n_k`, zero before.
    IterLogCritical { k: u32, c: f64, sign: i8, lambda_abs: f64, sigma: f64 },
    /// `chi(n) = values[n - 1]`, zero past the end.
    Table { values: Vec<f64> },
}

impl PerturbationSpec {
    pub fn value(&self, n: u64) -> f64 {
        match self {
            PerturbationSpec::Zero => 0.0,
            PerturbationSpec::Power { a, beta } => a * (n as f64).powf(-beta),
            PerturbationSpec::IterLogCritical { k, c, sign, lambda_abs, sigma } => match n_k(*k) {
                Some(start) if n >= start => {
                    let x = n as f64;
                    let env = phi(*k, x, f64::from(*sign) * c).unwrap_or(0.0);
                    sigma / (2.0 * lambda_abs) * env / x.sqrt()
                }
                _ => 0.0,
            },
            PerturbationSpec::Table { values } => {
                if n == 0 {
                    0.0
                } else {
                    values.get((n - 1) as usize).copied().unwrap_or(0.0)
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PerturbationSpec::Zero => Ok(()),
            PerturbationSpec::Power { a, beta } => {
                if !(a.is_finite() && *a > 0.0 && beta.is_finite() && *beta > 0.0) {
                    return Err(config(format!("power perturbation needs a > 0 and beta > 0, got a={a}, beta={beta}")));
                }
                Ok(())
            }
            PerturbationSpec::IterLogCritical { k, c, sign, lambda_abs, sigma } => {
                if *k == 0 || n_k(*k).is_none() {
                    return Err(config(format!("iterated-log perturbation order k={k} must be 1, 2 or 3")));
                }
                if *sign != 1 && *sign != -1 {
                    return Err(config(format!("sign must be +1 or -1, got {sign}")));
                }
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(config(format!("constant c must be finite and nonnegative, got {c}")));
                }
                if !(lambda_abs.is_finite() && *lambda_abs > 0.0 && sigma.is_finite() && *sigma > 0.0) {
                    return Err(config("lambda_abs and sigma must be positive"));
                }
                if a_coeff(k + 1) + f64::from(*sign) * c < 0.0 {
                    return Err(config(format!("a_{} + sign*c is negative; the envelope is undefined", k + 1)));
                }
                Ok(())
            }
            PerturbationSpec::Table { values } => {
                if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return Err(config(format!("perturbation table entries must be finite and nonnegative, found {v}")));
                }
                let tail = &values[values.len() - values.len() / 4..];
                if tail.windows(2).any(|w| w[1] > w[0]) {
                    return Err(config("perturbation table must be nonincreasing over its last quarter"));
                }
                Ok(())
            }
        }
    }
}

/// Distributional description of the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub epsilon: f64,
    pub xi_law: XiLaw,
    pub y_law: YLaw,
    pub chi: PerturbationSpec,
}

impl XiLaw {
    /// Atoms of a finite law, `None` for continuous laws.
    pub fn atoms(&self) -> Option<Vec<Atom>> {
        match self {
            XiLaw::Degenerate { value } => Some(vec![Atom { value: *value, weight: 1.0 }]),
            XiLaw::TwoPoint { v1, v2, w } => {
                Some(vec![Atom { value: *v1, weight: *w }, Atom { value: *v2, weight: 1.0 - w }])
            }
            XiLaw::Uniform { .. } => None,
            XiLaw::Discrete { atoms } => Some(atoms.clone()),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            XiLaw::Uniform { lo, hi } => (*lo, *hi),
            _ => {
                let atoms = self.atoms().unwrap();
                let live = atoms.iter().filter(|a| a.weight > 0.0).map(|a| a.value);
                let lo = live.clone().fold(f64::INFINITY, f64::min);
                let hi = live.fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        }
    }
}

fn check_weights(what: &str, weights: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for w in weights {
        if !(w.is_finite() && w >= 0.0) {
            return Err(config(format!("{what}: weights must be finite and nonnegative, found {w}")));
        }
        total += w;
    }
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(config(format!("{what}: weights sum to {total}, not 1")));
    }
    Ok(())
}

fn check_interval(what: &str, lo: f64, hi: f64, min: f64, max: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(config(format!("{what}: need lo < hi, got [{lo}, {hi}]")));
    }
    if lo < min || hi > max {
        return Err(config(format!("{what}: [{lo}, {hi}] leaves [{min}, {max}]")));
    }
    Ok(())
}

impl EnvironmentSpec {
    pub fn validate(&self) -> Result<()> {
        let eps = self.epsilon;
        if !(eps > 0.0 && eps < 0.5) {
            return Err(config(format!("epsilon must lie in (0, 1/2), got {eps}")));
        }
        let (xmin, xmax) = (eps, 1.0 - eps);
        match &self.xi_law {
            XiLaw::Uniform { lo, hi } => check_interval("xi uniform law", *lo, *hi, xmin, xmax)?,
            XiLaw::TwoPoint { w, .. } if !(0.0..=1.0).contains(w) => {
                return Err(config(format!("two-point weight must lie in [0, 1], got {w}")))
            }
            law => {
                let atoms = law.atoms().unwrap();
                if atoms.is_empty() {
                    return Err(config("xi law has no atoms"));
                }
                check_weights("xi law", atoms.iter().map(|a| a.weight))?;
                for a in atoms.iter().filter(|a| a.weight > 0.0) {
                    if !(a.value >= xmin && a.value <= xmax) {
                        return Err(config(format!("xi value {} leaves [{xmin}, {xmax}]", a.value)));
                    }
                }
            }
        }
        let in_y = |y: f64| (-1.0..=1.0).contains(&y);
        match &self.y_law {
            YLaw::Degenerate { value } => {
                if !in_y(*value) {
                    return Err(config(format!("Y value {value} leaves [-1, 1]")));
                }
            }
            YLaw::Discrete { atoms } => {
                if atoms.is_empty() {
                    return Err(config("Y law has no atoms"));
                }
                check_weights("Y law", atoms.iter().map(|a| a.weight))?;
                if let Some(a) = atoms.iter().find(|a| a.weight > 0.0 && !in_y(a.value)) {
                    return Err(config(format!("Y value {} leaves [-1, 1]", a.value)));
                }
            }
            YLaw::Uniform { lo, hi } => check_interval("Y uniform law", *lo, *hi, -1.0, 1.0)?,
            YLaw::Joint { table } => {
                let xi_atoms = self
                    .xi_law
                    .atoms()
                    .ok_or_else(|| config("a joint (xi, Y) table needs a finite xi law"))?;
                if table.is_empty() {
                    return Err(config("joint table is empty"));
                }
                check_weights("joint table", table.iter().map(|c| c.weight))?;
                if let Some(c) = table.iter().find(|c| c.weight > 0.0 && !in_y(c.y)) {
                    return Err(config(format!("Y value {} leaves [-1, 1]", c.y)));
                }
                let mut values: Vec<f64> = xi_atoms.iter().map(|a| a.value).collect();
                values.extend(table.iter().map(|c| c.xi));
                values.sort_by(f64::total_cmp);
                values.dedup();
                for v in values {
                    let law: f64 = xi_atoms.iter().filter(|a| a.value == v).map(|a| a.weight).sum();
                    let marginal: f64 = table.iter().filter(|c| c.xi == v).map(|c| c.weight).sum();
                    if (law - marginal).abs() > 1e-9 {
                        return Err(config(format!(
                            "joint table gives P[xi = {v}] = {marginal}, xi law gives {law}"
                        )));
                    }
                }
            }
            YLaw::Affine { intercept, slope } => {
                let (lo, hi) = self.xi_law.support();
                for x in [lo, hi] {
                    let y = intercept + slope * x;
                    if !(y.is_finite() && in_y(y)) {
                        return Err(config(format!("affine Y = {intercept} + {slope} xi reaches {y} at xi = {x}")));
                    }
                }
            }
        }
        self.chi.validate()
    }

    /// Whether `Y_1` is almost surely zero (no perturbation ever acts).
    pub fn y_is_zero(&self) -> bool {
        match &self.y_law {
            YLaw::Degenerate { value } => *value == 0.0,
            YLaw::Discrete { atoms } => atoms.iter().all(|a| a.weight == 0.0 || a.value == 0.0),
            YLaw::Uniform { .. } => false,
            YLaw::Joint { table } => table.iter().all(|c| c.weight == 0.0 || c.y == 0.0),
            YLaw::Affine { intercept, slope } => {
                *intercept == 0.0 && (*slope == 0.0 || matches!(self.xi_law, XiLaw::Degenerate { value } if intercept + slope * value == 0.0))
            }
        }
    }
}

/// Precomputed inverse-CDF tables for drawing `(xi, Y)` pairs.
#[derive(Debug, Clone)]
pub(crate) struct Sampler {
    xi: XiSampler,
    y: YSampler,
}

#[derive(Debug, Clone)]
enum XiSampler {
    Point(f64),
    Finite { values: Vec<f64>, cum: Vec<f64> },
    Uniform { lo: f64, width: f64 },
}

#[derive(Debug, Clone)]
enum YSampler {
    Point(f64),
    Finite { values: Vec<f64>, cum: Vec<f64> },
    Uniform { lo: f64, width: f64 },
    /// Conditional tables keyed by the xi value.
    Joint(Vec<(f64, Vec<f64>, Vec<f64>)>),
    Affine { intercept: f64, slope: f64 },
}

fn cumulative(atoms: impl Iterator<Item = (f64, f64)>) -> (Vec<f64>, Vec<f64>) {
    let (values, weights): (Vec<f64>, Vec<f64>) = atoms.filter(|a| a.1 > 0.0).unzip();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let mut cum: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect();
    if let Some(last) = cum.last_mut() {
        *last = 1.0;
    }
    (values, cum)
}

#[inline]
fn pick(values: &[f64], cum: &[f64], u: f64) -> f64 {
    let i = cum.partition_point(|&c| c <= u).min(values.len() - 1);
    values[i]
}

impl Sampler {
    /// Build from a validated spec.
    pub(crate) fn new(spec: &EnvironmentSpec) -> Self {
        let xi = match &spec.xi_law {
            XiLaw::Degenerate { value } => XiSampler::Point(*value),
            XiLaw::Uniform { lo, hi } => XiSampler::Uniform { lo: *lo, width: hi - lo },
            law => {
                let (values, cum) = cumulative(law.atoms().unwrap().into_iter().map(|a| (a.value, a.weight)));
                if values.len() == 1 {
                    XiSampler::Point(values[0])
                } else {
                    XiSampler::Finite { values, cum }
                }
            }
        };
        let y = match &spec.y_law {
            YLaw::Degenerate { value } => YSampler::Point(*value),
            YLaw::Uniform { lo, hi } => YSampler::Uniform { lo: *lo, width: hi - lo },
            YLaw::Discrete { atoms } => {
                let (values, cum) = cumulative(atoms.iter().map(|a| (a.value, a.weight)));
                YSampler::Finite { values, cum }
            }
            YLaw::Joint { table } => {
                let mut keys: Vec<f64> = table.iter().filter(|c| c.weight > 0.0).map(|c| c.xi).collect();
                keys.sort_by(f64::total_cmp);
                keys.dedup();
                YSampler::Joint(
                    keys.into_iter()
                        .map(|k| {
                            let (v, c) = cumulative(table.iter().filter(|c| c.xi == k).map(|c| (c.y, c.weight)));
                            (k, v, c)
                        })
                        .collect(),
                )
            }
            YLaw::Affine { intercept, slope } => YSampler::Affine { intercept: *intercept, slope: *slope },
        };
        Sampler { xi, y }
    }

    /// Map two independent uniforms to one `(xi, Y)` pair.
    #[inline]
    pub(crate) fn draw(&self, u_xi: f64, u_y: f64) -> (f64, f64) {
        let xi = match &self.xi {
            XiSampler::Point(v) => *v,
            XiSampler::Finite { values, cum } => pick(values, cum, u_xi),
            XiSampler::Uniform { lo, width } => lo + u_xi * width,
        };
        let y = match &self.y {
            YSampler::Point(v) => *v,
            YSampler::Finite { values, cum } => pick(values, cum, u_y),
            YSampler::Uniform { lo, width } => lo + u_y * width,
            YSampler::Joint(rows) => {
                let (_, values, cum) = rows.iter().find(|r| r.0 == xi).expect("joint table covers every xi atom");
                pick(values, cum, u_y)
            }
            YSampler::Affine { intercept, slope } => intercept + slope * xi,
        };
        (xi, y)
    }
}
