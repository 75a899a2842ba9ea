//! Environment laws, reproducible realizations, and the moment quantities
//! that drive classification.

pub(crate) mod exact;
mod law;
mod moments;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::{stream, CounterRng};

pub use exact::{law_facts, LawFacts};
pub use law::{Atom, EnvironmentSpec, JointAtom, PerturbationSpec, XiLaw, YLaw};
pub(crate) use law::Sampler;
pub use moments::{moments, moments_auto, MomentErrors, MomentMethod, MomentSummary, DEFAULT_R_MAX};

const LANE_XI: u64 = 0;
const LANE_Y: u64 = 1;

/// Clamp `xi + Y chi` into `[eps/2, 1 - eps/2]`.
#[inline]
pub fn clamp_p(raw: f64, epsilon: f64) -> f64 {
    let lo = 0.5 * epsilon;
    let hi = 1.0 - 0.5 * epsilon;
    if raw < lo {
        lo
    } else if raw > hi {
        hi
    } else {
        raw
    }
}

/// Everything attached to one site of a realized environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Site {
    pub xi: f64,
    pub y: f64,
    pub chi: f64,
    pub p: f64,
}

/// Pure site generator for one `(spec, seed)` pair.
#[derive(Debug, Clone)]
pub struct SiteSource {
    spec: EnvironmentSpec,
    sampler: Sampler,
    rng: CounterRng,
}

impl SiteSource {
    pub fn new(spec: &EnvironmentSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec: spec.clone(),
            sampler: Sampler::new(spec),
            rng: CounterRng::new(seed, stream::ENVIRONMENT),
        })
    }

    /// Site `n >= 1`.
    #[inline]
    pub fn site(&self, n: u64) -> Site {
        let (xi, y) = self.sampler.draw(self.rng.uniform(n, LANE_XI), self.rng.uniform(n, LANE_Y));
        let chi = self.spec.chi.value(n);
        Site { xi, y, chi, p: clamp_p(xi + y * chi, self.spec.epsilon) }
    }

    pub fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }
}

/// One realized environment, indexed from 1.
#[derive(Debug, Clone)]
pub struct Environment {
    source: SiteSource,
    seed: u64,
    xi: Vec<f64>,
    y: Vec<f64>,
    chi: Vec<f64>,
    p: Vec<f64>,
    zeta: Vec<f64>,
}

/// One CSV row of an exported environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteRow {
    pub n: u64,
    pub xi: f64,
    pub y: f64,
    pub chi_n: f64,
    pub p: f64,
    pub q: f64,
    pub zeta: f64,
}

/// Realize sites `1..=n` of the environment drawn with `seed`.
pub fn realize(spec: &EnvironmentSpec, seed: u64, n: usize) -> Result<Environment> {
    let env = Environment {
        source: SiteSource::new(spec, seed)?,
        seed,
        xi: Vec::new(),
        y: Vec::new(),
        chi: Vec::new(),
        p: Vec::new(),
        zeta: Vec::new(),
    };
    Ok(extend(env, n))
}

/// Grow `env` to `n_new` sites; existing entries are untouched.
pub fn extend(mut env: Environment, n_new: usize) -> Environment {
    env.extend_to(n_new);
    env
}

impl Environment {
    pub fn extend_to(&mut self, n_new: usize) {
        let have = self.p.len();
        if n_new <= have {
            return;
        }
        let extra = n_new - have;
        for v in [&mut self.xi, &mut self.y, &mut self.chi, &mut self.p, &mut self.zeta] {
            v.reserve(extra);
        }
        for n in have + 1..=n_new {
            let s = self.source.site(n as u64);
            self.xi.push(s.xi);
            self.y.push(s.y);
            self.chi.push(s.chi);
            self.p.push(s.p);
            self.zeta.push((s.xi / (1.0 - s.xi)).ln());
        }
    }

    pub fn spec(&self) -> &EnvironmentSpec {
        self.source.spec()
    }

    pub fn source(&self) -> &SiteSource {
        &self.source
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_realized(&self) -> usize {
        self.p.len()
    }

    /// `p_n` for `1 <= n <= n_realized`.
    #[inline]
    pub fn p(&self, n: usize) -> f64 {
        self.p[n - 1]
    }

    /// `q_n = 1 - p_n`.
    #[inline]
    pub fn q(&self, n: usize) -> f64 {
        1.0 - self.p[n - 1]
    }

    pub fn xi(&self, n: usize) -> f64 {
        self.xi[n - 1]
    }

    pub fn y(&self, n: usize) -> f64 {
        self.y[n - 1]
    }

    pub fn chi(&self, n: usize) -> f64 {
        self.chi[n - 1]
    }

    pub fn zeta(&self, n: usize) -> f64 {
        self.zeta[n - 1]
    }

    pub fn p_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn xi_slice(&self) -> &[f64] {
        &self.xi
    }

    pub fn y_slice(&self) -> &[f64] {
        &self.y
    }

    pub fn zeta_slice(&self) -> &[f64] {
        &self.zeta
    }

    pub fn rows(&self) -> impl Iterator<Item = SiteRow> + '_ {
        (1..=self.n_realized()).map(move |n| SiteRow {
            n: n as u64,
            xi: self.xi(n),
            y: self.y(n),
            chi_n: self.chi(n),
            p: self.p(n),
            q: self.q(n),
            zeta: self.zeta(n),
        })
    }
}

impl PartialEq for Environment {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed
            && self.spec() == other.spec()
            && self.xi == other.xi
            && self.y == other.y
            && self.chi == other.chi
            && self.p == other.p
            && self.zeta == other.zeta
    }
}
