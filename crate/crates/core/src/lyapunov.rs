//! Log-domain Lyapunov objects of a realized environment.
//!
//! With `Delta_1 = 1` and `Delta_i = prod_{j<i} p_j / q_j`:
//! `f(n) = sum_{i<=n} Delta_i` is harmonic for the chain away from the origin,
//! and `D_n = sum_{i<=n} 1 / (Delta_{i+1} q_i)` is the partial mass of the
//! reversible measure `mu`.

use serde::{Deserialize, Serialize};

use crate::environment::Environment;
use crate::error::{precondition, Result};
use crate::numeric::{linear_fit, LinearFit, LogSumAcc, NeumaierSum};

/// Growth of `log` of a partial sum below this over the fit window counts as bounded.
pub const BOUNDED_TOLERANCE: f64 = 1e-6;
/// Goodness of fit required before a growth law is trusted.
pub const R_SQUARED_THRESHOLD: f64 = 0.9;
/// Shortest ledger the growth diagnostic will judge.
pub const MIN_LEDGER_LEN: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub n: u64,
    /// `L_n = sum_{j<=n} log(p_j / q_j)`.
    pub log_ratio_sum: f64,
    /// `log Delta_{n+1}`; equal to `L_n`.
    pub log_delta: f64,
    /// `log f(n)`.
    pub log_f: f64,
    /// `log D_n`.
    pub log_d_partial: f64,
    /// `log mu_n`, the increment of `D_n`.
    pub log_mu: f64,
}

/// Single forward pass over an environment, yielding one entry per site.
#[derive(Debug, Clone)]
pub struct LedgerScanner<'a> {
    env: &'a Environment,
    n: usize,
    end: usize,
    l: NeumaierSum,
    f: LogSumAcc,
    d: LogSumAcc,
}

impl<'a> LedgerScanner<'a> {
    pub fn new(env: &'a Environment, n: usize) -> Result<Self> {
        if n > env.n_realized() {
            return Err(precondition(format!(
                "ledger to {n} needs the environment realized that far (have {})",
                env.n_realized()
            )));
        }
        Ok(Self {
            env,
            n: 0,
            end: n,
            l: NeumaierSum::default(),
            f: LogSumAcc::default(),
            d: LogSumAcc::default(),
        })
    }
}

impl Iterator for LedgerScanner<'_> {
    type Item = LedgerEntry;

    fn next(&mut self) -> Option<LedgerEntry> {
        if self.n >= self.end {
            return None;
        }
        self.n += 1;
        let n = self.n;
        // Delta_n = exp(L_{n-1})
        self.f.add(self.l.value());
        let p = self.env.p(n);
        let q = self.env.q(n);
        self.l.add(p.ln() - q.ln());
        let l = self.l.value();
        let log_mu = -l - q.ln();
        self.d.add(log_mu);
        Some(LedgerEntry {
            n: n as u64,
            log_ratio_sum: l,
            log_delta: l,
            log_f: self.f.value(),
            log_d_partial: self.d.value(),
            log_mu,
        })
    }
}

/// Ledger entries for sites `1..=n`.
pub fn ledger_scan(env: &Environment, n: usize) -> Result<Vec<LedgerEntry>> {
    Ok(LedgerScanner::new(env, n)?.collect())
}

/// `p_n f(n-1) + q_n f(n+1) - f(n)`, reported relative to `f(n+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleResidual {
    pub n: u64,
    /// `log f(n+1)`, the scale the residual is measured against.
    pub log_scale: f64,
    pub relative: f64,
}

fn residual_at(env: &Environment, ledger: &[LedgerEntry], n: usize) -> MartingaleResidual {
    let lf = |m: usize| if m == 0 { f64::NEG_INFINITY } else { ledger[m - 1].log_f };
    let scale = lf(n + 1);
    let p = env.p(n);
    let q = env.q(n);
    let relative = p * (lf(n - 1) - scale).exp() + q - (lf(n) - scale).exp();
    MartingaleResidual { n: n as u64, log_scale: scale, relative }
}

/// The harmonicity defect of `f` at site `n`, `1 <= n < n_realized`.
pub fn martingale_residual(env: &Environment, n: usize) -> Result<MartingaleResidual> {
    if n == 0 || n >= env.n_realized() {
        return Err(precondition(format!("martingale residual needs 1 <= n < {}", env.n_realized())));
    }
    let ledger = ledger_scan(env, n + 1)?;
    Ok(residual_at(env, &ledger, n))
}

/// Residuals at every `n` in `1..ledger.len()`, from one ledger.
pub fn martingale_residuals(env: &Environment, ledger: &[LedgerEntry]) -> Vec<MartingaleResidual> {
    (1..ledger.len()).map(|n| residual_at(env, ledger, n)).collect()
}

/// `log mu_n` by the product formula: `mu_0 = 2`, `mu_1 = 1/p_1`,
/// `mu_n = (1/p_1) prod_{i=1}^{n-1} q_i / p_{i+1}`.
pub fn stationary_measure(env: &Environment, n: usize) -> Result<f64> {
    Ok(*stationary_measures(env, n)?.last().unwrap())
}

/// `log mu_0, ..., log mu_n`.
pub fn stationary_measures(env: &Environment, n: usize) -> Result<Vec<f64>> {
    if n > env.n_realized() {
        return Err(precondition(format!(
            "stationary measure at {n} needs the environment realized that far (have {})",
            env.n_realized()
        )));
    }
    let mut out = Vec::with_capacity(n + 1);
    out.push(2f64.ln());
    if n == 0 {
        return Ok(out);
    }
    let mut acc = NeumaierSum::default();
    acc.add(-env.p(1).ln());
    out.push(acc.value());
    for i in 1..n {
        acc.add(env.q(i).ln());
        acc.add(-env.p(i + 1).ln());
        out.push(acc.value());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GrowthLaw {
    Bounded,
    /// `log g ~ a log n`.
    Polynomial,
    /// `log g ~ C sqrt(n)`.
    SqrtN,
    /// `log g ~ C n^{1 - beta}`.
    PowerN,
    /// None of the candidates fits.
    Unclear,
}

/// Candidate models for the growth diagnostic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GrowthModel {
    /// Perturbation exponent; enables the `n^{1 - beta}` candidate.
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub slope: f64,
    pub r_squared: f64,
}

impl From<LinearFit> for FitSummary {
    fn from(f: LinearFit) -> Self {
        FitSummary { slope: f.slope, r_squared: f.r_squared }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFit {
    /// Increase of the log partial sum over the window.
    pub log_increase: f64,
    pub polynomial: Option<FitSummary>,
    pub sqrt_n: Option<FitSummary>,
    pub power_n: Option<FitSummary>,
    pub law: GrowthLaw,
}

impl SeriesFit {
    pub fn bounded(&self) -> bool {
        self.law == GrowthLaw::Bounded
    }

    pub fn unbounded(&self) -> bool {
        !matches!(self.law, GrowthLaw::Bounded | GrowthLaw::Unclear)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthSuggestion {
    TransientConsistent,
    ErgodicConsistent,
    NullRecurrentConsistent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub window: (u64, u64),
    pub f: Option<SeriesFit>,
    pub d_partial: Option<SeriesFit>,
    /// `-log` of the dominant increment (`mu_n` or `Delta_n`) against `sqrt(n)`.
    pub increment_sqrt_fit: Option<FitSummary>,
    pub suggestion: GrowthSuggestion,
}

fn good(fit: &Option<FitSummary>) -> bool {
    fit.is_some_and(|f| f.slope > 0.0 && f.r_squared > R_SQUARED_THRESHOLD)
}

fn fit_series(n: &[f64], log_g: &[f64], beta: Option<f64>) -> SeriesFit {
    let log_increase = log_g.last().unwrap() - log_g.first().unwrap();
    let polynomial = linear_fit(&n.iter().map(|x| x.ln()).collect::<Vec<_>>(), log_g).map(FitSummary::from);
    let sqrt_n = linear_fit(&n.iter().map(|x| x.sqrt()).collect::<Vec<_>>(), log_g).map(FitSummary::from);
    let power_n = beta
        .filter(|b| *b < 1.0)
        .and_then(|b| linear_fit(&n.iter().map(|x| x.powf(1.0 - b)).collect::<Vec<_>>(), log_g))
        .map(FitSummary::from);
    let law = if log_increase <= BOUNDED_TOLERANCE {
        GrowthLaw::Bounded
    } else {
        [(GrowthLaw::Polynomial, polynomial), (GrowthLaw::SqrtN, sqrt_n), (GrowthLaw::PowerN, power_n)]
            .into_iter()
            .filter(|(_, f)| good(f))
            .max_by(|a, b| a.1.unwrap().r_squared.total_cmp(&b.1.unwrap().r_squared))
            .map(|(l, _)| l)
            .unwrap_or(GrowthLaw::Unclear)
    };
    SeriesFit { log_increase, polynomial, sqrt_n, power_n, law }
}

/// Fit the growth of `f` and `D_n` over the last nine tenths of the ledger
/// and suggest the matching regime.
pub fn growth_diagnostic(ledger: &[LedgerEntry], model: GrowthModel) -> GrowthReport {
    let len = ledger.len();
    if len < MIN_LEDGER_LEN {
        return GrowthReport {
            window: (0, len as u64),
            f: None,
            d_partial: None,
            increment_sqrt_fit: None,
            suggestion: GrowthSuggestion::Inconclusive,
        };
    }
    let tail = &ledger[len / 10 - 1..];
    let n: Vec<f64> = tail.iter().map(|e| e.n as f64).collect();
    let log_f: Vec<f64> = tail.iter().map(|e| e.log_f).collect();
    let log_d: Vec<f64> = tail.iter().map(|e| e.log_d_partial).collect();
    let f = fit_series(&n, &log_f, model.beta);
    let d = fit_series(&n, &log_d, model.beta);

    // -log of the increment whose series converges in the suggested regime
    let sqrt_n: Vec<f64> = n.iter().map(|x| x.sqrt()).collect();
    let increment: Vec<f64> = if f.bounded() {
        tail.iter().map(|e| -(e.log_delta)).collect()
    } else {
        tail.iter().map(|e| -e.log_mu).collect()
    };
    let increment_sqrt_fit = linear_fit(&sqrt_n, &increment).map(FitSummary::from);

    let suggestion = if f.bounded() {
        GrowthSuggestion::TransientConsistent
    } else if f.unbounded() && d.bounded() {
        GrowthSuggestion::ErgodicConsistent
    } else if f.unbounded() && d.unbounded() {
        GrowthSuggestion::NullRecurrentConsistent
    } else {
        GrowthSuggestion::Inconclusive
    };
    GrowthReport {
        window: (tail[0].n, ledger[len - 1].n),
        f: Some(f),
        d_partial: Some(d),
        increment_sqrt_fit,
        suggestion,
    }
}
