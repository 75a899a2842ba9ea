//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rwre_core::{EnvironmentSpec, PerturbationSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range { base: u64, count: u64 },
}

impl Seeds {
    /// Environment seeds, each shifted by `offset`.
    pub fn expand(&self, offset: u64) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.iter().map(|s| s.wrapping_add(offset)).collect(),
            Seeds::Range { base, count } => (0..*count).map(|i| base.wrapping_add(offset).wrapping_add(i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Seeds::List(v) => v.len(),
            Seeds::Range { count, .. } => *count as usize,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub t_max: u64,
    pub ledger_n: usize,
    pub walks_per_env: usize,
    #[serde(default)]
    pub start: u64,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub dir: PathBuf,
    #[serde(default = "yes")]
    pub ledgers: bool,
    #[serde(default = "yes")]
    pub trajectories: bool,
    #[serde(default = "yes")]
    pub reports: bool,
    #[serde(default)]
    pub environments: bool,
    #[serde(default)]
    pub histograms: bool,
}

/// Optional grid over the exponent of a power-law perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub spec: EnvironmentSpec,
    pub seeds: Seeds,
    pub budgets: Budgets,
    pub outputs: Outputs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

/// One concrete environment to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub label: String,
    pub spec: EnvironmentSpec,
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            bail!("experiment name is empty");
        }
        if self.seeds.is_empty() {
            bail!("no seeds given");
        }
        let b = &self.budgets;
        if b.t_max == 0 || b.ledger_n == 0 || b.walks_per_env == 0 {
            bail!("budgets t_max, ledger_n and walks_per_env must be positive");
        }
        if self.workers == Some(0) {
            bail!("workers must be positive");
        }
        if let Some(sweep) = &self.sweep {
            if sweep.beta.is_empty() {
                bail!("sweep.beta is empty");
            }
            if !matches!(self.spec.chi, PerturbationSpec::Power { .. }) {
                bail!("a beta sweep needs a power-law perturbation");
            }
        }
        Ok(())
    }

    /// Concrete experiments, one per sweep point.
    pub fn experiments(&self) -> Vec<Experiment> {
        match (&self.sweep, &self.spec.chi) {
            (Some(sweep), PerturbationSpec::Power { a, .. }) => sweep
                .beta
                .iter()
                .map(|&beta| {
                    let mut spec = self.spec.clone();
                    spec.chi = PerturbationSpec::Power { a: *a, beta };
                    Experiment { label: sanitize(&format!("{}_beta{beta}", self.name)), spec }
                })
                .collect(),
            _ => vec![Experiment { label: sanitize(&self.name), spec: self.spec.clone() }],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"
name = "sinai perturbed"

[spec]
epsilon = 0.1
xi_law = { kind = "two_point", v1 = 0.3, v2 = 0.7, w = 0.5 }
y_law = { kind = "degenerate", value = 1.0 }
chi = { kind = "power", a = 1.0, beta = 0.25 }

[seeds]
base = 10
count = 3

[budgets]
t_max = 1000
ledger_n = 500
walks_per_env = 2

[outputs]
dir = "out"

[sweep]
beta = [0.25, 0.75, 1.5]
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.seeds.expand(5), vec![15, 16, 17]);
        assert!(cfg.outputs.ledgers && !cfg.outputs.environments);
        let again = ExperimentConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
        let labels: Vec<String> = cfg.experiments().into_iter().map(|e| e.label).collect();
        assert_eq!(labels, ["sinai_perturbed_beta0.25", "sinai_perturbed_beta0.75", "sinai_perturbed_beta1.5"]);
    }

    #[test]
    fn seed_lists() {
        let s = Seeds::List(vec![3, 1]);
        assert_eq!(s.expand(0), vec![3, 1]);
        assert_eq!(s.expand(u64::MAX), vec![2, 0]);
    }

    #[test]
    fn rejects_bad_budgets() {
        let text = SAMPLE.replace("t_max = 1000", "t_max = 0");
        assert!(ExperimentConfig::parse(&text).is_err());
        let text = SAMPLE.replace("count = 3", "count = 0");
        assert!(ExperimentConfig::parse(&text).is_err());
        let text = SAMPLE.replace(r#"chi = { kind = "power", a = 1.0, beta = 0.25 }"#, r#"chi = { kind = "zero" }"#);
        assert!(ExperimentConfig::parse(&text).is_err());
    }
}
