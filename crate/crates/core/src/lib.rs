//! Random walks on the half-line in perturbed random environments.
//!
//! The crate realizes environments from a distributional description,
//! computes the Lyapunov objects of the quenched chain in log space,
//! simulates trajectories, and classifies the chain as ergodic,
//! null-recurrent or transient.

pub mod classifier;
pub mod criticality;
pub mod environment;
pub mod error;
pub mod lyapunov;
pub mod numeric;
pub mod rng;
pub mod simulator;

pub use classifier::{classify, empirical_classify, nested_log_threshold, Classification, Clause, EmpiricalBudget, EmpiricalClassification, Source, Verdict};
pub use criticality::{check_criticality, n_k, phi, phi_sum_residual, CriticalityStatus, CriticalityVerdict};
pub use environment::{
    extend, law_facts, moments, moments_auto, realize, Environment, EnvironmentSpec, MomentMethod, MomentSummary,
    PerturbationSpec, XiLaw, YLaw,
};
pub use error::{Error, Result};
pub use lyapunov::{growth_diagnostic, ledger_scan, martingale_residual, stationary_measure, GrowthReport, LedgerEntry};
pub use simulator::{ensemble, run_trajectory, step, EnsembleReport, TrajectoryStats};
