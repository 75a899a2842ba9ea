//! Config-driven experiments over `rwre-core`: seed grids, CSV artifacts
//! and a hashed manifest.

pub mod compare;
pub mod config;
pub mod manifest;
pub mod report;
pub mod run;

pub use compare::{compare, Comparison, ComparisonRow};
pub use config::{Budgets, Experiment, ExperimentConfig, Outputs, Seeds, Sweep};
pub use manifest::{Manifest, MANIFEST_FILE};
pub use report::{spec_hash, Agreement, ReportRow};
pub use run::{run, Overrides, RunOutcome};
