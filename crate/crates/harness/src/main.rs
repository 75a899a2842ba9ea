use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use rwre_core::classify;
use rwre_harness::{compare, run, ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "rwre", version, about = "Experiments on random walks in perturbed random environments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment of a config and write CSV artifacts plus a manifest.
    Run {
        config: PathBuf,
        /// Added to every environment seed.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
        #[arg(long, env = "RWRE_WORKERS")]
        workers: Option<usize>,
        /// Output directory, overriding the config.
        #[arg(long, env = "RWRE_OUT_DIR")]
        out: Option<PathBuf>,
    },
    /// Theoretical verdicts only, no simulation.
    Classify { config: PathBuf },
    /// Tabulate theoretical against empirical verdicts across report files.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, seed_offset, workers, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let outcome = run(&cfg, &Overrides { seed_offset, workers, out })?;
            for r in &outcome.reports {
                println!("{}: {} ({}) empirical {} confidence {:.2}", r.label, r.verdict, r.clause, r.empirical_verdict, r.confidence);
            }
            println!("manifest: {}", outcome.manifest_path.display());
            if outcome.succeeded() {
                Ok(ExitCode::SUCCESS)
            } else {
                for (label, reason) in &outcome.manifest.failures {
                    eprintln!("failed: {label}: {reason}");
                }
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Classify { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            for exp in cfg.experiments() {
                let c = classify(&exp.spec)?;
                let crit = c.criticality.as_ref().map(|v| format!(", {}", v.label())).unwrap_or_default();
                println!(
                    "{}: {} ({}) {}; lambda={} sigma2={}{crit}",
                    exp.label, c.verdict, c.source.clause, c.source.rule, c.moments.lambda, c.moments.sigma2
                );
                for w in &c.warnings {
                    println!("  warning: {w}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { reports } => {
            print!("{}", compare(&reports)?.render());
            Ok(ExitCode::SUCCESS)
        }
    }
}
