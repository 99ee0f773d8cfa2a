//! Command-line interface. Exit codes: 0 success, 1 numerical or self-check
//! failure, 2 invalid configuration, 3 file IO.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use old3s_core::selfcheck::{run_all, CheckOptions};
use old3s_core::synth::SynthSpec;

use crate::config::RunConfig;
use crate::data::save_csv;
use crate::error::{CliError, CliResult};
use crate::report::{load_summaries, render};
use crate::runner::{run, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "old3s", version, about = "Online learning over doubly-streaming data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for the (variant × seed) grid.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    pub seed_override: Option<u64>,
    /// Output directory for `run`, output file for `synth`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every configured variant on every seed.
    Run { config: PathBuf },
    /// Write a Gaussian-blob CSV dataset from a JSON spec.
    Synth { spec: PathBuf },
    /// Gradient, KL, hedge and ensemble self-checks.
    Check {
        /// Corrupt the analytic gradients; the check must then fail.
        #[arg(long)]
        inject_fault: bool,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Aggregate the summaries in a run directory into a table.
    Report { dir: PathBuf },
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    let say = |out: &mut dyn Write, line: String| -> CliResult<()> {
        writeln!(out, "{line}").map_err(|e| CliError::io("<stdout>", e))
    };
    match &cli.command {
        Command::Run { config } => {
            let config = RunConfig::load(config)?;
            let opts = RunOptions {
                jobs: cli.jobs,
                seed_override: cli.seed_override,
                out: cli.out.clone(),
            };
            let summaries = run(&config, &opts)?;
            for s in &summaries {
                say(
                    out,
                    format!(
                        "{:<10} seed {:<4} acr {:.4}  mean oca {:.4}  hindsight {:.4}  ({:.1}s)",
                        s.variant.name(),
                        s.seed,
                        s.acr,
                        s.mean_oca,
                        s.hindsight,
                        s.runtime_seconds
                    ),
                )?;
            }
            let dir = opts.out.unwrap_or(config.out);
            say(out, format!("wrote {} runs to {}", summaries.len(), dir.display()))
        }
        Command::Synth { spec } => {
            let text = std::fs::read_to_string(spec).map_err(|e| CliError::io(spec, e))?;
            let mut spec: SynthSpec = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
            if let Some(seed) = cli.seed_override {
                spec.seed = seed;
            }
            let dataset = spec.generate().map_err(|e| CliError::Config(e.to_string()))?;
            let path = cli.out.clone().unwrap_or_else(|| PathBuf::from("synth.csv"));
            save_csv(&path, &dataset, "class")?;
            say(out, format!("wrote {} rows to {}", dataset.len(), path.display()))
        }
        Command::Check { inject_fault, seed } => {
            let opts = CheckOptions {
                seed: *seed,
                inject_gradient_fault: *inject_fault,
                ..CheckOptions::default()
            };
            let results = run_all(&opts).map_err(|e| CliError::Check(e.to_string()))?;
            let mut failed = Vec::new();
            for r in &results {
                say(
                    out,
                    format!(
                        "{:<20} {}  max error {:.3e} (tolerance {:.1e})  {}",
                        r.name,
                        if r.passed { "pass" } else { "FAIL" },
                        r.max_error,
                        r.tolerance,
                        r.detail
                    ),
                )?;
                if !r.passed {
                    failed.push(r.name);
                }
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Check(failed.join(", ")))
            }
        }
        Command::Report { dir } => {
            let table = render(&load_summaries(dir)?)?;
            write!(out, "{table}").map_err(|e| CliError::io("<stdout>", e))
        }
    }
}
