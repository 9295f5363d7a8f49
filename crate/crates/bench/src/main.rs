use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use asvrg_bench::{inspect_dataset, replay_manifest, run_benchmark, RunConfig, RunStatus};
use asvrg_core::data_io::ParseOptions;
use asvrg_core::verify::{verify_suite, SuiteOptions};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bench", version, about = "ASVRG-ADMM benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured solver and seed, writing traces, aggregate, plot and manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (default: all hardware threads).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the verification checks on the built-in instances.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corrupt one step of the weight recursion (negative control).
        #[arg(long, hide = true)]
        inject_schedule_fault: bool,
    },
    /// Print size and smoothness constants of a dataset.
    Inspect {
        dataset: PathBuf,
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Re-run a manifest's config and compare every CSV bitwise.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        /// Defaults to a `replay` directory next to the manifest.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
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
        Command::Run { config, threads } => {
            let cfg = RunConfig::load(&config)?;
            let manifest = run_benchmark(&cfg, threads)?;
            for r in &manifest.runs {
                match r.status {
                    RunStatus::Ok => println!("ok       {} seed {}", r.solver, r.seed),
                    _ => println!("{:<8} {} seed {}: {}", format!("{:?}", r.status).to_lowercase(), r.solver, r.seed, r.detail.as_deref().unwrap_or("")),
                }
            }
            println!("wrote {}", cfg.output_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { seed, inject_schedule_fault } => {
            let reports = verify_suite(seed, SuiteOptions { inject_schedule_fault })?;
            let mut all = true;
            for r in &reports {
                println!("{}", r.summary());
                if !r.passed {
                    all = false;
                    if let Some(w) = &r.witness {
                        println!("  witness {}", serde_json::to_string(w)?);
                    }
                }
            }
            Ok(if all { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Inspect { dataset, dim } => {
            let summary = inspect_dataset(&dataset, ParseOptions { dim_override: dim })
                .with_context(|| format!("inspecting {}", dataset.display()))?;
            println!("{summary}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { manifest, output_dir, threads } => {
            let dir = output_dir.unwrap_or_else(|| manifest.parent().unwrap_or(std::path::Path::new(".")).join("replay"));
            let report = replay_manifest(&manifest, &dir, threads)?;
            if report.untimed {
                println!("timed run: seconds column excluded from comparison");
            }
            if report.identical() {
                println!("identical: all CSV outputs reproduced in {}", dir.display());
                Ok(ExitCode::SUCCESS)
            } else {
                for m in &report.mismatches {
                    println!("differs: {m}");
                }
                Ok(ExitCode::FAILURE)
            }
        }
    }
}
