use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mhdshell::checkpoint::Checkpoint;
use mhdshell::config::{parse_manifest, RunConfig};
use mhdshell::output::{run_to_dir, sweep_to_dir};
use mhdshell::splitting::{HaltReason, Simulation};
use mhdshell::validate::run_suite;

#[derive(Parser)]
#[command(name = "mhdshell", version, about = "Fluid-shell interaction simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// March one configuration and write its ledger and final checkpoint.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run every `dt=<v> xi=<v>` entry of a manifest.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the property suite; exits nonzero on any failure.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn configure_threads() -> Result<(), String> {
    if let Ok(raw) = std::env::var("MHDSHELL_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .map_err(|_| format!("MHDSHELL_THREADS must be a positive integer, got '{raw}'"))?;
        if n == 0 {
            return Err("MHDSHELL_THREADS must be at least 1".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    configure_threads()?;
    match cli.command {
        Command::Run { config, out, resume } => {
            let cfg = RunConfig::load(&config)?;
            let mut sim = match resume {
                Some(path) => Checkpoint::read(&path)?.resume(&cfg)?,
                None => Simulation::new(&cfg)?,
            };
            let report = run_to_dir(&mut sim, &out)?;
            match &report.halt {
                HaltReason::Completed => println!(
                    "completed {} windows to t = {} in {} fluid substeps",
                    report.windows, report.final_time, report.substeps
                ),
                HaltReason::Degeneracy { time, detail } => {
                    println!("halted: degeneracy at t = {time}: {detail}")
                }
            }
            Ok(true)
        }
        Command::Sweep { config, manifest, out } => {
            let cfg = RunConfig::load(&config)?;
            let text = std::fs::read_to_string(&manifest)?;
            let entries = parse_manifest(&text, &manifest.display().to_string())?;
            let report = sweep_to_dir(&cfg, &entries, &out)?;
            for o in &report.outcomes {
                match &o.result {
                    Ok(s) => println!(
                        "dt={} xi={}: {} mismatch={:e} exterior={:e}",
                        o.entry.dt, o.entry.xi, s.halt, s.cumulative.mismatch, s.cumulative.exterior_dissipation
                    ),
                    Err(e) => println!("dt={} xi={}: failed: {e}", o.entry.dt, o.entry.xi),
                }
            }
            println!("mismatch slope vs dt: {:?}", report.mismatch_slope);
            println!("exterior slope vs xi: {:?}", report.exterior_slope);
            Ok(report.outcomes.iter().all(|o| o.result.is_ok()))
        }
        Command::Validate { seed } => {
            let results = run_suite(seed);
            for r in &results {
                println!("{r}");
            }
            Ok(results.iter().all(|r| r.passed))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
