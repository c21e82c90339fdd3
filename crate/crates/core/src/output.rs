//! Run and sweep output directories.
//!
//! A run directory holds `config.sha256`, `config.cfg` (canonical form),
//! `ledger.csv`, `final.ckpt` and `report.json`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::checkpoint::Checkpoint;
use crate::config::{RunConfig, SweepEntry};
use crate::diagnostics::LedgerWriter;
use crate::splitting::{ladder_sweep_with, run_simulation, HaltReason, RunReport, Simulation, SweepReport};
use crate::Result;

/// Hex SHA-256 of the canonical configuration text.
pub fn config_hash(config: &RunConfig) -> String {
    let digest = Sha256::digest(config.to_text().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
struct ReportJson<'a> {
    config_hash: &'a str,
    halt: &'a str,
    halt_time: Option<f64>,
    halt_detail: Option<&'a str>,
    windows: usize,
    final_time: f64,
    substeps: usize,
}

/// Runs `sim` and writes every artifact into `out`.
pub fn run_to_dir(sim: &mut Simulation, out: &Path) -> Result<RunReport> {
    fs::create_dir_all(out)?;
    let hash = config_hash(&sim.config);
    fs::write(out.join("config.sha256"), format!("{hash}\n"))?;
    fs::write(out.join("config.cfg"), sim.config.to_text())?;
    let mut ledger = LedgerWriter::new(BufWriter::new(File::create(out.join("ledger.csv"))?))?;
    let report = run_simulation(sim, &mut |r| ledger.write(r), &mut |_| {})?;
    ledger.flush()?;
    Checkpoint::from_simulation(sim).write(&out.join("final.ckpt"))?;
    let (halt_time, halt_detail) = match &report.halt {
        HaltReason::Completed => (None, None),
        HaltReason::Degeneracy { time, detail } => (Some(*time), Some(detail.as_str())),
    };
    let json = ReportJson {
        config_hash: &hash,
        halt: report.halt.label(),
        halt_time,
        halt_detail,
        windows: report.windows,
        final_time: report.final_time,
        substeps: report.substeps,
    };
    let mut f = File::create(out.join("report.json"))?;
    serde_json::to_writer_pretty(&mut f, &json).map_err(std::io::Error::from)?;
    writeln!(f)?;
    Ok(report)
}

/// Runs each entry into `out/entry_<k>` and writes `sweep.csv` with the fitted slopes.
pub fn sweep_to_dir(config: &RunConfig, entries: &[SweepEntry], out: &Path) -> Result<SweepReport> {
    fs::create_dir_all(out)?;
    let report = ladder_sweep_with(config, entries, |k, c| {
        let mut sim = Simulation::new(c)?;
        run_to_dir(&mut sim, &out.join(format!("entry_{k}")))
    });
    let mut f = BufWriter::new(File::create(out.join("sweep.csv"))?);
    writeln!(
        f,
        "entry,dt,xi,status,windows,mismatch,exterior_dissipation,sink,shell_dissipation,mass_drift,magnetic_drift,max_energy_excess,exterior_mass_fraction"
    )?;
    for (k, o) in report.outcomes.iter().enumerate() {
        match &o.result {
            Ok(s) => writeln!(
                f,
                "{k},{:?},{:?},{},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                o.entry.dt,
                o.entry.xi,
                s.halt,
                s.windows,
                s.cumulative.mismatch,
                s.cumulative.exterior_dissipation,
                s.cumulative.sink,
                s.cumulative.shell_dissipation,
                s.mass_drift,
                s.magnetic_drift,
                s.max_energy_excess,
                s.final_exterior_mass_fraction
            )?,
            Err(e) => writeln!(
                f,
                "{k},{:?},{:?},\"failed: {}\",,,,,,,,,",
                o.entry.dt,
                o.entry.xi,
                e.replace('"', "'")
            )?,
        }
    }
    let slope = |s: Option<f64>| s.map_or("nan".to_string(), |v| format!("{v:?}"));
    writeln!(f, "# mismatch_vs_dt_slope={}", slope(report.mismatch_slope))?;
    writeln!(f, "# exterior_vs_xi_slope={}", slope(report.exterior_slope))?;
    f.flush()?;
    Ok(report)
}
