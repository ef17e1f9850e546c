//! Subcommand bodies. Each returns a process exit code and writes its
//! human-readable report to the given sink.

use std::io::Write;
use std::path::{Path, PathBuf};

use safeland_core::Fidelity;

use crate::error::Result;
use crate::export::{write_run, RunMetrics};
use crate::scenario_file::load_scenario;
use crate::sweep::{run_sweep, Grid};
use crate::validate::{all_passed, render_table, run_all, ValidateOptions};

pub const EXIT_OK: i32 = 0;
/// Unreadable, malformed or invalid input, or an I/O failure.
pub const EXIT_INPUT: i32 = 1;
/// The filter became infeasible or the state stopped being finite.
pub const EXIT_HALTED: i32 = 2;
/// A barrier fell below its tolerance.
pub const EXIT_BREACH: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub scenario: PathBuf,
    pub out_dir: PathBuf,
    pub fidelity: Option<Fidelity>,
}

/// Loads, validates, simulates and exports one scenario.
pub fn execute_run(manifest: &RunManifest) -> Result<RunMetrics> {
    let mut cfg = load_scenario(&manifest.scenario)?;
    if let Some(f) = manifest.fidelity {
        cfg.fidelity = f;
    }
    cfg.validate()?;
    let log = safeland_core::run_scenario(&cfg)?;
    write_run(&manifest.out_dir, &log)
}

pub fn exit_code(m: &RunMetrics) -> i32 {
    if !m.completed {
        EXIT_HALTED
    } else if m.breach.is_some() {
        EXIT_BREACH
    } else {
        EXIT_OK
    }
}

pub fn cmd_run(manifest: &RunManifest, out: &mut dyn Write) -> i32 {
    let metrics = match execute_run(manifest) {
        Ok(m) => m,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let _ = writeln!(
        out,
        "{} ({}): {} touchdowns, min h_s {}, wrote {}",
        metrics.scenario,
        metrics.fidelity,
        metrics.touchdowns.len(),
        metrics
            .min_scbf_overall
            .map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}")),
        manifest.out_dir.display()
    );
    if let Some(h) = &metrics.halt {
        let _ = writeln!(out, "halted at tick {} (t = {:.3} s): {}", h.tick, h.time, h.reason);
    }
    if let Some(b) = &metrics.breach {
        let _ = writeln!(
            out,
            "breach at tick {} (t = {:.3} s): {} = {:.6} below -{}",
            b.tick, b.time, b.barrier, b.value, metrics.breach_tolerance
        );
    }
    exit_code(&metrics)
}

pub fn cmd_validate(opts: &ValidateOptions, out: &mut dyn Write) -> i32 {
    let results = run_all(opts);
    let _ = write!(out, "{}", render_table(&results));
    if all_passed(&results) {
        EXIT_OK
    } else {
        EXIT_BREACH
    }
}

pub fn cmd_sweep(scenario: &Path, grid: &str, out_dir: &Path, out: &mut dyn Write) -> i32 {
    let outcome = (|| -> Result<_> {
        let grid = Grid::parse(grid)?;
        let base = load_scenario(scenario)?;
        run_sweep(&base, &grid, out_dir)
    })();
    match outcome {
        Ok(rows) => {
            let safe = rows.iter().filter(|r| r.status == "safe").count();
            let _ = writeln!(
                out,
                "{} cells, {safe} safe, summary in {}",
                rows.len(),
                out_dir.join("summary.csv").display()
            );
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            EXIT_INPUT
        }
    }
}
