//! Parameter sweeps over barrier shaping and filter gains.
//!
//! A grid is written `key=v1,v2;key=v3`, for example `alpha=1,2,4;beta=1`.
//! Keys: `alpha`, `beta`, `rho_l`, `rho_s`, `rho` (both gains), `sigma`.
//! Every combination is a cell; cells run concurrently, each writing its own
//! directory, and the summary is assembled once all cells finish.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use safeland_core::sim::{Phase, SimLog};
use safeland_core::{run_scenario, ScenarioConfig};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::export::{write_run, RunMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKey {
    Alpha,
    Beta,
    RhoL,
    RhoS,
    Rho,
    Sigma,
}

impl SweepKey {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "alpha" => SweepKey::Alpha,
            "beta" => SweepKey::Beta,
            "rho_l" => SweepKey::RhoL,
            "rho_s" => SweepKey::RhoS,
            "rho" => SweepKey::Rho,
            "sigma" => SweepKey::Sigma,
            other => return Err(CliError::Grid(format!("unknown key `{other}`"))),
        })
    }

    fn apply(self, cfg: &mut ScenarioConfig, value: f64) {
        match self {
            SweepKey::Alpha => cfg.uavs.iter_mut().for_each(|u| u.lcbf.alpha = value),
            SweepKey::Beta => cfg.uavs.iter_mut().for_each(|u| u.lcbf.beta = value),
            SweepKey::RhoL => cfg.filter.rho_l.fill(value),
            SweepKey::RhoS => cfg.filter.rho_s.fill(value),
            SweepKey::Rho => {
                cfg.filter.rho_l.fill(value);
                cfg.filter.rho_s.fill(value);
            }
            SweepKey::Sigma => cfg.filter.sigma = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub axes: Vec<(SweepKey, Vec<f64>)>,
}

impl Grid {
    /// Parses a grid spec. A blank spec is the empty grid.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut axes: Vec<(SweepKey, Vec<f64>)> = Vec::new();
        for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, values) = part
                .split_once('=')
                .ok_or_else(|| CliError::Grid(format!("`{part}` is not key=values")))?;
            let key = SweepKey::parse(key.trim())?;
            if axes.iter().any(|(k, _)| *k == key) {
                return Err(CliError::Grid(format!("key `{part}` repeated")));
            }
            let values = values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Grid(format!("`{}` is not a number", v.trim())))
                })
                .collect::<Result<Vec<_>>>()?;
            axes.push((key, values));
        }
        Ok(Grid { axes })
    }

    /// All combinations, last axis varying fastest. Empty for the empty grid.
    pub fn cells(&self) -> Vec<Vec<(SweepKey, f64)>> {
        if self.axes.is_empty() {
            return Vec::new();
        }
        let mut cells = vec![Vec::new()];
        for (key, values) in &self.axes {
            cells = cells
                .into_iter()
                .flat_map(|prefix: Vec<(SweepKey, f64)>| {
                    values.iter().map(move |&v| {
                        let mut c = prefix.clone();
                        c.push((*key, v));
                        c
                    })
                })
                .collect();
        }
        cells
    }
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub cell: usize,
    pub alpha: f64,
    pub beta: f64,
    pub rho_l: f64,
    pub rho_s: f64,
    pub sigma: f64,
    pub status: String,
    pub last_touchdown_time: Option<f64>,
    pub min_lcbf_after_crossing: Option<f64>,
    pub min_scbf: Option<f64>,
    pub min_pairwise_distance: Option<f64>,
    pub max_deviation: Option<f64>,
    pub peak_boundary_height: Option<f64>,
    pub error: String,
}

pub const SUMMARY_HEADER: [&str; 14] = [
    "cell",
    "alpha",
    "beta",
    "rho_l",
    "rho_s",
    "sigma",
    "status",
    "last_touchdown_time",
    "min_lcbf_after_crossing",
    "min_scbf",
    "min_pairwise_distance",
    "max_deviation",
    "peak_boundary_height",
    "error",
];

/// Peak of the landing boundary implied by the logged data.
///
/// For every controlled tick with the vehicle off axis, the logged barrier
/// gives the boundary height `e_z - h`; dividing by the unit-β shape
/// `α d e^{-α d}` estimates β, and the peak height is `β / e`. Returns the
/// largest estimate over vehicles.
pub fn logged_peak_height(log: &SimLog) -> Option<f64> {
    let mut best: Option<f64> = None;
    for i in 0..log.n_uavs() {
        let alpha = log.lcbf_params[i].alpha;
        let mut estimates: Vec<f64> = log
            .ticks
            .iter()
            .filter(|r| r.phase == Phase::Active)
            .filter_map(|r| {
                let e = r.uavs[i].position - r.ugvs[log.targets[i]].position;
                let d = e.xy().norm();
                let shape = alpha * d * (-alpha * d).exp();
                (d > 0.05 && shape > 1e-3).then(|| (e.z - r.lcbf[i]) / shape)
            })
            .collect();
        if estimates.is_empty() {
            continue;
        }
        estimates.sort_by(f64::total_cmp);
        let beta = estimates[estimates.len() / 2];
        let peak = beta / std::f64::consts::E;
        best = Some(best.map_or(peak, |b: f64| b.max(peak)));
    }
    best
}

fn run_cell(base: &ScenarioConfig, index: usize, cell: &[(SweepKey, f64)], out_dir: &Path) -> SummaryRow {
    let mut cfg = base.clone();
    for &(key, value) in cell {
        key.apply(&mut cfg, value);
    }
    cfg.name = format!("{}-cell{index:03}", base.name);
    let mut row = SummaryRow {
        cell: index,
        alpha: cfg.uavs.first().map_or(f64::NAN, |u| u.lcbf.alpha),
        beta: cfg.uavs.first().map_or(f64::NAN, |u| u.lcbf.beta),
        rho_l: cfg.filter.rho_l.first().copied().unwrap_or(f64::NAN),
        rho_s: cfg.filter.rho_s.first().copied().unwrap_or(f64::NAN),
        sigma: cfg.filter.sigma,
        status: "error".into(),
        last_touchdown_time: None,
        min_lcbf_after_crossing: None,
        min_scbf: None,
        min_pairwise_distance: None,
        max_deviation: None,
        peak_boundary_height: None,
        error: String::new(),
    };
    let result = run_scenario(&cfg).map_err(CliError::from).and_then(|log| {
        let metrics = write_run(&cell_dir(out_dir, index), &log)?;
        Ok((log, metrics))
    });
    match result {
        Ok((log, m)) => fill_row(&mut row, &log, &m),
        Err(e) => row.error = e.to_string(),
    }
    row
}

fn fill_row(row: &mut SummaryRow, log: &SimLog, m: &RunMetrics) {
    row.status = if !m.completed {
        "halted"
    } else if m.breach.is_some() {
        "breach"
    } else {
        "safe"
    }
    .into();
    let all_landed = m.touchdowns.len() == log.n_uavs();
    row.last_touchdown_time = all_landed.then(|| m.touchdowns.iter().map(|t| t.time).fold(f64::NEG_INFINITY, f64::max));
    row.min_lcbf_after_crossing = m.min_lcbf_after_crossing.iter().flatten().copied().reduce(f64::min);
    row.min_scbf = m.min_scbf_overall;
    row.min_pairwise_distance = m.min_pairwise_distance;
    row.max_deviation = Some(m.max_deviation);
    row.peak_boundary_height = logged_peak_height(log);
    if let Some(h) = &m.halt {
        row.error = h.reason.clone();
    }
}

pub fn cell_dir(out_dir: &Path, index: usize) -> PathBuf {
    out_dir.join(format!("cell_{index:03}"))
}

/// Runs every cell and writes `summary.csv`; per-cell failures become rows.
pub fn run_sweep(base: &ScenarioConfig, grid: &Grid, out_dir: &Path) -> Result<Vec<SummaryRow>> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let cells = grid.cells();
    let rows: Vec<SummaryRow> = cells
        .par_iter()
        .enumerate()
        .map(|(k, cell)| run_cell(base, k, cell, out_dir))
        .collect();
    write_summary(&out_dir.join("summary.csv"), &rows)?;
    Ok(rows)
}

fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let wrap = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(wrap)?;
    w.write_record(SUMMARY_HEADER).map_err(wrap)?;
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
