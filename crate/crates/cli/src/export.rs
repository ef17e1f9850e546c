//! Run artifacts: `states.csv`, `barriers.csv`, `inputs.csv` and `metrics.json`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use safeland_core::filter::block;
use safeland_core::sim::{Outcome, Phase, SafetyMetrics, SimLog};
use safeland_core::{safety_metrics, Fidelity};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Barrier tolerance for the kinematic model, where forward invariance is exact.
pub const KINEMATIC_BREACH_TOL: f64 = 1e-6;
/// Barrier tolerance for the rigid-body model, which only tracks the kinematic command.
pub const FULL_DYNAMICS_BREACH_TOL: f64 = 0.05;

pub fn breach_tolerance(fidelity: Fidelity) -> f64 {
    match fidelity {
        Fidelity::Kinematic => KINEMATIC_BREACH_TOL,
        Fidelity::FullDynamics => FULL_DYNAMICS_BREACH_TOL,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRow {
    pub time: f64,
    pub uav_id: usize,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierRow {
    pub time: f64,
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRow {
    pub time: f64,
    pub uav_id: usize,
    pub unom_x: f64,
    pub unom_y: f64,
    pub unom_z: f64,
    pub ustar_x: f64,
    pub ustar_y: f64,
    pub ustar_z: f64,
}

/// First controlled tick at which a barrier falls below `-tol`.
///
/// Landing barriers count only after they first become nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breach {
    pub tick: usize,
    pub time: f64,
    pub barrier: String,
    pub value: f64,
}

pub fn find_breach(log: &SimLog, tol: f64) -> Option<Breach> {
    let n = log.n_uavs();
    let mut crossed = vec![false; n];
    for (tick, rec) in log.ticks.iter().enumerate() {
        if rec.phase != Phase::Active {
            continue;
        }
        for (i, &h) in rec.lcbf.iter().enumerate() {
            if crossed[i] && h < -tol {
                return Some(Breach {
                    tick,
                    time: rec.time,
                    barrier: log.barrier_names[i].clone(),
                    value: h,
                });
            }
            crossed[i] |= h >= 0.0;
        }
        if let Some((k, &h)) = rec.scbf.iter().enumerate().find(|(_, &h)| h < -tol) {
            return Some(Breach {
                tick,
                time: rec.time,
                barrier: log.barrier_names[n + k].clone(),
                value: h,
            });
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaltSummary {
    pub tick: usize,
    pub time: f64,
    pub reason: String,
    pub positions: Vec<[f64; 3]>,
    pub lcbf: Vec<f64>,
    pub scbf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TouchdownSummary {
    pub uav_id: usize,
    pub time: f64,
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub scenario: String,
    pub fidelity: String,
    pub completed: bool,
    pub halt: Option<HaltSummary>,
    pub breach_tolerance: f64,
    pub breach: Option<Breach>,
    pub touchdowns: Vec<TouchdownSummary>,
    pub initial_lcbf: Vec<f64>,
    pub lcbf_crossing_time: Vec<Option<f64>>,
    pub min_lcbf_after_crossing: Vec<Option<f64>>,
    pub min_scbf: BTreeMap<String, f64>,
    /// Smallest collision barrier over all pairs; absent for a single vehicle.
    pub min_scbf_overall: Option<f64>,
    pub min_pairwise_distance: Option<f64>,
    pub max_deviation: f64,
    pub max_altitude_above_pad: Vec<f64>,
}

impl RunMetrics {
    pub fn from_log(log: &SimLog) -> Self {
        let m: SafetyMetrics = safety_metrics(log);
        let n = log.n_uavs();
        let tol = breach_tolerance(log.fidelity);
        let halt = match &log.outcome {
            Outcome::Completed => None,
            Outcome::Halted(h) => Some(HaltSummary {
                tick: h.tick,
                time: h.time,
                reason: h.reason.to_string(),
                positions: h.uavs.iter().map(|s| s.position.into()).collect(),
                lcbf: h.lcbf.clone(),
                scbf: h.scbf.clone(),
            }),
        };
        let finite = |x: f64| x.is_finite().then_some(x);
        RunMetrics {
            scenario: log.scenario.clone(),
            fidelity: fidelity_name(log.fidelity).into(),
            completed: m.completed,
            halt,
            breach_tolerance: tol,
            breach: find_breach(log, tol),
            touchdowns: log
                .touchdowns
                .iter()
                .map(|t| TouchdownSummary {
                    uav_id: t.uav + 1,
                    time: t.time,
                })
                .collect(),
            initial_lcbf: m.initial_lcbf.clone(),
            lcbf_crossing_time: m.lcbf_crossing_time.clone(),
            min_lcbf_after_crossing: m.min_lcbf_after_crossing.clone(),
            min_scbf: log.barrier_names[n..]
                .iter()
                .cloned()
                .zip(m.min_scbf.iter().copied())
                .collect(),
            min_scbf_overall: finite(m.min_scbf_overall()),
            min_pairwise_distance: finite(m.min_pairwise_distance),
            max_deviation: m.max_deviation,
            max_altitude_above_pad: m.max_altitude_above_pad.clone(),
        }
    }

    /// Safe completion: no halt and no barrier breach.
    pub fn is_safe(&self) -> bool {
        self.completed && self.breach.is_none()
    }
}

pub fn fidelity_name(f: Fidelity) -> &'static str {
    match f {
        Fidelity::Kinematic => "kinematic",
        Fidelity::FullDynamics => "full",
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let wrap = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv_writer(path)?;
    for row in rows {
        w.serialize(row).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let wrap = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(wrap)?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(wrap)
}

pub fn state_rows(log: &SimLog) -> impl Iterator<Item = StateRow> + '_ {
    log.ticks.iter().flat_map(|rec| {
        rec.uavs.iter().enumerate().map(move |(i, s)| StateRow {
            time: rec.time,
            uav_id: i + 1,
            px: s.position.x,
            py: s.position.y,
            pz: s.position.z,
            vx: s.velocity.x,
            vy: s.velocity.y,
            vz: s.velocity.z,
        })
    })
}

pub fn barrier_rows(log: &SimLog) -> impl Iterator<Item = BarrierRow> + '_ {
    log.ticks.iter().flat_map(move |rec| {
        log.barrier_names
            .iter()
            .zip(rec.lcbf.iter().chain(rec.scbf.iter()))
            .map(move |(name, &value)| BarrierRow {
                time: rec.time,
                name: name.clone(),
                value,
            })
    })
}

pub fn input_rows(log: &SimLog) -> impl Iterator<Item = InputRow> + '_ {
    log.ticks.iter().flat_map(|rec| {
        (0..rec.uavs.len()).map(move |i| {
            let (n, s) = (block(&rec.u_nom, i), block(&rec.u_star, i));
            InputRow {
                time: rec.time,
                uav_id: i + 1,
                unom_x: n.x,
                unom_y: n.y,
                unom_z: n.z,
                ustar_x: s.x,
                ustar_y: s.y,
                ustar_z: s.z,
            }
        })
    })
}

/// Writes all four artifacts into `dir`, creating it if needed.
pub fn write_run(dir: &Path, log: &SimLog) -> Result<RunMetrics> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_rows(&dir.join("states.csv"), state_rows(log))?;
    write_rows(&dir.join("barriers.csv"), barrier_rows(log))?;
    write_rows(&dir.join("inputs.csv"), input_rows(log))?;
    let metrics = RunMetrics::from_log(log);
    let path = dir.join("metrics.json");
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &metrics).map_err(|source| CliError::Json { path, source })?;
    Ok(metrics)
}

pub fn read_states(path: &Path) -> Result<Vec<StateRow>> {
    read_rows(path)
}

pub fn read_barriers(path: &Path) -> Result<Vec<BarrierRow>> {
    read_rows(path)
}

pub fn read_metrics(path: &Path) -> Result<RunMetrics> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}
