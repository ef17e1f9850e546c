//! Benchmark fixtures.

use nalgebra::DVector;
use safeland_core::scenarios::scenario_two;
use safeland_core::sim::Phase;
use safeland_core::{run_scenario, Fidelity, FilterConfig, LcbfParams, UavState, UgvState};

/// Inputs to one filter call.
pub struct FilterFixture {
    pub u_nom: DVector<f64>,
    pub states: Vec<UavState>,
    pub targets: Vec<UgvState>,
    pub lcbf: Vec<LcbfParams>,
    pub radii: Vec<f64>,
    pub cfg: FilterConfig,
}

/// The tick of the moving-pad scenario with the most active barrier rows,
/// so the solver has real work to do.
pub fn contested_tick() -> FilterFixture {
    let cfg = scenario_two(Fidelity::Kinematic);
    let log = run_scenario(&cfg).expect("reference scenario runs");
    let rec = log
        .ticks
        .iter()
        .filter(|r| r.phase == Phase::Active && r.landed.iter().all(|l| !l))
        .max_by_key(|r| r.active.iter().filter(|&&a| a).count())
        .expect("scenario has controlled ticks");
    FilterFixture {
        u_nom: rec.u_nom.clone(),
        states: rec.uavs.clone(),
        targets: log.targets.iter().map(|&k| rec.ugvs[k]).collect(),
        lcbf: log.lcbf_params.clone(),
        radii: log.radii.clone(),
        cfg: cfg.filter,
    }
}
