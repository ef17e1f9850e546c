//! Scenario orchestration: ground-vehicle motion, the outer filter loop,
//! the inner attitude loop, touchdown detection and logging.
//!
//! Time runs on a uniform grid `t_k = t_start + k * dt_outer`. Before
//! `controller_on_time` every aerial vehicle rides its carrier; afterwards
//! each outer tick computes the nominal command, filters it, and advances
//! the vehicles either kinematically or through the rigid-body model.

use std::collections::BTreeSet;

use nalgebra::DVector;

use crate::barriers::{lcbf_value, scbf_eval, LcbfParams};
use crate::control::{
    attitude_control, body_force_map, desired_attitude, hover_attitude, nominal_position_control,
    velocity_tracking_control, AttitudeSetpoint, GainSet, SetpointDifferentiator, DEFAULT_MIN_THRUST,
};
use crate::error::{Error, Result};
use crate::filter::{block, filter, pair_row_index, stack, FilterConfig};
use crate::geometry::{step_full_dynamics, step_kinematic, RotationMatrix, UavParams, UavState, UgvState, Vec3};

/// Default distance from the pad at which a vehicle is considered landed, m.
pub const DEFAULT_LANDING_TOLERANCE: f64 = 0.02;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fidelity {
    /// Single integrator `ṗ = u*`.
    Kinematic,
    /// Rigid-body quadrotor with velocity and attitude tracking.
    FullDynamics,
}

/// Velocity program of a ground vehicle.
#[derive(Debug, Clone, PartialEq)]
pub enum MotionProgram {
    Static,
    /// `v(t) = base + amplitude ⊙ cos(omega t + phase)`
    Sinusoidal {
        base: Vec3,
        amplitude: Vec3,
        omega: f64,
        phase: f64,
    },
    /// Constant velocity `v` from each start time until the next one.
    /// Before the first start time the vehicle is at rest.
    PiecewiseConstant {
        segments: Vec<(f64, Vec3)>,
    },
}

impl MotionProgram {
    pub fn velocity(&self, t: f64) -> Vec3 {
        match self {
            MotionProgram::Static => Vec3::zeros(),
            MotionProgram::Sinusoidal {
                base,
                amplitude,
                omega,
                phase,
            } => base + amplitude * (omega * t + phase).cos(),
            MotionProgram::PiecewiseConstant { segments } => segments
                .iter()
                .rev()
                .find(|(start, _)| *start <= t)
                .map(|(_, v)| *v)
                .unwrap_or_else(Vec3::zeros),
        }
    }

    /// `∫_{t0}^{t} v(τ) dτ` in closed form.
    pub fn displacement(&self, t0: f64, t: f64) -> Vec3 {
        match self {
            MotionProgram::Static => Vec3::zeros(),
            MotionProgram::Sinusoidal {
                base,
                amplitude,
                omega,
                phase,
            } => {
                let swing = if *omega == 0.0 {
                    amplitude * (phase.cos() * (t - t0))
                } else {
                    amplitude * (((omega * t + phase).sin() - (omega * t0 + phase).sin()) / omega)
                };
                base * (t - t0) + swing
            }
            MotionProgram::PiecewiseConstant { segments } => {
                let mut total = Vec3::zeros();
                for (k, (start, v)) in segments.iter().enumerate() {
                    let end = segments.get(k + 1).map_or(f64::INFINITY, |s| s.0);
                    let lo = start.max(t0);
                    let hi = end.min(t);
                    if hi > lo {
                        total += v * (hi - lo);
                    }
                }
                total
            }
        }
    }
}

/// A ground vehicle: pad position at scenario start plus its motion program.
#[derive(Debug, Clone, PartialEq)]
pub struct UgvSpec {
    pub initial_position: Vec3,
    pub program: MotionProgram,
}

/// Pad state at time `t` for a vehicle that was at `spec.initial_position` at `t0`.
pub fn ugv_state_at(spec: &UgvSpec, t0: f64, t: f64) -> UgvState {
    UgvState {
        position: spec.initial_position + spec.program.displacement(t0, t),
        velocity: spec.program.velocity(t),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UavSpec {
    pub params: UavParams,
    pub lcbf: LcbfParams,
    /// Ground vehicle carrying this one before the controller switches on (0-based).
    pub carrier: Option<usize>,
    /// Ground vehicle this one must land on (0-based).
    pub target: usize,
    /// Initial position, used when there is no carrier.
    pub initial_position: Vec3,
}

/// Extra shaping constants carried with a scenario. No control law reads them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertParams {
    pub a: f64,
    pub b: f64,
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub uavs: Vec<UavSpec>,
    pub ugvs: Vec<UgvSpec>,
    pub gains: GainSet,
    pub filter: FilterConfig,
    pub t_start: f64,
    pub controller_on_time: f64,
    pub t_final: f64,
    pub dt_outer: f64,
    pub dt_inner: f64,
    pub fidelity: Fidelity,
    pub landing_tolerance: f64,
    /// Desired heading, rad.
    pub yaw: f64,
    pub inert: Option<InertParams>,
}

impl ScenarioConfig {
    pub fn n_uavs(&self) -> usize {
        self.uavs.len()
    }

    fn invariant(name: &'static str, detail: impl Into<String>) -> Error {
        Error::Invariant {
            name,
            detail: detail.into(),
        }
    }

    /// Checks every precondition of [`run_scenario`].
    pub fn validate(&self) -> Result<()> {
        let n = self.uavs.len();
        if n == 0 {
            return Err(Self::invariant(
                "vehicle-count",
                "at least one aerial vehicle is required",
            ));
        }
        for (i, u) in self.uavs.iter().enumerate() {
            u.params.validate()?;
            LcbfParams::new(u.lcbf.alpha, u.lcbf.beta)?;
            if u.target >= self.ugvs.len() || u.carrier.is_some_and(|c| c >= self.ugvs.len()) {
                return Err(Self::invariant(
                    "vehicle-assignment",
                    format!("vehicle {} refers to a missing ground vehicle", i + 1),
                ));
            }
        }
        if self.gains.n_uavs() != n {
            return Err(Error::DimensionMismatch(format!(
                "gains sized for {} vehicles, scenario has {n}",
                self.gains.n_uavs()
            )));
        }
        self.gains.validate()?;
        self.filter.validate(n)?;

        if !(self.dt_outer > 0.0 && self.dt_inner > 0.0 && self.dt_inner <= self.dt_outer) {
            return Err(Self::invariant(
                "time-steps",
                format!(
                    "need 0 < dt_inner <= dt_outer, got {} and {}",
                    self.dt_inner, self.dt_outer
                ),
            ));
        }
        let ratio = self.dt_outer / self.dt_inner;
        if (ratio - ratio.round()).abs() > 1e-6 {
            return Err(Self::invariant("time-steps", "dt_outer must be a multiple of dt_inner"));
        }
        if !(self.t_final > self.t_start
            && self.controller_on_time >= self.t_start
            && self.controller_on_time <= self.t_final)
        {
            return Err(Self::invariant(
                "time-horizon",
                "need t_start <= controller_on_time <= t_final and t_start < t_final",
            ));
        }
        if !(self.landing_tolerance > 0.0) {
            return Err(Self::invariant("landing-tolerance", "must be positive"));
        }

        let ticks = self.tick_count();
        let max_pair = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| self.uavs[i].params.radius + self.uavs[j].params.radius)
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
        for k in 0..=ticks {
            let t = self.time_at(k);
            let pads: Vec<UgvState> = self.ugvs.iter().map(|g| ugv_state_at(g, self.t_start, t)).collect();
            for (g, pad) in pads.iter().enumerate() {
                let speed = pad.velocity.norm();
                if !(speed < self.filter.sigma) {
                    return Err(Self::invariant(
                        "ground-vehicle-speed-bound",
                        format!(
                            "ground vehicle {} moves at {speed:.4} m/s at t = {t:.3} s, bound is {}",
                            g + 1,
                            self.filter.sigma
                        ),
                    ));
                }
            }
            if let Some(limit) = max_pair {
                for a in 0..pads.len() {
                    for b in (a + 1)..pads.len() {
                        let dist = (pads[a].position - pads[b].position).norm();
                        if !(dist > limit) {
                            return Err(Self::invariant(
                                "ground-vehicle-separation",
                                format!(
                                    "ground vehicles {} and {} are {dist:.4} m apart at t = {t:.3} s, need more than {limit}",
                                    a + 1,
                                    b + 1
                                ),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn tick_count(&self) -> usize {
        ((self.t_final - self.t_start) / self.dt_outer).round() as usize
    }

    pub fn time_at(&self, tick: usize) -> f64 {
        self.t_start + tick as f64 * self.dt_outer
    }

    /// Names of the logged barriers: `h_l1..h_lN` then `h_sij` in row order.
    pub fn barrier_names(&self) -> Vec<String> {
        let n = self.n_uavs();
        let mut names: Vec<String> = (1..=n).map(|i| format!("h_l{i}")).collect();
        names.extend(pair_names(n));
        names
    }
}

/// `h_sij` names in constraint-row order.
pub fn pair_names(n: usize) -> Vec<String> {
    let mut pairs: Vec<(usize, usize, usize)> = (1..=n)
        .flat_map(|i| ((i + 1)..=n).map(move |j| (pair_row_index(i, j, n).unwrap_or(0), i, j)))
        .collect();
    pairs.sort_unstable();
    pairs.into_iter().map(|(_, i, j)| format!("h_s{i}{j}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Vehicles ride their carriers; no control.
    Carry,
    Active,
}

/// Everything recorded at one outer tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub time: f64,
    pub phase: Phase,
    pub uavs: Vec<UavState>,
    pub ugvs: Vec<UgvState>,
    pub u_nom: DVector<f64>,
    pub u_star: DVector<f64>,
    /// Landing barrier values, one per vehicle.
    pub lcbf: Vec<f64>,
    /// Collision barrier values in row order.
    pub scbf: Vec<f64>,
    /// `A u* + b` per barrier row; empty during carry.
    pub margins: Vec<f64>,
    /// Barrier rows with a positive multiplier; empty during carry.
    pub active: Vec<bool>,
    pub landed: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Touchdown {
    pub uav: usize,
    pub tick: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HaltRecord {
    pub tick: usize,
    pub time: f64,
    pub reason: Error,
    pub uavs: Vec<UavState>,
    pub u_nom: DVector<f64>,
    pub lcbf: Vec<f64>,
    pub scbf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Completed,
    Halted(Box<HaltRecord>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub scenario: String,
    pub fidelity: Fidelity,
    pub controller_on_time: f64,
    pub barrier_names: Vec<String>,
    pub radii: Vec<f64>,
    pub lcbf_params: Vec<LcbfParams>,
    pub targets: Vec<usize>,
    pub ticks: Vec<TickRecord>,
    pub touchdowns: Vec<Touchdown>,
    pub outcome: Outcome,
}

impl SimLog {
    pub fn completed(&self) -> bool {
        matches!(self.outcome, Outcome::Completed)
    }

    pub fn n_uavs(&self) -> usize {
        self.radii.len()
    }
}

fn barrier_values(
    states: &[UavState],
    targets: &[UgvState],
    lcbf: &[LcbfParams],
    radii: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = states.len();
    let l = (0..n)
        .map(|i| lcbf_value(&states[i].position, &targets[i].position, &lcbf[i]))
        .collect();
    let mut s = vec![0.0; n * n.saturating_sub(1) / 2];
    for i in 0..n {
        for j in (i + 1)..n {
            let row = pair_row_index(i + 1, j + 1, n).expect("valid pair") - 1 - n;
            s[row] = scbf_eval(&states[i].position, &states[j].position, radii[i], radii[j]).value;
        }
    }
    (l, s)
}

fn pin(state: &mut UavState, pad: &UgvState, attitude: RotationMatrix) {
    state.position = pad.position;
    state.velocity = pad.velocity;
    state.attitude = attitude;
    state.body_rate = Vec3::zeros();
}

/// Runs a scenario to completion or to the first halting condition.
///
/// Returns `Err` only when the configuration itself is invalid; runtime
/// failures (infeasible filter, non-finite state) end the log with
/// [`Outcome::Halted`].
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimLog> {
    cfg.validate()?;
    let n = cfg.n_uavs();
    let lcbf: Vec<LcbfParams> = cfg.uavs.iter().map(|u| u.lcbf).collect();
    let radii: Vec<f64> = cfg.uavs.iter().map(|u| u.params.radius).collect();
    let masses: Vec<f64> = cfg.uavs.iter().map(|u| u.params.mass).collect();
    let hover: Vec<RotationMatrix> = masses.iter().map(|&m| hover_attitude(m, cfg.yaw)).collect();
    let inner_steps = (cfg.dt_outer / cfg.dt_inner).round() as usize;

    let pads_at = |t: f64| -> Vec<UgvState> { cfg.ugvs.iter().map(|g| ugv_state_at(g, cfg.t_start, t)).collect() };

    let initial_pads = pads_at(cfg.t_start);
    let mut states: Vec<UavState> = cfg
        .uavs
        .iter()
        .enumerate()
        .map(|(i, u)| match u.carrier {
            Some(c) => {
                let mut s = UavState::at_rest(Vec3::zeros(), hover[i]);
                pin(&mut s, &initial_pads[c], hover[i]);
                s
            }
            None => UavState::at_rest(u.initial_position, hover[i]),
        })
        .collect();

    let mut landed: BTreeSet<usize> = BTreeSet::new();
    let mut differentiators = vec![SetpointDifferentiator::new(); n];
    let mut last_r_d = hover.clone();
    let mut log = SimLog {
        scenario: cfg.name.clone(),
        fidelity: cfg.fidelity,
        controller_on_time: cfg.controller_on_time,
        barrier_names: cfg.barrier_names(),
        radii: radii.clone(),
        lcbf_params: lcbf.clone(),
        targets: cfg.uavs.iter().map(|u| u.target).collect(),
        ticks: Vec::with_capacity(cfg.tick_count() + 1),
        touchdowns: Vec::new(),
        outcome: Outcome::Completed,
    };

    let last_tick = cfg.tick_count();
    for tick in 0..=last_tick {
        let t = cfg.time_at(tick);
        let pads = pads_at(t);
        let targets: Vec<UgvState> = cfg.uavs.iter().map(|u| pads[u.target]).collect();

        if t < cfg.controller_on_time - TIME_EPS {
            for (i, u) in cfg.uavs.iter().enumerate() {
                if let Some(c) = u.carrier {
                    pin(&mut states[i], &pads[c], hover[i]);
                }
            }
            let (l, s) = barrier_values(&states, &targets, &lcbf, &radii);
            let v = stack(&states.iter().map(|s| s.velocity).collect::<Vec<_>>());
            log.ticks.push(TickRecord {
                time: t,
                phase: Phase::Carry,
                uavs: states.clone(),
                ugvs: pads,
                u_nom: v.clone(),
                u_star: v,
                lcbf: l,
                scbf: s,
                margins: Vec::new(),
                active: Vec::new(),
                landed: vec![false; n],
            });
            continue;
        }

        for i in 0..n {
            if landed.contains(&i) {
                continue;
            }
            let e = states[i].position - targets[i].position;
            if e.norm() <= cfg.landing_tolerance && e.x.hypot(e.y) < cfg.filter.d_tol {
                landed.insert(i);
                log.touchdowns.push(Touchdown { uav: i, tick, time: t });
            }
        }
        for &i in &landed {
            pin(&mut states[i], &targets[i], hover[i]);
        }

        let p = stack(&states.iter().map(|s| s.position).collect::<Vec<_>>());
        let p_d = stack(&targets.iter().map(|s| s.position).collect::<Vec<_>>());
        let v_d = stack(&targets.iter().map(|s| s.velocity).collect::<Vec<_>>());
        let mut u_nom = nominal_position_control(&p, &p_d, &v_d, &cfg.gains.kp);
        for &i in &landed {
            u_nom.fixed_rows_mut::<3>(3 * i).copy_from(&targets[i].velocity);
        }

        let (l, s) = barrier_values(&states, &targets, &lcbf, &radii);
        let out = match filter(&u_nom, &states, &targets, &lcbf, &radii, &cfg.filter, &landed) {
            Ok(out) => out,
            Err(reason) => {
                log.outcome = Outcome::Halted(Box::new(HaltRecord {
                    tick,
                    time: t,
                    reason,
                    uavs: states.clone(),
                    u_nom,
                    lcbf: l,
                    scbf: s,
                }));
                return Ok(log);
            }
        };

        log.ticks.push(TickRecord {
            time: t,
            phase: Phase::Active,
            uavs: states.clone(),
            ugvs: pads,
            u_nom: u_nom.clone(),
            u_star: out.u_star.clone(),
            lcbf: l.clone(),
            scbf: s.clone(),
            margins: out.margins.iter().copied().collect(),
            active: out.active.clone(),
            landed: (0..n).map(|i| landed.contains(&i)).collect(),
        });
        if tick == last_tick {
            break;
        }

        let advanced = match cfg.fidelity {
            Fidelity::Kinematic => {
                for i in (0..n).filter(|i| !landed.contains(i)) {
                    let u = block(&out.u_star, i);
                    states[i].position = step_kinematic(&states[i].position, &u, cfg.dt_outer);
                    states[i].velocity = u;
                }
                Ok(())
            }
            Fidelity::FullDynamics => advance_full_dynamics(
                cfg,
                &mut states,
                &landed,
                &out.u_star,
                &masses,
                &mut differentiators,
                &mut last_r_d,
                inner_steps,
            ),
        };
        if let Err(reason) = advanced {
            log.outcome = Outcome::Halted(Box::new(HaltRecord {
                tick,
                time: t,
                reason,
                uavs: states.clone(),
                u_nom,
                lcbf: l,
                scbf: s,
            }));
            return Ok(log);
        }
    }
    Ok(log)
}

#[allow(clippy::too_many_arguments)]
fn advance_full_dynamics(
    cfg: &ScenarioConfig,
    states: &mut [UavState],
    landed: &BTreeSet<usize>,
    u_star: &DVector<f64>,
    masses: &[f64],
    differentiators: &mut [SetpointDifferentiator],
    last_r_d: &mut [RotationMatrix],
    inner_steps: usize,
) -> Result<()> {
    let n = states.len();
    // setpoint rates are differenced at the outer rate and held across the inner steps
    let mut rates: Vec<Option<AttitudeSetpoint>> = vec![None; n];
    for _ in 0..inner_steps {
        let v = stack(&states.iter().map(|s| s.velocity).collect::<Vec<_>>());
        let tau_p = velocity_tracking_control(u_star, &v, &cfg.gains.kv, masses);
        for i in (0..n).filter(|i| !landed.contains(i)) {
            let uav = &cfg.uavs[i];
            let command = block(&tau_p, i);
            // hold the last attitude when the thrust direction is undefined
            let r_d = match desired_attitude(&command, cfg.yaw, DEFAULT_MIN_THRUST) {
                Ok(r) => r,
                Err(Error::DegenerateThrust(_)) | Err(Error::GimbalDegenerate) => last_r_d[i],
                Err(e) => return Err(e),
            };
            last_r_d[i] = r_d;
            let held = *rates[i].get_or_insert_with(|| differentiators[i].update(r_d, cfg.yaw, cfg.dt_outer));
            let sp = AttitudeSetpoint { r_d, ..held };
            let tau_q = attitude_control(&states[i], &sp, &uav.params, &cfg.gains.k1[i], &cfg.gains.k2[i]);
            let thrust = body_force_map(&command, &states[i].attitude).z;
            let applied = states[i].attitude * Vec3::new(0.0, 0.0, thrust);
            states[i] = step_full_dynamics(&states[i], &uav.params, &applied, &tau_q, cfg.dt_inner)?;
        }
    }
    Ok(())
}

/// Post-hoc safety summary of a run, over the controlled part of the log.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyMetrics {
    pub ticks: usize,
    /// Landing barrier value when the controller switched on.
    pub initial_lcbf: Vec<f64>,
    /// First time each landing barrier was nonnegative.
    pub lcbf_crossing_time: Vec<Option<f64>>,
    /// Minimum of each landing barrier from its first nonnegative value on.
    pub min_lcbf_after_crossing: Vec<Option<f64>>,
    /// Minimum of each collision barrier, in row order.
    pub min_scbf: Vec<f64>,
    pub min_pairwise_distance: f64,
    pub touchdown_times: Vec<Option<f64>>,
    /// Largest `||u* - u_nom||` over controlled ticks.
    pub max_deviation: f64,
    /// Highest altitude of each vehicle above its target pad.
    pub max_altitude_above_pad: Vec<f64>,
    pub completed: bool,
}

impl SafetyMetrics {
    pub fn min_scbf_overall(&self) -> f64 {
        self.min_scbf.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Smallest post-crossing landing barrier over all vehicles.
    pub fn min_lcbf_overall(&self) -> Option<f64> {
        self.min_lcbf_after_crossing
            .iter()
            .flatten()
            .copied()
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
    }
}

pub fn safety_metrics(log: &SimLog) -> SafetyMetrics {
    let n = log.n_uavs();
    let pairs = n * n.saturating_sub(1) / 2;
    let active: Vec<&TickRecord> = log.ticks.iter().filter(|t| t.phase == Phase::Active).collect();

    let mut crossing = vec![None; n];
    let mut min_after = vec![None::<f64>; n];
    let mut min_scbf = vec![f64::INFINITY; pairs];
    let mut min_dist = f64::INFINITY;
    let mut max_dev = 0.0f64;
    let mut max_alt = vec![f64::NEG_INFINITY; n];

    for rec in &active {
        for i in 0..n {
            let h = rec.lcbf[i];
            if crossing[i].is_none() && h >= 0.0 {
                crossing[i] = Some(rec.time);
            }
            if crossing[i].is_some() {
                min_after[i] = Some(min_after[i].map_or(h, |m: f64| m.min(h)));
            }
            let pad = &rec.ugvs[log.targets[i]];
            max_alt[i] = max_alt[i].max(rec.uavs[i].position.z - pad.position.z);
        }
        for (k, &h) in rec.scbf.iter().enumerate() {
            min_scbf[k] = min_scbf[k].min(h);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                min_dist = min_dist.min((rec.uavs[i].position - rec.uavs[j].position).norm());
            }
        }
        max_dev = max_dev.max((&rec.u_star - &rec.u_nom).norm());
    }

    let mut touchdown_times = vec![None; n];
    for td in &log.touchdowns {
        touchdown_times[td.uav].get_or_insert(td.time);
    }

    SafetyMetrics {
        ticks: active.len(),
        initial_lcbf: active.first().map(|r| r.lcbf.clone()).unwrap_or_default(),
        lcbf_crossing_time: crossing,
        min_lcbf_after_crossing: min_after,
        min_scbf,
        min_pairwise_distance: min_dist,
        touchdown_times,
        max_deviation: max_dev,
        max_altitude_above_pad: max_alt,
        completed: log.completed(),
    }
}
