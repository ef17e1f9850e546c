//! The two reference scenarios: three aerial vehicles, each starting on one
//! ground vehicle and landing on another.

use nalgebra::Matrix3;

use crate::barriers::LcbfParams;
use crate::control::GainSet;
use crate::filter::FilterConfig;
use crate::geometry::{UavParams, Vec3};
use crate::sim::{Fidelity, InertParams, MotionProgram, ScenarioConfig, UavSpec, UgvSpec, DEFAULT_LANDING_TOLERANCE};

pub const MASS: f64 = 1.0;
pub const INERTIA_DIAG: [f64; 3] = [0.01, 0.01, 0.02];
pub const SAFETY_RADIUS: f64 = 0.25;
pub const ALPHA: f64 = 2.0;
pub const BETA: f64 = 1.0;
pub const GAIN_KP: f64 = 2.0;
pub const GAIN_KV: f64 = 2.0;
pub const GAIN_K1: f64 = 0.5;
pub const GAIN_K2: f64 = 0.5;
pub const RHO_L: f64 = 10.0;
pub const RHO_S: f64 = 10.0;
pub const SIGMA: f64 = 2.0;
pub const HORIZON: f64 = 20.0;
pub const PAD_HEIGHT: f64 = 0.1;

/// Carrier of each aerial vehicle (0-based ground vehicle index).
pub const CARRIERS: [usize; 3] = [2, 0, 1];

pub fn reference_params() -> UavParams {
    UavParams::new(MASS, Matrix3::from_diagonal(&Vec3::from(INERTIA_DIAG)), SAFETY_RADIUS)
        .expect("reference parameters are valid")
}

fn reference_config(name: &str, ugvs: Vec<UgvSpec>, t_start: f64, fidelity: Fidelity) -> ScenarioConfig {
    let lcbf = LcbfParams::new(ALPHA, BETA).expect("reference shaping is valid");
    let uavs = CARRIERS
        .iter()
        .enumerate()
        .map(|(i, &c)| UavSpec {
            params: reference_params(),
            lcbf,
            carrier: Some(c),
            target: i,
            initial_position: ugvs[c].initial_position,
        })
        .collect();
    ScenarioConfig {
        name: name.into(),
        uavs,
        ugvs,
        gains: GainSet::uniform(3, GAIN_KP, GAIN_KV, GAIN_K1, GAIN_K2),
        filter: FilterConfig::uniform(3, RHO_L, RHO_S, SIGMA),
        t_start,
        controller_on_time: 0.0,
        t_final: HORIZON,
        dt_outer: 0.01,
        dt_inner: 0.001,
        fidelity,
        landing_tolerance: DEFAULT_LANDING_TOLERANCE,
        yaw: 0.0,
        inert: Some(InertParams { a: 1.0, b: 3.0, m: 0.5 }),
    }
}

/// Static ground vehicles; the controller is on from the first tick.
pub fn scenario_one(fidelity: Fidelity) -> ScenarioConfig {
    let ugvs = [
        Vec3::new(-2.0, 2.0, PAD_HEIGHT),
        Vec3::new(0.0, 0.0, PAD_HEIGHT),
        Vec3::new(2.0, -2.0, PAD_HEIGHT),
    ]
    .into_iter()
    .map(|p| UgvSpec {
        initial_position: p,
        program: MotionProgram::Static,
    })
    .collect();
    reference_config("scenario1", ugvs, 0.0, fidelity)
}

/// Moving ground vehicles with a 3 s carry phase before the controller starts.
pub fn scenario_two(fidelity: Fidelity) -> ScenarioConfig {
    let wave = |sign: f64| MotionProgram::Sinusoidal {
        base: Vec3::new(0.2, 0.0, 0.0),
        amplitude: Vec3::new(0.0, sign * 0.2, 0.0),
        omega: 0.5,
        phase: 0.0,
    };
    let ugvs = vec![
        UgvSpec {
            initial_position: Vec3::new(0.0, 2.0, PAD_HEIGHT),
            program: wave(1.0),
        },
        UgvSpec {
            initial_position: Vec3::new(0.0, 0.0, PAD_HEIGHT),
            program: wave(-1.0),
        },
        UgvSpec {
            initial_position: Vec3::new(0.0, -2.0, PAD_HEIGHT),
            program: wave(-1.0),
        },
    ];
    reference_config("scenario2", ugvs, -3.0, fidelity)
}
