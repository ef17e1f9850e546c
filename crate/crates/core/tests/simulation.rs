use nalgebra::DVector;
use safeland_core::barriers::{lcbf_value, scbf_eval};
use safeland_core::control::{
    attitude_control, desired_attitude, hover_attitude, velocity_tracking_control, SetpointDifferentiator,
    DEFAULT_MIN_THRUST,
};
use safeland_core::geometry::step_full_dynamics;
use safeland_core::scenarios::{reference_params, scenario_one, scenario_two};
use safeland_core::sim::{ugv_state_at, MotionProgram, Phase, UavSpec, UgvSpec};
use safeland_core::{run_scenario, safety_metrics, Fidelity, GainSet, LcbfParams, RotationMatrix, UavState, Vec3};

#[test]
fn runs_are_deterministic() {
    let cfg = scenario_two(Fidelity::Kinematic);
    assert_eq!(run_scenario(&cfg).unwrap(), run_scenario(&cfg).unwrap());
}

#[test]
fn logged_barriers_match_recomputation() {
    for cfg in [scenario_one(Fidelity::Kinematic), scenario_two(Fidelity::Kinematic)] {
        let log = run_scenario(&cfg).unwrap();
        for rec in &log.ticks {
            for (i, uav) in cfg.uavs.iter().enumerate() {
                let pad = rec.ugvs[uav.target].position;
                let h = lcbf_value(&rec.uavs[i].position, &pad, &uav.lcbf);
                assert!((h - rec.lcbf[i]).abs() <= 1e-12);
            }
            let pairs = [(0, 1), (0, 2), (1, 2)];
            for (k, &(i, j)) in pairs.iter().enumerate() {
                let h = scbf_eval(&rec.uavs[i].position, &rec.uavs[j].position, 0.25, 0.25).value;
                assert!((h - rec.scbf[k]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn time_grid_is_uniform_and_complete() {
    let cfg = scenario_two(Fidelity::Kinematic);
    let log = run_scenario(&cfg).unwrap();
    assert_eq!(log.ticks.len(), cfg.tick_count() + 1);
    for (k, rec) in log.ticks.iter().enumerate() {
        assert_eq!(rec.time, cfg.time_at(k));
    }
    let carry = log.ticks.iter().filter(|r| r.phase == Phase::Carry).count();
    assert_eq!(carry, 300);
}

#[test]
fn carried_vehicles_ride_their_carriers() {
    let cfg = scenario_two(Fidelity::Kinematic);
    let log = run_scenario(&cfg).unwrap();
    for rec in log.ticks.iter().filter(|r| r.phase == Phase::Carry) {
        for (i, uav) in cfg.uavs.iter().enumerate() {
            let carrier = &rec.ugvs[uav.carrier.unwrap()];
            assert_eq!(rec.uavs[i].position, carrier.position);
            assert_eq!(rec.uavs[i].velocity, carrier.velocity);
        }
    }
}

#[test]
fn sinusoidal_pad_matches_quadrature() {
    let spec = UgvSpec {
        initial_position: Vec3::new(0.0, 2.0, 0.1),
        program: MotionProgram::Sinusoidal {
            base: Vec3::new(0.2, 0.0, 0.0),
            amplitude: Vec3::new(0.0, 0.2, 0.0),
            omega: 0.5,
            phase: 0.0,
        },
    };
    // composite Simpson on 20000 panels
    let t0 = -3.0;
    for t in [-2.0, 0.0, 4.0, 17.0] {
        let panels = 20_000;
        let h = (t - t0) / panels as f64;
        let mut sum = spec.program.velocity(t0) + spec.program.velocity(t);
        for k in 1..panels {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            sum += spec.program.velocity(t0 + k as f64 * h) * w;
        }
        let quad = spec.initial_position + sum * (h / 3.0);
        assert!((ugv_state_at(&spec, t0, t).position - quad).norm() < 1e-9);
    }
    for k in 0..=10_000 {
        let t = t0 + k as f64 * 0.01;
        assert!(spec.program.velocity(t).norm() <= 0.08f64.sqrt() + 1e-15);
    }
}

#[test]
fn scenario_one_lands_safely() {
    let log = run_scenario(&scenario_one(Fidelity::Kinematic)).unwrap();
    let m = safety_metrics(&log);
    assert!(m.completed);
    assert!(m.touchdown_times.iter().all(Option::is_some));
    assert!(m.min_scbf_overall() >= 0.0);
    assert!(m.min_pairwise_distance >= 0.5 - 1e-3);
    assert!(m.min_lcbf_overall().unwrap() >= -1e-6);
}

#[test]
fn scenario_two_recovers_from_negative_start() {
    let log = run_scenario(&scenario_two(Fidelity::Kinematic)).unwrap();
    let m = safety_metrics(&log);
    assert!(m.initial_lcbf.iter().all(|&h| h < 0.0 && h > -0.1));
    assert!(m.lcbf_crossing_time.iter().all(Option::is_some));
    assert!(m.min_lcbf_overall().unwrap() >= -1e-6);
    assert!(m.touchdown_times.iter().all(Option::is_some));
}

#[test]
fn mirrored_scenario_mirrors_trajectories() {
    let base = scenario_one(Fidelity::Kinematic);
    let flip = RotationMatrix::about_z(std::f64::consts::PI);
    let mut mirrored = base.clone();
    for g in &mut mirrored.ugvs {
        g.initial_position = flip * g.initial_position;
    }
    for u in &mut mirrored.uavs {
        u.initial_position = flip * u.initial_position;
    }
    let a = run_scenario(&base).unwrap();
    let b = run_scenario(&mirrored).unwrap();
    assert_eq!(a.ticks.len(), b.ticks.len());
    for (ra, rb) in a.ticks.iter().zip(&b.ticks) {
        for (sa, sb) in ra.uavs.iter().zip(&rb.uavs) {
            assert!((flip * sa.position - sb.position).norm() < 1e-9);
        }
    }
}

#[test]
fn lone_vehicle_descends_on_axis() {
    let mut cfg = scenario_one(Fidelity::Kinematic);
    cfg.uavs = vec![UavSpec {
        params: reference_params(),
        lcbf: LcbfParams::new(2.0, 1.0).unwrap(),
        carrier: None,
        target: 1,
        initial_position: Vec3::new(0.0, 0.0, 0.8),
    }];
    cfg.gains = GainSet::uniform(1, 2.0, 2.0, 0.5, 0.5);
    cfg.filter = safeland_core::FilterConfig::uniform(1, 10.0, 10.0, 2.0);
    let log = run_scenario(&cfg).unwrap();
    assert_eq!(log.touchdowns.len(), 1);
    for w in log.ticks.windows(2) {
        assert!(w[1].uavs[0].position.z <= w[0].uavs[0].position.z);
        assert_eq!(w[0].uavs[0].position.xy(), Vec3::zeros().xy());
    }
}

#[test]
fn inner_loop_tracks_a_climb_command() {
    let params = reference_params();
    let gains = GainSet::uniform(1, 2.0, 2.0, 0.5, 0.5);
    let command = DVector::from_column_slice(&[0.0, 0.0, 0.5]);
    let mut state = UavState::at_rest(Vec3::new(0.0, 0.0, 1.0), hover_attitude(params.mass, 0.0));
    let mut diff = SetpointDifferentiator::new();
    let dt = 0.001;
    for _ in 0..2000 {
        let v = DVector::from_column_slice(state.velocity.as_slice());
        let tau_p = velocity_tracking_control(&command, &v, &gains.kv, &[params.mass]);
        let tau = Vec3::new(tau_p[0], tau_p[1], tau_p[2]);
        let r_d = desired_attitude(&tau, 0.0, DEFAULT_MIN_THRUST).unwrap();
        let sp = diff.update(r_d, 0.0, dt);
        let tau_q = attitude_control(&state, &sp, &params, &gains.k1[0], &gains.k2[0]);
        let thrust = (state.attitude.transpose() * tau).z;
        let applied = state.attitude * Vec3::new(0.0, 0.0, thrust);
        state = step_full_dynamics(&state, &params, &applied, &tau_q, dt).unwrap();
    }
    assert!((state.velocity.z - 0.5).abs() <= 0.05 * 0.5, "{}", state.velocity);
    assert!(state.velocity.xy().norm() < 1e-9);
}
