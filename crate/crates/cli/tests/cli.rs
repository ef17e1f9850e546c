use std::path::{Path, PathBuf};

use safeland_cli::commands::{cmd_run, cmd_sweep, cmd_validate, execute_run, RunManifest, EXIT_INPUT, EXIT_OK};
use safeland_cli::export::{read_barriers, read_metrics, read_states};
use safeland_cli::scenario_file::{load_scenario, parse_scenario};
use safeland_cli::sweep::{cell_dir, logged_peak_height, SUMMARY_HEADER};
use safeland_cli::validate::{compare_with_oracle, Fault, ValidateOptions};
use safeland_core::barriers::scbf_eval;
use safeland_core::scenarios::{scenario_one, scenario_two};
use safeland_core::sim::{pair_names, ugv_state_at};
use safeland_core::{lcbf_value, Fidelity, Vec3};

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run_into(dir: &Path, scenario: &str) -> (i32, String) {
    let mut out = Vec::new();
    let code = cmd_run(
        &RunManifest {
            scenario: bundled(scenario),
            out_dir: dir.to_path_buf(),
            fidelity: None,
        },
        &mut out,
    );
    (code, String::from_utf8(out).unwrap())
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap_or("")
        .to_string()
}

#[test]
fn bundled_files_match_reference_scenarios() {
    assert_eq!(
        load_scenario(&bundled("scenario1.toml")).unwrap(),
        scenario_one(Fidelity::Kinematic)
    );
    assert_eq!(
        load_scenario(&bundled("scenario2.toml")).unwrap(),
        scenario_two(Fidelity::Kinematic)
    );
}

#[test]
fn scenario_one_run_is_safe_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run_into(dir.path(), "scenario1.toml");
    assert_eq!(code, EXIT_OK, "{report}");
    let m = read_metrics(&dir.path().join("metrics.json")).unwrap();
    assert!(m.completed);
    assert_eq!(m.touchdowns.len(), 3);
    assert!(m.min_scbf_overall.unwrap() >= 0.0);
    assert!(m.breach.is_none());

    assert_eq!(header(&dir.path().join("states.csv")), "time,uav_id,px,py,pz,vx,vy,vz");
    assert_eq!(header(&dir.path().join("barriers.csv")), "time,name,value");
    assert_eq!(
        header(&dir.path().join("inputs.csv")),
        "time,uav_id,unom_x,unom_y,unom_z,ustar_x,ustar_y,ustar_z"
    );
}

#[test]
fn scenario_two_lands_every_vehicle() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run_into(dir.path(), "scenario2.toml");
    assert_eq!(code, EXIT_OK, "{report}");
    let m = read_metrics(&dir.path().join("metrics.json")).unwrap();
    let mut ids: Vec<usize> = m.touchdowns.iter().map(|t| t.uav_id).collect();
    ids.sort_unstable();
    assert_eq!(ids, vec![1, 2, 3]);
}

#[test]
fn barriers_recompute_from_exported_states() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = RunManifest {
        scenario: bundled("scenario2.toml"),
        out_dir: dir.path().to_path_buf(),
        fidelity: None,
    };
    execute_run(&manifest).unwrap();
    let cfg = load_scenario(&manifest.scenario).unwrap();
    let n = cfg.n_uavs();
    let states = read_states(&dir.path().join("states.csv")).unwrap();
    let barriers = read_barriers(&dir.path().join("barriers.csv")).unwrap();
    let names = cfg.barrier_names();
    assert_eq!(states.len() % n, 0);
    assert_eq!(barriers.len(), states.len() / n * names.len());
    let pairs = pair_names(n);

    for (tick, (srows, brows)) in states.chunks(n).zip(barriers.chunks(names.len())).enumerate() {
        let t = srows[0].time;
        let pos: Vec<Vec3> = srows.iter().map(|s| Vec3::new(s.px, s.py, s.pz)).collect();
        for (i, u) in cfg.uavs.iter().enumerate() {
            let pad = ugv_state_at(&cfg.ugvs[u.target], cfg.t_start, t).position;
            let h = lcbf_value(&pos[i], &pad, &u.lcbf);
            assert_eq!(brows[i].name, names[i]);
            assert!(
                (h - brows[i].value).abs() < 1e-9,
                "tick {tick} {}: {h} vs {}",
                names[i],
                brows[i].value
            );
        }
        for (k, name) in pairs.iter().enumerate() {
            let digits: Vec<usize> = name[3..]
                .chars()
                .map(|c| c.to_digit(10).unwrap() as usize - 1)
                .collect();
            let (i, j) = (digits[0], digits[1]);
            let h = scbf_eval(&pos[i], &pos[j], cfg.uavs[i].params.radius, cfg.uavs[j].params.radius).value;
            let row = &brows[n + k];
            assert_eq!(&row.name, name);
            assert!((h - row.value).abs() < 1e-9, "tick {tick} {name}");
        }
    }
}

#[test]
fn separation_violation_names_the_invariant() {
    let text = std::fs::read_to_string(bundled("scenario1.toml"))
        .unwrap()
        .replace("position = [0.0, 0.0, 0.1]", "position = [-1.8, 2.0, 0.1]");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("crowded.toml");
    std::fs::write(&path, &text).unwrap();
    let err = parse_scenario(&text, &path).unwrap().validate().unwrap_err();
    assert!(err.to_string().contains("ground-vehicle-separation"), "{err}");

    let mut out = Vec::new();
    let code = cmd_run(
        &RunManifest {
            scenario: path,
            out_dir: dir.path().join("out"),
            fidelity: None,
        },
        &mut out,
    );
    assert_eq!(code, EXIT_INPUT);
    assert!(String::from_utf8(out).unwrap().contains("ground-vehicle-separation"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn alpha_sweep_runs_every_cell_safely() {
    let dir = tempfile::tempdir().unwrap();
    let mut out = Vec::new();
    let code = cmd_sweep(&bundled("scenario1.toml"), "alpha=1,2,4", dir.path(), &mut out);
    assert_eq!(code, EXIT_OK);
    let mut r = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), SUMMARY_HEADER);
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(&row[6], "safe", "cell {k}: {row:?}");
        assert!(cell_dir(dir.path(), k).join("metrics.json").exists());
    }
}

#[test]
fn empty_grid_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut out = Vec::new();
    assert_eq!(cmd_sweep(&bundled("scenario1.toml"), "", dir.path(), &mut out), EXIT_OK);
    let text = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(text.trim_end(), SUMMARY_HEADER.join(","));
}

#[test]
fn doubling_beta_doubles_the_logged_peak() {
    let mut cfg = load_scenario(&bundled("scenario1.toml")).unwrap();
    cfg.t_final = 3.0;
    let peak = |beta: f64| {
        let mut c = cfg.clone();
        c.uavs.iter_mut().for_each(|u| u.lcbf.beta = beta);
        logged_peak_height(&safeland_core::run_scenario(&c).unwrap()).unwrap()
    };
    let (one, two) = (peak(1.0), peak(2.0));
    assert!((one - 1.0 / std::f64::consts::E).abs() < 1e-9, "{one}");
    assert!((two / one - 2.0).abs() < 1e-9, "{one} {two}");
}

#[test]
fn validate_catches_an_injected_gradient_fault() {
    let opts = ValidateOptions {
        gradient_points: 100,
        qp_instances: 10,
        shaping_samples: 5,
        ..ValidateOptions::default()
    };
    let mut out = Vec::new();
    assert_eq!(cmd_validate(&opts, &mut out), EXIT_OK);
    let faulty = ValidateOptions {
        fault: Some(Fault::FlipLandingGradient),
        ..opts
    };
    let mut out = Vec::new();
    assert_ne!(cmd_validate(&faulty, &mut out), EXIT_OK);
    let table = String::from_utf8(out).unwrap();
    assert!(
        table
            .lines()
            .any(|l| l.starts_with("barrier gradients") && l.contains("FAIL")),
        "{table}"
    );
}

#[test]
fn tight_solver_tolerance_still_matches_the_oracle() {
    let stats = compare_with_oracle(40, 11, Some(1e-12));
    assert_eq!(stats.disagreements, 0, "{stats:?}");
}
