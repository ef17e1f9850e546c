//! Scenario files.
//!
//! A scenario is a TOML document: top-level timing keys, a `[filter]`
//! table, per-vehicle `[defaults]`, and one `[[uav]]` / `[[ugv]]` entry per
//! vehicle. Any default can be overridden inside a `[[uav]]` entry.
//! Vehicle references (`carrier`, `target`) are 1-based.
//!
//! ```toml
//! name = "demo"
//! t_final = 10.0
//!
//! [filter]
//! rho_l = 10.0
//! rho_s = 10.0
//! sigma = 2.0
//!
//! [defaults]
//! mass = 1.0
//! inertia = [0.01, 0.01, 0.02]
//! radius = 0.25
//! alpha = 2.0
//! beta = 1.0
//! kp = 2.0
//! kv = 2.0
//! k1 = 0.5
//! k2 = 0.5
//!
//! [[uav]]
//! position = [1.0, 0.0, 0.1]
//! target = 1
//!
//! [[ugv]]
//! position = [0.0, 0.0, 0.1]
//! motion = { kind = "sinusoidal", base = [0.2, 0.0, 0.0], amplitude = [0.0, 0.2, 0.0], omega = 0.5 }
//! ```

use std::path::Path;

use nalgebra::Matrix3;
use safeland_core::control::GainSet;
use safeland_core::sim::{InertParams, MotionProgram, UavSpec, UgvSpec, DEFAULT_LANDING_TOLERANCE};
use safeland_core::{Fidelity, FilterConfig, LcbfParams, ScenarioConfig, UavParams, Vec3};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    #[serde(default)]
    fidelity: Option<FidelityName>,
    #[serde(default)]
    t_start: f64,
    #[serde(default)]
    controller_on_time: f64,
    t_final: f64,
    #[serde(default = "default_dt_outer")]
    dt_outer: f64,
    #[serde(default = "default_dt_inner")]
    dt_inner: f64,
    #[serde(default = "default_landing_tolerance")]
    landing_tolerance: f64,
    #[serde(default)]
    yaw: f64,
    filter: FilterTable,
    #[serde(default)]
    inert: Option<InertTable>,
    #[serde(default)]
    defaults: VehicleTable,
    uav: Vec<VehicleTable>,
    ugv: Vec<UgvTable>,
}

fn default_dt_outer() -> f64 {
    0.01
}

fn default_dt_inner() -> f64 {
    0.001
}

fn default_landing_tolerance() -> f64 {
    DEFAULT_LANDING_TOLERANCE
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum FidelityName {
    Kinematic,
    #[serde(alias = "full_dynamics")]
    Full,
}

impl From<FidelityName> for Fidelity {
    fn from(f: FidelityName) -> Self {
        match f {
            FidelityName::Kinematic => Fidelity::Kinematic,
            FidelityName::Full => Fidelity::FullDynamics,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PerRow {
    Scalar(f64),
    List(Vec<f64>),
}

impl PerRow {
    fn expand(&self, n: usize, key: &str) -> std::result::Result<Vec<f64>, String> {
        match self {
            PerRow::Scalar(x) => Ok(vec![*x; n]),
            PerRow::List(v) if v.len() == n => Ok(v.clone()),
            PerRow::List(v) => Err(format!("filter.{key} has {} entries, expected {n}", v.len())),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilterTable {
    rho_l: PerRow,
    rho_s: PerRow,
    sigma: f64,
    #[serde(default)]
    d_tol: Option<f64>,
    #[serde(default)]
    qp_tol: Option<f64>,
    #[serde(default)]
    qp_max_iter: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InertTable {
    a: f64,
    b: f64,
    m: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum Gain {
    Scalar(f64),
    Diagonal([f64; 3]),
}

impl Gain {
    fn diagonal(self) -> Vec3 {
        match self {
            Gain::Scalar(k) => Vec3::repeat(k),
            Gain::Diagonal(d) => Vec3::from(d),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleTable {
    carrier: Option<usize>,
    target: Option<usize>,
    position: Option<[f64; 3]>,
    mass: Option<f64>,
    inertia: Option<[f64; 3]>,
    radius: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    kp: Option<Gain>,
    kv: Option<Gain>,
    k1: Option<Gain>,
    k2: Option<Gain>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UgvTable {
    position: [f64; 3],
    #[serde(default)]
    motion: Option<Motion>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum Motion {
    Static,
    Sinusoidal {
        base: [f64; 3],
        amplitude: [f64; 3],
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Rows of `[start_time, vx, vy, vz]`.
    Piecewise {
        segments: Vec<[f64; 4]>,
    },
}

impl From<Motion> for MotionProgram {
    fn from(m: Motion) -> Self {
        match m {
            Motion::Static => MotionProgram::Static,
            Motion::Sinusoidal {
                base,
                amplitude,
                omega,
                phase,
            } => MotionProgram::Sinusoidal {
                base: base.into(),
                amplitude: amplitude.into(),
                omega,
                phase,
            },
            Motion::Piecewise { segments } => MotionProgram::PiecewiseConstant {
                segments: segments
                    .into_iter()
                    .map(|[t, x, y, z]| (t, Vec3::new(x, y, z)))
                    .collect(),
            },
        }
    }
}

/// Reads and parses a scenario file. Scenario invariants are not checked here.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_scenario(&text, path)
}

/// Parses scenario text; `path` is used only in error messages.
pub fn parse_scenario(text: &str, path: &Path) -> Result<ScenarioConfig> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    build(file).map_err(|message| CliError::Scenario {
        path: path.to_path_buf(),
        message,
    })
}

fn build(file: ScenarioFile) -> std::result::Result<ScenarioConfig, String> {
    let n = file.uav.len();
    let n_ugv = file.ugv.len();
    if file.defaults.carrier.is_some() || file.defaults.target.is_some() || file.defaults.position.is_some() {
        return Err("[defaults] cannot set carrier, target or position".into());
    }
    let d = &file.defaults;

    let mut uavs = Vec::with_capacity(n);
    let (mut kp, mut kv, mut k1, mut k2) = (vec![], vec![], vec![], vec![]);
    for (idx, v) in file.uav.iter().enumerate() {
        let label = idx + 1;
        let pick = |own: Option<f64>, default: Option<f64>, key: &str| {
            own.or(default)
                .ok_or_else(|| format!("uav {label}: `{key}` is neither set nor defaulted"))
        };
        let pick_gain = |own: Option<Gain>, default: Option<Gain>, key: &str| {
            own.or(default)
                .map(Gain::diagonal)
                .ok_or_else(|| format!("uav {label}: `{key}` is neither set nor defaulted"))
        };
        let vehicle_ref = |r: Option<usize>, key: &str| -> std::result::Result<Option<usize>, String> {
            match r {
                None => Ok(None),
                Some(k) if (1..=n_ugv).contains(&k) => Ok(Some(k - 1)),
                Some(k) => Err(format!("uav {label}: {key} {k} is not a ground vehicle (1..={n_ugv})")),
            }
        };

        let inertia = v
            .inertia
            .or(d.inertia)
            .ok_or_else(|| format!("uav {label}: `inertia` is neither set nor defaulted"))?;
        let params = UavParams::new(
            pick(v.mass, d.mass, "mass")?,
            Matrix3::from_diagonal(&Vec3::from(inertia)),
            pick(v.radius, d.radius, "radius")?,
        )
        .map_err(|e| format!("uav {label}: {e}"))?;
        let lcbf = LcbfParams::new(pick(v.alpha, d.alpha, "alpha")?, pick(v.beta, d.beta, "beta")?)
            .map_err(|e| format!("uav {label}: {e}"))?;
        let carrier = vehicle_ref(v.carrier, "carrier")?;
        let target = vehicle_ref(v.target, "target")?.ok_or_else(|| format!("uav {label}: `target` is required"))?;
        let initial_position = match (carrier, v.position) {
            (_, Some(p)) => Vec3::from(p),
            (Some(c), None) => Vec3::from(file.ugv[c].position),
            (None, None) => return Err(format!("uav {label}: needs a `carrier` or a `position`")),
        };
        kp.push(pick_gain(v.kp, d.kp, "kp")?);
        kv.push(pick_gain(v.kv, d.kv, "kv")?);
        k1.push(pick_gain(v.k1, d.k1, "k1")?);
        k2.push(pick_gain(v.k2, d.k2, "k2")?);
        uavs.push(UavSpec {
            params,
            lcbf,
            carrier,
            target,
            initial_position,
        });
    }

    let pairs = n * n.saturating_sub(1) / 2;
    let f = &file.filter;
    let mut filter = FilterConfig::uniform(n, 1.0, 1.0, f.sigma);
    filter.rho_l = f.rho_l.expand(n, "rho_l")?;
    filter.rho_s = f.rho_s.expand(pairs, "rho_s")?;
    if let Some(x) = f.d_tol {
        filter.d_tol = x;
    }
    if let Some(x) = f.qp_tol {
        filter.qp_tol = x;
    }
    if let Some(x) = f.qp_max_iter {
        filter.qp_max_iter = x;
    }

    Ok(ScenarioConfig {
        name: file.name,
        uavs,
        ugvs: file
            .ugv
            .into_iter()
            .map(|g| UgvSpec {
                initial_position: g.position.into(),
                program: g.motion.map_or(MotionProgram::Static, Into::into),
            })
            .collect(),
        gains: GainSet::from_diagonals(&kp, &kv, &k1, &k2),
        filter,
        t_start: file.t_start,
        controller_on_time: file.controller_on_time,
        t_final: file.t_final,
        dt_outer: file.dt_outer,
        dt_inner: file.dt_inner,
        fidelity: file.fidelity.map_or(Fidelity::Kinematic, Into::into),
        landing_tolerance: file.landing_tolerance,
        yaw: file.yaw,
        inert: file.inert.map(|t| InertParams { a: t.a, b: t.b, m: t.m }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "one"
t_final = 5.0

[filter]
rho_l = 10.0
rho_s = 10.0
sigma = 2.0

[defaults]
mass = 1.0
inertia = [0.01, 0.01, 0.02]
radius = 0.25
alpha = 2.0
beta = 1.0
kp = 2.0
kv = 2.0
k1 = 0.5
k2 = 0.5

[[uav]]
position = [1.0, 0.0, 0.1]
target = 1

[[ugv]]
position = [0.0, 0.0, 0.1]
"#;

    fn parse(text: &str) -> Result<ScenarioConfig> {
        parse_scenario(text, Path::new("test.toml"))
    }

    #[test]
    fn minimal_file_parses_with_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.n_uavs(), 1);
        assert_eq!(cfg.dt_outer, 0.01);
        assert_eq!(cfg.dt_inner, 0.001);
        assert_eq!(cfg.fidelity, Fidelity::Kinematic);
        assert_eq!(cfg.ugvs[0].program, MotionProgram::Static);
        assert_eq!(cfg.uavs[0].target, 0);
        cfg.validate().unwrap();
    }

    #[test]
    fn per_vehicle_override_wins() {
        let text = MINIMAL.replace("target = 1\n", "target = 1\nalpha = 4.0\nkv = [1.0, 2.0, 3.0]\n");
        let cfg = parse(&text).unwrap();
        assert_eq!(cfg.uavs[0].lcbf.alpha, 4.0);
        assert_eq!(cfg.gains.kv[(2, 2)], 3.0);
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = MINIMAL.replace("sigma = 2.0", "sigma = = 2.0");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("test.toml"), "{err}");
        assert!(err.contains("line 8"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = MINIMAL.replace("radius = 0.25", "radius = 0.25\nradus = 0.3");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("radus"), "{err}");
    }

    #[test]
    fn bad_vehicle_reference_is_rejected() {
        let text = MINIMAL.replace("target = 1", "target = 4");
        assert!(matches!(parse(&text), Err(CliError::Scenario { .. })));
    }

    #[test]
    fn motion_programs_parse() {
        let text = MINIMAL.replace(
            "position = [0.0, 0.0, 0.1]\n",
            "position = [0.0, 0.0, 0.1]\nmotion = { kind = \"piecewise\", segments = [[0.0, 0.1, 0.0, 0.0], [2.0, 0.0, 0.1, 0.0]] }\n",
        );
        let cfg = parse(&text).unwrap();
        assert_eq!(
            cfg.ugvs[0].program,
            MotionProgram::PiecewiseConstant {
                segments: vec![(0.0, Vec3::new(0.1, 0.0, 0.0)), (2.0, Vec3::new(0.0, 0.1, 0.0))]
            }
        );
    }

    #[test]
    fn per_row_gain_length_is_checked() {
        let text = MINIMAL.replace("rho_l = 10.0", "rho_l = [10.0, 5.0]");
        assert!(matches!(parse(&text), Err(CliError::Scenario { .. })));
    }
}
