//! Built-in verification suites behind `safeland validate`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safeland_core::barriers::{lcbf_eval, lcbf_value, scbf_eval, shaping_from_peak, LcbfParams};
use safeland_core::control::{desired_attitude, DEFAULT_MIN_THRUST};
use safeland_core::filter::row_count;
use safeland_core::geometry::{hat, vee};
use safeland_core::{
    assemble_constraints, pair_row_index, solve_qp, ConstraintSystem, Error, FilterConfig, RotationMatrix, UavState,
    UgvState, Vec3,
};

use crate::oracle::{enumerate_active_sets, hildreth};

/// Finite-difference step for gradient checks.
pub const FD_STEP: f64 = 1e-6;
pub const GRADIENT_REL_TOL: f64 = 1e-5;
pub const ORACLE_TOL: f64 = 1e-6;
pub const KKT_TOL: f64 = 1e-8;
pub const SHAPING_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Negates the analytic landing-barrier gradient before it is compared.
    FlipLandingGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateOptions {
    pub seed: u64,
    pub gradient_points: usize,
    pub qp_instances: usize,
    pub shaping_samples: usize,
    /// Overrides the solver tolerance used in the oracle comparison.
    pub qp_tol: Option<f64>,
    pub fault: Option<Fault>,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            seed: 7,
            gradient_points: 1000,
            qp_instances: 100,
            shaping_samples: 50,
            qp_tol: None,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

/// `|a - b| / max(|b|, 1)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn random_vec(rng: &mut ChaCha8Rng, half: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-half..half),
        rng.random_range(-half..half),
        rng.random_range(-half..half),
    )
}

/// Analytic landing and collision gradients, and the landing time-partial,
/// against central differences at random valid points.
pub fn gradient_check(points: usize, seed: u64, fault: Option<Fault>) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let central = |f: &dyn Fn(f64) -> f64| (f(FD_STEP) - f(-FD_STEP)) / (2.0 * FD_STEP);

    for _ in 0..points {
        let params = LcbfParams::new(rng.random_range(0.5..5.0), rng.random_range(0.2..3.0)).expect("valid shaping");
        let p_d = random_vec(&mut rng, 3.0);
        let d = rng.random_range(0.01..4.0);
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let p = p_d + Vec3::new(d * phi.cos(), d * phi.sin(), rng.random_range(-2.0..3.0));
        let v_d = random_vec(&mut rng, 1.0);
        let mut eval = lcbf_eval(&p, &p_d, &v_d, &params, 1e-3).expect("point is off axis");
        if fault == Some(Fault::FlipLandingGradient) {
            eval.grad_p = -eval.grad_p;
        }
        for k in 0..3 {
            let fd = central(&|s| {
                let mut q = p;
                q[k] += s;
                lcbf_value(&q, &p_d, &params)
            });
            worst = worst.max(relative_error(eval.grad_p[k], fd));
        }
        let fd_t = central(&|s| lcbf_value(&p, &(p_d + v_d * s), &params));
        worst = worst.max(relative_error(eval.dt_partial, fd_t));

        let (p_i, p_j) = (random_vec(&mut rng, 3.0), random_vec(&mut rng, 3.0));
        let (s_i, s_j) = (rng.random_range(0.1..0.5), rng.random_range(0.1..0.5));
        let coll = scbf_eval(&p_i, &p_j, s_i, s_j);
        for k in 0..6 {
            let fd = central(&|s| {
                let (mut a, mut b) = (p_i, p_j);
                if k < 3 {
                    a[k] += s;
                } else {
                    b[k - 3] += s;
                }
                scbf_eval(&a, &b, s_i, s_j).value
            });
            worst = worst.max(relative_error(coll.grad_p[k], fd));
        }
    }
    CheckResult::new(
        "barrier gradients vs finite differences",
        worst < GRADIENT_REL_TOL,
        format!("{points} points, worst relative error {worst:.2e} (limit {GRADIENT_REL_TOL:.0e})"),
    )
}

/// Constraints `G u >= h` of the filter QP, box included.
pub fn inequality_form(cs: &ConstraintSystem, sigma: f64) -> (DMatrix<f64>, DVector<f64>) {
    let (q, m) = (cs.a.nrows(), cs.a.ncols());
    let mut g = DMatrix::zeros(q + 2 * m, m);
    let mut h = DVector::zeros(q + 2 * m);
    g.rows_mut(0, q).copy_from(&cs.a);
    h.rows_mut(0, q).copy_from(&(-&cs.b));
    for k in 0..m {
        g[(q + k, k)] = 1.0;
        h[q + k] = -sigma;
        g[(q + m + k, k)] = -1.0;
        h[q + m + k] = -sigma;
    }
    (g, h)
}

/// A filter instance assembled from random vehicle and pad states. Each
/// vehicle starts at most slightly outside its landing safe set.
pub fn random_filter_instance(rng: &mut ChaCha8Rng, n: usize) -> (DVector<f64>, ConstraintSystem, FilterConfig) {
    let cfg = FilterConfig::uniform(n, rng.random_range(1.0..20.0), rng.random_range(1.0..20.0), 2.0);
    let lcbf = vec![LcbfParams::new(2.0, 1.0).expect("valid shaping"); n];
    loop {
        let targets: Vec<UgvState> = (0..n)
            .map(|_| UgvState {
                position: random_vec(rng, 2.0),
                velocity: random_vec(rng, 0.3),
            })
            .collect();
        let states: Vec<UavState> = targets
            .iter()
            .map(|pad| {
                let d = rng.random_range(0.0..3.0);
                let phi = rng.random_range(0.0..std::f64::consts::TAU);
                let ez = lcbf[0].boundary_height(d) + rng.random_range(-0.05..2.0);
                let p = pad.position + Vec3::new(d * phi.cos(), d * phi.sin(), ez);
                UavState::at_rest(p, RotationMatrix::identity())
            })
            .collect();
        let separated = (0..n).all(|i| ((i + 1)..n).all(|j| (states[i].position - states[j].position).norm() > 0.55));
        if !separated {
            continue;
        }
        let cs = assemble_constraints(&states, &targets, &lcbf, &vec![0.25; n], &cfg, &BTreeSet::new())
            .expect("instance is well formed");
        let u_nom = DVector::from_fn(3 * n, |_, _| rng.random_range(-5.0..5.0));
        return (u_nom, cs, cfg);
    }
}

/// A synthetic instance with barrier sparsity, feasible by construction.
pub fn synthetic_filter_instance(rng: &mut ChaCha8Rng, n: usize) -> (DVector<f64>, ConstraintSystem, FilterConfig) {
    let cfg = FilterConfig::uniform(n, 10.0, 10.0, 2.0);
    let q = row_count(n);
    let m = 3 * n;
    let u_f = DVector::from_fn(m, |_, _| rng.random_range(-1.6..1.6));
    let mut a = DMatrix::zeros(q, m);
    for i in 0..n {
        for c in 0..3 {
            a[(i, 3 * i + c)] = rng.random_range(-2.0..2.0);
        }
        for j in (i + 1)..n {
            let row = pair_row_index(i + 1, j + 1, n).expect("valid pair") - 1;
            for c in 0..3 {
                let g = rng.random_range(-3.0..3.0);
                a[(row, 3 * i + c)] = g;
                a[(row, 3 * j + c)] = -g;
            }
        }
    }
    let noise = DVector::from_fn(q, |_, _| rng.random_range(0.0..0.5));
    let b = -(&a * &u_f) + noise;
    let rows = row_layout(n);
    let u_nom = DVector::from_fn(m, |_, _| rng.random_range(-6.0..6.0));
    (u_nom, ConstraintSystem { a, b, rows }, cfg)
}

fn row_layout(n: usize) -> Vec<safeland_core::filter::RowInfo> {
    use safeland_core::filter::{RowInfo, RowKind};
    let mut rows: Vec<RowInfo> = (0..n)
        .map(|uav| RowInfo {
            kind: RowKind::Landing { uav },
            barrier: 0.0,
            bypass: None,
        })
        .collect();
    for i in 0..n {
        for j in (i + 1)..n {
            rows.push(RowInfo {
                kind: RowKind::Collision { i, j },
                barrier: 0.0,
                bypass: None,
            });
        }
    }
    rows
}

/// Outcome of one oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleStats {
    pub instances: usize,
    pub infeasible_agreed: usize,
    pub worst_distance: f64,
    pub worst_kkt: f64,
    pub disagreements: usize,
}

/// `solve_qp` against enumeration (`N <= 2`) or dual ascent (`N = 3`).
pub fn compare_with_oracle(instances: usize, seed: u64, qp_tol: Option<f64>) -> OracleStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = OracleStats {
        instances,
        infeasible_agreed: 0,
        worst_distance: 0.0,
        worst_kkt: 0.0,
        disagreements: 0,
    };
    for k in 0..instances {
        let n = 1 + k % 3;
        let (u_nom, cs, mut cfg) = if k % 2 == 0 {
            random_filter_instance(&mut rng, n)
        } else {
            synthetic_filter_instance(&mut rng, n)
        };
        if let Some(tol) = qp_tol {
            cfg.qp_tol = tol;
        }
        let (g, h) = inequality_form(&cs, cfg.sigma);
        let oracle = if n <= 2 {
            enumerate_active_sets(&u_nom, &g, &h)
        } else {
            let u = hildreth(&u_nom, &g, &h, 200_000);
            (&g * &u - &h).iter().all(|&s| s >= -1e-8).then_some(u)
        };
        match (solve_qp(&u_nom, &cs, &cfg), oracle) {
            (Ok(sol), Some(u)) => {
                let dist = (&sol.u - &u).norm();
                let kkt = sol.kkt(&u_nom, &cs, cfg.sigma).max();
                stats.worst_distance = stats.worst_distance.max(dist);
                stats.worst_kkt = stats.worst_kkt.max(kkt);
                if dist >= ORACLE_TOL || kkt >= KKT_TOL {
                    stats.disagreements += 1;
                }
            }
            (Err(Error::Infeasible { .. }), None) => stats.infeasible_agreed += 1,
            _ => stats.disagreements += 1,
        }
    }
    stats
}

pub fn qp_oracle_check(instances: usize, seed: u64, qp_tol: Option<f64>) -> CheckResult {
    let s = compare_with_oracle(instances, seed, qp_tol);
    CheckResult::new(
        "QP solution vs independent oracle",
        s.disagreements == 0,
        format!(
            "{} instances ({} agreed infeasible), worst |Δu| {:.2e}, worst KKT residual {:.2e}, {} disagreements",
            s.instances, s.infeasible_agreed, s.worst_distance, s.worst_kkt, s.disagreements
        ),
    )
}

/// Every pair maps to a distinct row in `N+1..=N(N+1)/2` and every row is hit.
pub fn index_bijection_check(sizes: std::ops::RangeInclusive<usize>) -> CheckResult {
    let mut failures = Vec::new();
    for n in sizes.clone() {
        let mut seen = BTreeSet::new();
        for i in 1..=n {
            for j in (i + 1)..=n {
                match pair_row_index(i, j, n) {
                    Ok(nu) => {
                        seen.insert(nu);
                    }
                    Err(_) => failures.push(n),
                }
            }
        }
        let expected: BTreeSet<usize> = ((n + 1)..=row_count(n)).collect();
        if seen != expected {
            failures.push(n);
        }
    }
    CheckResult::new(
        "pair row index is a bijection",
        failures.is_empty(),
        format!("N = {}..={}, failing sizes {:?}", sizes.start(), sizes.end(), failures),
    )
}

/// Maximizer of a unimodal function on `[lo, hi]` by golden-section search.
pub fn golden_section_argmax(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        }
    }
    0.5 * (lo + hi)
}

/// Peak placement: shaping from a requested peak, then a numeric argmax.
pub fn shaping_check(samples: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_d, mut worst_h) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let d_star = rng.random_range(0.05..5.0);
        let ez_star = rng.random_range(0.05..5.0);
        let params = shaping_from_peak(d_star, ez_star).expect("valid peak");
        let arg = golden_section_argmax(|d| params.boundary_height(d), 0.0, 20.0 * d_star, 1e-12);
        worst_d = worst_d.max((arg - d_star).abs());
        worst_h = worst_h.max((params.boundary_height(arg) - ez_star).abs());
    }
    CheckResult::new(
        "shaping recovers the requested peak",
        worst_d < SHAPING_TOL && worst_h < SHAPING_TOL,
        format!("{samples} samples, worst |Δd*| {worst_d:.2e}, worst |Δe_z*| {worst_h:.2e}"),
    )
}

/// hat/vee inverses, rotation orthonormality and thrust alignment.
pub fn rotation_check(samples: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let v = random_vec(&mut rng, 5.0);
        let back = vee(&hat(&v)).expect("hat is antisymmetric");
        worst = worst.max((back - v).norm());

        let axis = random_vec(&mut rng, 1.0);
        let angle = rng.random_range(-3.0..3.0);
        let r = RotationMatrix::from_axis_angle(&axis, angle);
        let undo = RotationMatrix::from_axis_angle(&axis, -angle);
        worst = worst.max((r.matrix() * undo.matrix() - Matrix3::identity()).norm());
        worst = worst.max(r.orthonormality_error());

        let thrust = random_vec(&mut rng, 10.0);
        if let Ok(r_d) = desired_attitude(&thrust, rng.random_range(-3.0..3.0), DEFAULT_MIN_THRUST) {
            worst = worst.max((r_d.matrix().column(2) - thrust.normalize()).norm());
        }
    }
    CheckResult::new(
        "rotation round trips",
        worst < 1e-12,
        format!("{samples} samples, worst residual {worst:.2e}"),
    )
}

/// Filter output feasibility on random assembled instances.
pub fn filter_feasibility_check(instances: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut solved = 0;
    for k in 0..instances {
        let (u_nom, cs, cfg) = random_filter_instance(&mut rng, 1 + k % 3);
        if let Ok(sol) = solve_qp(&u_nom, &cs, &cfg) {
            solved += 1;
            let margin = cs.margins(&sol.u).iter().fold(0.0f64, |w, &m| w.max(-m));
            let boxed = sol.u.iter().fold(0.0f64, |w, &x| w.max(x.abs() - cfg.sigma));
            worst = worst.max(margin).max(boxed);
        }
    }
    CheckResult::new(
        "filter output satisfies every row",
        worst < 1e-9,
        format!("{solved}/{instances} feasible instances, worst violation {worst:.2e}"),
    )
}

pub fn run_all(opts: &ValidateOptions) -> Vec<CheckResult> {
    vec![
        gradient_check(opts.gradient_points, opts.seed, opts.fault),
        qp_oracle_check(opts.qp_instances, opts.seed + 1, opts.qp_tol),
        index_bijection_check(2..=10),
        shaping_check(opts.shaping_samples, opts.seed + 2),
        rotation_check(200, opts.seed + 3),
        filter_feasibility_check(200, opts.seed + 4),
    ]
}

pub fn render_table(results: &[CheckResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  result  detail", "check");
    for r in results {
        let verdict = if r.passed { "pass" } else { "FAIL" };
        let _ = writeln!(out, "{:<width$}  {verdict:<6}  {}", r.name, r.detail);
    }
    out
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}
