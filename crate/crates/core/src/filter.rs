//! Constraint assembly and the minimally-deviating velocity filter.
//!
//! For `N` vehicles the stacked input `u ∈ R^{3N}` is constrained by
//! `Q = N(N+1)/2` affine rows `A u >= -b`: one landing row per vehicle
//! followed by one collision row per unordered pair, plus the box
//! `|u_k| <= σ`. Rows are numbered from 1 in the public index helpers to
//! match the usual matrix notation; storage is 0-based.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::barriers::{lcbf_eval, lcbf_value, scbf_eval, LcbfParams, DEFAULT_NEAR_AXIS_TOL};
use crate::error::{Error, Result};
use crate::geometry::{UavState, UgvState, Vec3};
use crate::qp::{self, Halfspaces, KktResiduals};

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    /// Landing barrier gains, one per vehicle.
    pub rho_l: Vec<f64>,
    /// Collision barrier gains, one per pair in row order.
    pub rho_s: Vec<f64>,
    /// Per-component bound on the velocity input, m/s.
    pub sigma: f64,
    /// Near-axis guard for the landing barrier, m.
    pub d_tol: f64,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
}

impl FilterConfig {
    /// Uniform gains for `n` vehicles.
    pub fn uniform(n: usize, rho_l: f64, rho_s: f64, sigma: f64) -> Self {
        Self {
            rho_l: vec![rho_l; n],
            rho_s: vec![rho_s; n * n.saturating_sub(1) / 2],
            sigma,
            d_tol: DEFAULT_NEAR_AXIS_TOL,
            qp_tol: 1e-10,
            qp_max_iter: 1000,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.rho_l.len() != n || self.rho_s.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::DimensionMismatch(format!(
                "{} landing gains and {} collision gains for {n} vehicles",
                self.rho_l.len(),
                self.rho_s.len()
            )));
        }
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !self.rho_l.iter().chain(self.rho_s.iter()).all(|&r| positive(r)) {
            return Err(Error::InvalidParameter("barrier gains must be positive".into()));
        }
        if !positive(self.sigma) || !positive(self.d_tol) || !positive(self.qp_tol) || self.qp_max_iter == 0 {
            return Err(Error::InvalidParameter(
                "sigma, d_tol, qp_tol and qp_max_iter must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// 1-based constraint row of the collision barrier between vehicles `i < j`.
///
/// `ν = N + i + j - 2 + Σ_{k=1}^{i-1} (N - k - 2)`
pub fn pair_row_index(i: usize, j: usize, n: usize) -> Result<usize> {
    if !(1 <= i && i < j && j <= n) {
        return Err(Error::InvalidPair { i, j, n });
    }
    let (i, j, n) = (i as i64, j as i64, n as i64);
    let tail: i64 = (1..i).map(|k| n - k - 2).sum();
    Ok((n + i + j - 2 + tail) as usize)
}

/// Number of constraint rows for `n` vehicles.
pub fn row_count(n: usize) -> usize {
    n * (n + 1) / 2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// Landing row of vehicle `uav` (0-based).
    Landing { uav: usize },
    /// Collision row between vehicles `i < j` (0-based).
    Collision { i: usize, j: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bypass {
    NearAxis,
    Landed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowInfo {
    pub kind: RowKind,
    /// Barrier value at assembly time, recorded even for bypassed rows.
    pub barrier: f64,
    pub bypass: Option<Bypass>,
}

/// Stacked affine constraints `A u >= -b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub rows: Vec<RowInfo>,
}

impl ConstraintSystem {
    pub fn n_uavs(&self) -> usize {
        self.a.ncols() / 3
    }

    /// `A u + b`; nonnegative entries mean the row is satisfied.
    pub fn margins(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.a * u + &self.b
    }
}

/// Builds the landing and collision rows at the current instant.
///
/// `targets[i]` is the landing pad of vehicle `i`. Landing rows of vehicles
/// within `cfg.d_tol` of their pad axis, or already landed, are replaced by
/// the trivially satisfied row `0 >= -1`.
pub fn assemble_constraints(
    states: &[UavState],
    targets: &[UgvState],
    lcbf: &[LcbfParams],
    radii: &[f64],
    cfg: &FilterConfig,
    landed: &BTreeSet<usize>,
) -> Result<ConstraintSystem> {
    let n = states.len();
    if n == 0 || targets.len() != n || lcbf.len() != n || radii.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} vehicles, {} pads, {} landing barriers, {} radii",
            n,
            targets.len(),
            lcbf.len(),
            radii.len()
        )));
    }
    cfg.validate(n)?;

    let q = row_count(n);
    let mut a = DMatrix::zeros(q, 3 * n);
    let mut b = DVector::zeros(q);
    let mut rows = Vec::with_capacity(q);

    for i in 0..n {
        let p = &states[i].position;
        let pad = &targets[i];
        let value = lcbf_value(p, &pad.position, &lcbf[i]);
        let bypass = if landed.contains(&i) {
            Some(Bypass::Landed)
        } else {
            match lcbf_eval(p, &pad.position, &pad.velocity, &lcbf[i], cfg.d_tol) {
                Ok(h) => {
                    a.view_mut((i, 3 * i), (1, 3)).copy_from(&h.grad_p.transpose());
                    b[i] = cfg.rho_l[i] * h.value + h.dt_partial;
                    None
                }
                Err(Error::NearAxis { .. }) => Some(Bypass::NearAxis),
                Err(e) => return Err(e),
            }
        };
        if bypass.is_some() {
            b[i] = 1.0;
        }
        rows.push(RowInfo {
            kind: RowKind::Landing { uav: i },
            barrier: value,
            bypass,
        });
    }

    rows.resize(
        q,
        RowInfo {
            kind: RowKind::Landing { uav: 0 },
            barrier: 0.0,
            bypass: None,
        },
    );
    for i in 0..n {
        for j in (i + 1)..n {
            let row = pair_row_index(i + 1, j + 1, n)? - 1;
            let h = scbf_eval(&states[i].position, &states[j].position, radii[i], radii[j]);
            a.view_mut((row, 3 * i), (1, 3))
                .copy_from(&h.grad_p.fixed_rows::<3>(0).transpose());
            a.view_mut((row, 3 * j), (1, 3))
                .copy_from(&h.grad_p.fixed_rows::<3>(3).transpose());
            b[row] = cfg.rho_s[row - n] * h.value + h.dt_partial;
            rows[row] = RowInfo {
                kind: RowKind::Collision { i, j },
                barrier: h.value,
                bypass: None,
            };
        }
    }

    Ok(ConstraintSystem { a, b, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: DVector<f64>,
    /// Multipliers of the barrier rows.
    pub multipliers: DVector<f64>,
    /// Multipliers of `u_k >= -σ`.
    pub lower: DVector<f64>,
    /// Multipliers of `u_k <= σ`.
    pub upper: DVector<f64>,
    pub iterations: usize,
}

impl QpSolution {
    /// KKT residuals of this solution against the problem it solved.
    pub fn kkt(&self, u_nom: &DVector<f64>, cs: &ConstraintSystem, sigma: f64) -> KktResiduals {
        let (hs, _) = boxed_halfspaces(cs, sigma);
        let mut all = DVector::zeros(hs.len());
        let (q, m) = (cs.b.len(), self.u.len());
        all.rows_mut(0, q).copy_from(&self.multipliers);
        all.rows_mut(q, m).copy_from(&self.lower);
        all.rows_mut(q + m, m).copy_from(&self.upper);
        qp::kkt_residuals(u_nom, &hs, &self.u, &all)
    }
}

fn boxed_halfspaces(cs: &ConstraintSystem, sigma: f64) -> (Halfspaces, usize) {
    let (q, m) = (cs.a.nrows(), cs.a.ncols());
    let mut normals = DMatrix::zeros(q + 2 * m, m);
    let mut offsets = DVector::zeros(q + 2 * m);
    normals.rows_mut(0, q).copy_from(&cs.a);
    offsets.rows_mut(0, q).copy_from(&(-&cs.b));
    for k in 0..m {
        normals[(q + k, k)] = 1.0;
        offsets[q + k] = -sigma;
        normals[(q + m + k, k)] = -1.0;
        offsets[q + m + k] = -sigma;
    }
    (Halfspaces { normals, offsets }, q)
}

/// Closest input to `u_nom` satisfying `A u >= -b` and `|u_k| <= σ`.
pub fn solve_qp(u_nom: &DVector<f64>, cs: &ConstraintSystem, cfg: &FilterConfig) -> Result<QpSolution> {
    if u_nom.len() != cs.a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "nominal input has {} entries, constraint system has {} columns",
            u_nom.len(),
            cs.a.ncols()
        )));
    }
    let (hs, q) = boxed_halfspaces(cs, cfg.sigma);
    let m = u_nom.len();
    // infeasibility rows >= Q refer to the box bounds
    let sol = qp::project(u_nom, &hs, cfg.qp_tol, cfg.qp_max_iter)?;
    Ok(QpSolution {
        multipliers: sol.multipliers.rows(0, q).into_owned(),
        lower: sol.multipliers.rows(q, m).into_owned(),
        upper: sol.multipliers.rows(q + m, m).into_owned(),
        u: sol.u,
        iterations: sol.iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub u_star: DVector<f64>,
    pub cs: ConstraintSystem,
    /// `A u* + b`, one entry per barrier row.
    pub margins: DVector<f64>,
    /// Barrier rows with a positive multiplier.
    pub active: Vec<bool>,
    pub iterations: usize,
}

/// Filters the stacked nominal input through every barrier constraint.
///
/// Landed vehicles are not decision variables: their input is pinned to
/// their pad velocity and their collision rows constrain the others.
pub fn filter(
    u_nom: &DVector<f64>,
    states: &[UavState],
    targets: &[UgvState],
    lcbf: &[LcbfParams],
    radii: &[f64],
    cfg: &FilterConfig,
    landed: &BTreeSet<usize>,
) -> Result<FilterOutput> {
    let cs = assemble_constraints(states, targets, lcbf, radii, cfg, landed)?;
    let n = states.len();
    if u_nom.len() != 3 * n {
        return Err(Error::DimensionMismatch(format!(
            "nominal input has {} entries for {n} vehicles",
            u_nom.len()
        )));
    }

    let free: Vec<usize> = (0..n).filter(|i| !landed.contains(i)).collect();
    let mut u_star = DVector::zeros(3 * n);
    for &i in landed.iter().filter(|&&i| i < n) {
        u_star.fixed_rows_mut::<3>(3 * i).copy_from(&targets[i].velocity);
    }

    let mut multipliers = DVector::zeros(cs.b.len());
    let mut iterations = 0;
    if !free.is_empty() {
        let reduced = ConstraintSystem {
            a: DMatrix::from_fn(cs.a.nrows(), 3 * free.len(), |r, c| cs.a[(r, 3 * free[c / 3] + c % 3)]),
            b: &cs.b + &cs.a * &u_star,
            rows: cs.rows.clone(),
        };
        let u0 = DVector::from_fn(3 * free.len(), |c, _| u_nom[3 * free[c / 3] + c % 3]);
        let sol = solve_qp(&u0, &reduced, cfg)?;
        for (slot, &i) in free.iter().enumerate() {
            u_star
                .fixed_rows_mut::<3>(3 * i)
                .copy_from(&sol.u.fixed_rows::<3>(3 * slot));
        }
        multipliers = sol.multipliers;
        iterations = sol.iterations;
    }

    let margins = cs.margins(&u_star);
    let active = multipliers.iter().map(|&l| l > 0.0).collect();
    Ok(FilterOutput {
        u_star,
        cs,
        margins,
        active,
        iterations,
    })
}

/// Stacks per-vehicle vectors into one `3N` vector.
pub fn stack(parts: &[Vec3]) -> DVector<f64> {
    DVector::from_iterator(3 * parts.len(), parts.iter().flat_map(|v| v.iter().copied()))
}

/// Block `i` of a stacked `3N` vector.
pub fn block(v: &DVector<f64>, i: usize) -> Vec3 {
    v.fixed_rows::<3>(3 * i).into_owned()
}
