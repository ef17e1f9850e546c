//! Reference solvers for `min ½||u - u0||²  s.t.  G u >= h`, independent of
//! the active-set solver in the core crate.

use nalgebra::{DMatrix, DVector};

/// Tries every subset of rows as the active set and keeps the feasible KKT
/// point closest to `u0`. Exponential in the row count; meant for at most
/// about 16 rows. Returns `None` when no subset gives a feasible point.
pub fn enumerate_active_sets(u0: &DVector<f64>, g: &DMatrix<f64>, h: &DVector<f64>) -> Option<DVector<f64>> {
    let rows = g.nrows();
    assert!(rows < 25, "enumeration over {rows} rows is too large");
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1u32 << rows) {
        let active: Vec<usize> = (0..rows).filter(|r| mask & (1 << r) != 0).collect();
        if active.len() > g.ncols() {
            continue;
        }
        let u = if active.is_empty() {
            u0.clone()
        } else {
            let ga = DMatrix::from_fn(active.len(), g.ncols(), |r, c| g[(active[r], c)]);
            let gram = &ga * ga.transpose();
            if gram.determinant().abs() < 1e-12 {
                continue;
            }
            let Some(chol) = gram.cholesky() else { continue };
            let ha = DVector::from_fn(active.len(), |r, _| h[active[r]]);
            let lambda = chol.solve(&(ha - &ga * u0));
            if lambda.iter().any(|&l| l < -1e-12) {
                continue;
            }
            u0 + ga.transpose() * lambda
        };
        if (g * &u - h).iter().all(|&s| s >= -1e-10) {
            let cost = (&u - u0).norm();
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                best = Some((cost, u));
            }
        }
    }
    best.map(|(_, u)| u)
}

/// Hildreth's dual coordinate ascent, run until the multipliers stop moving.
pub fn hildreth(u0: &DVector<f64>, g: &DMatrix<f64>, h: &DVector<f64>, max_sweeps: usize) -> DVector<f64> {
    let mut lambda: DVector<f64> = DVector::zeros(g.nrows());
    let mut u = u0.clone();
    let norms: Vec<f64> = (0..g.nrows()).map(|r| g.row(r).norm_squared()).collect();
    for _ in 0..max_sweeps {
        let mut change = 0.0f64;
        for r in 0..g.nrows() {
            if norms[r] == 0.0 {
                continue;
            }
            let slack = h[r] - (g.row(r) * &u)[0];
            let next = (lambda[r] + slack / norms[r]).max(0.0);
            let delta = next - lambda[r];
            if delta != 0.0 {
                u += g.row(r).transpose() * delta;
                lambda[r] = next;
                change = change.max(delta.abs());
            }
        }
        if change < 1e-15 {
            break;
        }
    }
    u
}
