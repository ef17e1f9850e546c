//! The filter QP against two independent solvers: exhaustive enumeration of
//! active sets, and Hildreth's dual coordinate ascent.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safeland_core::filter::{row_count, RowInfo, RowKind};
use safeland_core::{solve_qp, ConstraintSystem, FilterConfig};

/// Constraints `G u >= h` including the box.
fn inequality_form(cs: &ConstraintSystem, sigma: f64) -> (DMatrix<f64>, DVector<f64>) {
    let (q, m) = (cs.a.nrows(), cs.a.ncols());
    let mut g = DMatrix::zeros(q + 2 * m, m);
    let mut h = DVector::zeros(q + 2 * m);
    for r in 0..q {
        g.row_mut(r).copy_from(&cs.a.row(r));
        h[r] = -cs.b[r];
    }
    for k in 0..m {
        g[(q + k, k)] = 1.0;
        h[q + k] = -sigma;
        g[(q + m + k, k)] = -1.0;
        h[q + m + k] = -sigma;
    }
    (g, h)
}

fn enumerate(u0: &DVector<f64>, g: &DMatrix<f64>, h: &DVector<f64>) -> DVector<f64> {
    let rows = g.nrows();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << rows) {
        let active: Vec<usize> = (0..rows).filter(|r| mask & (1 << r) != 0).collect();
        if active.len() > g.ncols() {
            continue;
        }
        let u = if active.is_empty() {
            u0.clone()
        } else {
            let ga = DMatrix::from_fn(active.len(), g.ncols(), |r, c| g[(active[r], c)]);
            let ha = DVector::from_fn(active.len(), |r, _| h[active[r]]);
            let gram = &ga * ga.transpose();
            let Some(chol) = gram.clone().cholesky() else { continue };
            if gram.determinant().abs() < 1e-12 {
                continue;
            }
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
    best.expect("instance is feasible").1
}

fn hildreth(u0: &DVector<f64>, g: &DMatrix<f64>, h: &DVector<f64>) -> DVector<f64> {
    let mut lambda: DVector<f64> = DVector::zeros(g.nrows());
    let mut u = u0.clone();
    let norms: Vec<f64> = (0..g.nrows()).map(|r| g.row(r).norm_squared()).collect();
    for _ in 0..200_000 {
        let mut change = 0.0f64;
        for r in 0..g.nrows() {
            if norms[r] == 0.0 {
                continue;
            }
            let slack = h[r] - g.row(r).dot(&u.transpose());
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

/// Random system with barrier-like sparsity, feasible by construction.
fn random_instance(rng: &mut ChaCha8Rng, n: usize, sigma: f64) -> (DVector<f64>, ConstraintSystem) {
    let q = row_count(n);
    let m = 3 * n;
    let u_f = DVector::from_fn(m, |_, _| rng.random_range(-0.8 * sigma..0.8 * sigma));
    let mut a = DMatrix::zeros(q, m);
    let mut rows = Vec::new();
    for i in 0..n {
        for c in 0..3 {
            a[(i, 3 * i + c)] = rng.random_range(-2.0..2.0);
        }
        rows.push(RowInfo {
            kind: RowKind::Landing { uav: i },
            barrier: 0.0,
            bypass: None,
        });
    }
    let mut r = n;
    for i in 0..n {
        for j in (i + 1)..n {
            for c in 0..3 {
                let g = rng.random_range(-3.0..3.0);
                a[(r, 3 * i + c)] = g;
                a[(r, 3 * j + c)] = -g;
            }
            rows.push(RowInfo {
                kind: RowKind::Collision { i, j },
                barrier: 0.0,
                bypass: None,
            });
            r += 1;
        }
    }
    let noise = DVector::from_fn(q, |_, _| rng.random_range(0.0..0.5));
    let b = -(&a * &u_f) + noise;
    let u_nom = DVector::from_fn(m, |_, _| rng.random_range(-3.0 * sigma..3.0 * sigma));
    (u_nom, ConstraintSystem { a, b, rows })
}

#[test]
fn small_instances_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..60 {
        let n = 1 + trial % 2;
        let cfg = FilterConfig::uniform(n, 10.0, 10.0, 2.0);
        let (u_nom, cs) = random_instance(&mut rng, n, cfg.sigma);
        let sol = solve_qp(&u_nom, &cs, &cfg).unwrap();
        let (g, h) = inequality_form(&cs, cfg.sigma);
        let oracle = enumerate(&u_nom, &g, &h);
        assert!(
            (&sol.u - &oracle).norm() < 1e-6,
            "trial {trial}: {} vs {}",
            sol.u,
            oracle
        );
        assert!(sol.kkt(&u_nom, &cs, cfg.sigma).max() < 1e-8);
    }
}

#[test]
fn three_vehicle_instances_match_dual_ascent() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for trial in 0..60 {
        let cfg = FilterConfig::uniform(3, 10.0, 10.0, 2.0);
        let (u_nom, cs) = random_instance(&mut rng, 3, cfg.sigma);
        let sol = solve_qp(&u_nom, &cs, &cfg).unwrap();
        let (g, h) = inequality_form(&cs, cfg.sigma);
        let oracle = hildreth(&u_nom, &g, &h);
        assert!((&sol.u - &oracle).norm() < 1e-6, "trial {trial}");
        assert!(sol.kkt(&u_nom, &cs, cfg.sigma).max() < 1e-8);
    }
}

#[test]
fn tighter_tolerance_keeps_agreement() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..30 {
        let mut cfg = FilterConfig::uniform(2, 10.0, 10.0, 2.0);
        cfg.qp_tol = 1e-12;
        let (u_nom, cs) = random_instance(&mut rng, 2, cfg.sigma);
        let sol = solve_qp(&u_nom, &cs, &cfg).unwrap();
        let (g, h) = inequality_form(&cs, cfg.sigma);
        assert!((&sol.u - &hildreth(&u_nom, &g, &h)).norm() < 1e-6);
    }
}
