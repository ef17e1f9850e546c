use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safeland_core::barriers::{lcbf_eval, lcbf_value, scbf_eval, LcbfParams, DEFAULT_NEAR_AXIS_TOL};
use safeland_core::Vec3;

const STEP: f64 = 1e-6;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-3)
}

fn random_vec(rng: &mut impl Rng, half: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-half..half),
        rng.random_range(-half..half),
        rng.random_range(-half..half),
    )
}

#[test]
fn landing_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let params = LcbfParams::new(rng.random_range(0.5..4.0), rng.random_range(0.2..3.0)).unwrap();
        let p_d = random_vec(&mut rng, 3.0);
        let mut p = p_d + random_vec(&mut rng, 2.0);
        if (p - p_d).xy().norm() < 0.05 {
            p.x += 0.1;
        }
        let v_d = random_vec(&mut rng, 0.5);
        let eval = lcbf_eval(&p, &p_d, &v_d, &params, DEFAULT_NEAR_AXIS_TOL).unwrap();
        for k in 0..3 {
            let mut hi = p;
            let mut lo = p;
            hi[k] += STEP;
            lo[k] -= STEP;
            let fd = (lcbf_value(&hi, &p_d, &params) - lcbf_value(&lo, &p_d, &params)) / (2.0 * STEP);
            assert!(
                rel(eval.grad_p[k], fd) < 1e-5,
                "component {k}: {} vs {fd}",
                eval.grad_p[k]
            );
        }
        let h = |tau: f64| lcbf_value(&p, &(p_d + v_d * tau), &params);
        let fd_t = (h(STEP) - h(-STEP)) / (2.0 * STEP);
        assert!(rel(eval.dt_partial, fd_t) < 1e-5, "{} vs {fd_t}", eval.dt_partial);
    }
}

#[test]
fn collision_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..300 {
        let p_i = random_vec(&mut rng, 3.0);
        let p_j = random_vec(&mut rng, 3.0);
        let (s_i, s_j) = (rng.random_range(0.1..0.5), rng.random_range(0.1..0.5));
        let eval = scbf_eval(&p_i, &p_j, s_i, s_j);
        assert_eq!(eval.dt_partial, 0.0);
        for k in 0..6 {
            let shift = |sign: f64| {
                let (mut a, mut b) = (p_i, p_j);
                if k < 3 {
                    a[k] += sign * STEP;
                } else {
                    b[k - 3] += sign * STEP;
                }
                scbf_eval(&a, &b, s_i, s_j).value
            };
            let fd = (shift(1.0) - shift(-1.0)) / (2.0 * STEP);
            assert!(
                rel(eval.grad_p[k], fd) < 1e-5,
                "component {k}: {} vs {fd}",
                eval.grad_p[k]
            );
        }
    }
}
