//! Euclidean projection onto a polyhedron.
//!
//! Solves
//!
//! ```text
//! minimize   ½ ||u - u0||²
//! subject to n_kᵀ u >= c_k,   k = 1..m
//! ```
//!
//! with a dual active-set method in the style of Goldfarb and Idnani. The
//! Hessian is the identity, so the unconstrained optimum `u0` is the
//! starting point and each iteration adds the most violated constraint,
//! dropping active ones whose multiplier would turn negative.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const NULL_SPACE_TOL: f64 = 1e-9;

/// Constraint rows `normals * u >= offsets`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspaces {
    pub normals: DMatrix<f64>,
    pub offsets: DVector<f64>,
}

impl Halfspaces {
    pub fn new(normals: DMatrix<f64>, offsets: DVector<f64>) -> Result<Self> {
        if normals.nrows() != offsets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} constraint rows but {} offsets",
                normals.nrows(),
                offsets.len()
            )));
        }
        Ok(Self { normals, offsets })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.normals.ncols()
    }

    /// `n_kᵀ u - c_k` for every row.
    pub fn slacks(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.normals * u - &self.offsets
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub u: DVector<f64>,
    /// One multiplier per constraint row, zero for inactive rows.
    pub multipliers: DVector<f64>,
    /// Indices of the rows in the final active set.
    pub active: Vec<usize>,
    pub iterations: usize,
}

/// First-order optimality residuals of a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `||u - u0 - Nᵀλ||_∞`
    pub stationarity: f64,
    /// Largest constraint violation, zero if feasible.
    pub primal: f64,
    /// Most negative multiplier, reported as a positive number.
    pub dual: f64,
    /// `max_k |λ_k (n_kᵀ u - c_k)|`
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

pub fn kkt_residuals(u0: &DVector<f64>, hs: &Halfspaces, u: &DVector<f64>, multipliers: &DVector<f64>) -> KktResiduals {
    let stationarity = (u - u0 - hs.normals.transpose() * multipliers).amax();
    let slacks = hs.slacks(u);
    let primal = slacks.iter().fold(0.0f64, |acc, &s| acc.max(-s));
    let dual = multipliers.iter().fold(0.0f64, |acc, &l| acc.max(-l));
    let complementarity = slacks
        .iter()
        .zip(multipliers.iter())
        .fold(0.0f64, |acc, (s, l)| acc.max((s * l).abs()));
    KktResiduals {
        stationarity,
        primal,
        dual,
        complementarity,
    }
}

struct ActiveSet {
    rows: Vec<usize>,
    lambda: Vec<f64>,
}

impl ActiveSet {
    fn basis(&self, hs: &Halfspaces) -> DMatrix<f64> {
        let n = hs.dim();
        DMatrix::from_fn(n, self.rows.len(), |r, c| hs.normals[(self.rows[c], r)])
    }

    /// Splits `v` into a part in the span of the active normals and a
    /// residual orthogonal to it: `v = N r + z`. Returns `(r, z)`.
    fn decompose(&self, hs: &Halfspaces, v: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        if self.rows.is_empty() {
            return (DVector::zeros(0), v.clone());
        }
        let basis = self.basis(hs);
        let gram = basis.transpose() * &basis;
        let rhs = basis.transpose() * v;
        let r = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => gram
                .pseudo_inverse(1e-14)
                .map(|p| p * &rhs)
                .unwrap_or_else(|_| DVector::zeros(self.rows.len())),
        };
        let z = v - &basis * &r;
        (r, z)
    }

    fn remove(&mut self, idx: usize) {
        self.rows.remove(idx);
        self.lambda.remove(idx);
    }
}

/// Projects `u0` onto `hs`.
///
/// `tol` is the feasibility tolerance; `max_iter` bounds the number of
/// active-set changes.
pub fn project(u0: &DVector<f64>, hs: &Halfspaces, tol: f64, max_iter: usize) -> Result<Projection> {
    let n = hs.dim();
    if u0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "nominal input has {} entries, constraints have {} columns",
            u0.len(),
            n
        )));
    }
    if u0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("nominal input"));
    }
    if hs.normals.iter().chain(hs.offsets.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("constraint system"));
    }

    let row_norms: Vec<f64> = (0..hs.len()).map(|k| hs.normals.row(k).norm()).collect();
    let mut u = u0.clone();
    let mut set = ActiveSet {
        rows: Vec::new(),
        lambda: Vec::new(),
    };
    let mut iterations = 0usize;

    loop {
        // most violated row, measured in distance to its hyperplane
        let slacks = hs.slacks(&u);
        let mut worst: Option<(usize, f64)> = None;
        for k in 0..hs.len() {
            if set.rows.contains(&k) {
                continue;
            }
            let scale = row_norms[k].max(1.0);
            let s = slacks[k] / scale;
            if s < -tol && worst.is_none_or(|(_, w)| s < w) {
                worst = Some((k, s));
            }
        }
        let Some((p, _)) = worst else { break };

        let n_p = hs.normals.row(p).transpose();
        let mut lambda_p = 0.0;
        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(infeasible(hs, &u, iterations));
            }
            let (r, z) = set.decompose(hs, &n_p);

            // largest dual step keeping active multipliers nonnegative
            let mut partial: Option<(usize, f64)> = None;
            for (j, (&rj, &lj)) in r.iter().zip(set.lambda.iter()).enumerate() {
                if rj > 1e-14 {
                    let t = lj / rj;
                    if partial.is_none_or(|(_, best)| t < best) {
                        partial = Some((j, t));
                    }
                }
            }

            let zn = z.dot(&n_p);
            let slack_p = n_p.dot(&u) - hs.offsets[p];
            // a residual at rounding level means n_p lies in the span of the active normals
            let full = if z.norm() > NULL_SPACE_TOL * row_norms[p].max(1.0) && zn > 0.0 {
                Some(-slack_p / zn)
            } else {
                None
            };

            let step = match (full, partial) {
                (None, None) => {
                    return Err(Error::Infeasible {
                        row: p,
                        violation: -slack_p,
                        iterations,
                    })
                }
                (Some(t2), None) => t2,
                (None, Some((_, t1))) => t1,
                (Some(t2), Some((_, t1))) => t2.min(t1),
            };

            if full.is_some() {
                u += &z * step;
            }
            for (l, rj) in set.lambda.iter_mut().zip(r.iter()) {
                *l -= step * rj;
            }
            lambda_p += step;

            if full.is_some_and(|t2| step >= t2) {
                set.rows.push(p);
                set.lambda.push(lambda_p);
                break;
            }
            let (j, _) = partial.expect("partial step taken without a blocking row");
            set.remove(j);
        }
    }

    // Re-solve the equality-constrained projection on the final active set so
    // the active rows hold with equality to rounding error.
    let mut multipliers = DVector::zeros(hs.len());
    if !set.rows.is_empty() {
        let basis = set.basis(hs);
        let gram = basis.transpose() * &basis;
        let rhs =
            DVector::from_iterator(set.rows.len(), set.rows.iter().map(|&k| hs.offsets[k])) - basis.transpose() * u0;
        if let Some(ch) = gram.cholesky() {
            let lambda = ch.solve(&rhs);
            if lambda.iter().all(|&l| l >= -tol) {
                u = u0 + &basis * &lambda;
                set.lambda = lambda.iter().map(|l| l.max(0.0)).collect();
            }
        }
        for (&k, &l) in set.rows.iter().zip(set.lambda.iter()) {
            multipliers[k] = l;
        }
    }

    let slacks = hs.slacks(&u);
    for k in 0..hs.len() {
        if slacks[k] < -tol.max(1e-9) * row_norms[k].max(1.0) * 10.0 {
            return Err(Error::Infeasible {
                row: k,
                violation: -slacks[k],
                iterations,
            });
        }
    }

    Ok(Projection {
        u,
        multipliers,
        active: set.rows,
        iterations,
    })
}

fn infeasible(hs: &Halfspaces, u: &DVector<f64>, iterations: usize) -> Error {
    let slacks = hs.slacks(u);
    let (row, violation) = slacks
        .iter()
        .enumerate()
        .map(|(k, s)| (k, -s))
        .fold((0, f64::MIN), |best, cur| if cur.1 > best.1 { cur } else { best });
    Error::Infeasible {
        row,
        violation,
        iterations,
    }
}
