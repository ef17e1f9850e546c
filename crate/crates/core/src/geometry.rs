//! Vectors, rotations on SO(3), and the two vehicle motion models.
//!
//! Translational dynamics follow the convention `m p̈ + m G = τ_p` with
//! `G = (0, 0, -g)`, so a hovering vehicle is commanded `τ_p = m G`.
//! Rotational dynamics are the rigid-body Euler equations
//! `J ẇ + w × J w = τ_q` with `Ṙ = R hat(w)`.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;

/// Tolerance used when checking orthonormality and antisymmetry.
pub const ORTHO_TOL: f64 = 1e-9;

/// Gravity vector `G = (0, 0, -g)`.
pub fn gravity_vector() -> Vec3 {
    Vec3::new(0.0, 0.0, -GRAVITY)
}

/// Skew-symmetric matrix with `hat(v) * u == v × u`.
pub fn hat(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Rejects matrices that are not antisymmetric.
pub fn vee(m: &Matrix3<f64>) -> Result<Vec3> {
    let asym = (m + m.transpose()).norm();
    if !asym.is_finite() || asym >= ORTHO_TOL {
        return Err(Error::NotAntisymmetric(asym));
    }
    Ok(vee_unchecked(m))
}

/// Vee map reading the lower-triangular entries without checking antisymmetry.
pub(crate) fn vee_unchecked(m: &Matrix3<f64>) -> Vec3 {
    Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// A proper rotation matrix (`RᵀR = I`, `det R = +1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps `m` after checking it is a rotation to within [`ORTHO_TOL`].
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let ortho = (m.transpose() * m - Matrix3::identity()).norm();
        let det = m.determinant();
        if !ortho.is_finite() || ortho > ORTHO_TOL || (det - 1.0).abs() > ORTHO_TOL {
            return Err(Error::NotRotation { ortho, det });
        }
        Ok(Self(m))
    }

    /// Nearest rotation to `m` in the Frobenius norm (polar decomposition).
    pub fn nearest(m: &Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("rotation matrix"));
        }
        // R = M (MᵀM)^{-1/2}
        let gram = SymmetricEigen::new(m.transpose() * m);
        if gram.eigenvalues.iter().any(|&l| l <= 0.0) {
            return Err(Error::NotRotation {
                ortho: f64::INFINITY,
                det: m.determinant(),
            });
        }
        let inv_sqrt = Matrix3::from_diagonal(&gram.eigenvalues.map(|l| 1.0 / l.sqrt()));
        let r = m * gram.eigenvectors * inv_sqrt * gram.eigenvectors.transpose();
        if r.determinant() < 0.0 {
            return Err(Error::NotRotation {
                ortho: 0.0,
                det: r.determinant(),
            });
        }
        Ok(Self(r))
    }

    /// Rotation about the inertial z axis.
    pub fn about_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Rotation by `angle` about the unit vector `axis` (Rodrigues).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let k = hat(&axis.normalize());
        let (s, c) = angle.sin_cos();
        Self(Matrix3::identity() + k * s + k * k * (1.0 - c))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Frobenius norm of `RᵀR - I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).norm()
    }

    /// Roll, pitch, yaw (ZYX convention), for logging only.
    pub fn euler_zyx(&self) -> Vec3 {
        let m = &self.0;
        let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        Vec3::new(roll, pitch, yaw)
    }
}

impl std::ops::Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl std::ops::Mul<Vec3> for RotationMatrix {
    type Output = Vec3;

    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Mass properties and bounding sphere of one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct UavParams {
    pub mass: f64,
    pub inertia: Matrix3<f64>,
    /// Radius of the collision sphere, m.
    pub radius: f64,
}

impl UavParams {
    pub fn new(mass: f64, inertia: Matrix3<f64>, radius: f64) -> Result<Self> {
        let p = Self { mass, inertia, radius };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mass must be positive, got {}",
                self.mass
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bounding radius must be positive, got {}",
                self.radius
            )));
        }
        if (self.inertia - self.inertia.transpose()).norm() > 1e-12 {
            return Err(Error::InvalidParameter("inertia must be symmetric".into()));
        }
        if self.inertia.cholesky().is_none() {
            return Err(Error::InvalidParameter("inertia must be positive definite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: RotationMatrix,
    pub body_rate: Vec3,
}

impl UavState {
    pub fn at_rest(position: Vec3, attitude: RotationMatrix) -> Self {
        Self {
            position,
            velocity: Vec3::zeros(),
            attitude,
            body_rate: Vec3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|x| x.is_finite())
            && self.velocity.iter().all(|x| x.is_finite())
            && self.attitude.matrix().iter().all(|x| x.is_finite())
            && self.body_rate.iter().all(|x| x.is_finite())
    }
}

/// Landing pad position and velocity of a ground vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UgvState {
    pub position: Vec3,
    pub velocity: Vec3,
}

/// One explicit-Euler step of the single-integrator model `ṗ = u`.
pub fn step_kinematic(p: &Vec3, u: &Vec3, dt: f64) -> Vec3 {
    debug_assert!(dt > 0.0);
    p + u * dt
}

#[derive(Clone, Copy)]
struct Derivative {
    dp: Vec3,
    dv: Vec3,
    dr: Matrix3<f64>,
    dw: Vec3,
}

fn rigid_body_rates(
    v: &Vec3,
    r: &Matrix3<f64>,
    w: &Vec3,
    params: &UavParams,
    inertia_inv: &Matrix3<f64>,
    tau_p: &Vec3,
    tau_q: &Vec3,
) -> Derivative {
    let jw = params.inertia * w;
    Derivative {
        dp: *v,
        dv: (tau_p - gravity_vector() * params.mass) / params.mass,
        dr: r * hat(w),
        dw: inertia_inv * (tau_q - w.cross(&jw)),
    }
}

/// One RK4 step of the full rigid-body model under constant inputs.
///
/// `tau_p` is the inertial-frame force and `tau_q` the body-frame torque.
/// The attitude is projected back onto SO(3) after the step.
pub fn step_full_dynamics(s: &UavState, params: &UavParams, tau_p: &Vec3, tau_q: &Vec3, dt: f64) -> Result<UavState> {
    debug_assert!(dt > 0.0);
    if !s.is_finite() {
        return Err(Error::NonFinite("vehicle state"));
    }
    if tau_p.iter().chain(tau_q.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("vehicle input"));
    }
    let inertia_inv = params
        .inertia
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("singular inertia".into()))?;

    let r0 = *s.attitude.matrix();
    let f = |v: &Vec3, r: &Matrix3<f64>, w: &Vec3| rigid_body_rates(v, r, w, params, &inertia_inv, tau_p, tau_q);

    let k1 = f(&s.velocity, &r0, &s.body_rate);
    let h = 0.5 * dt;
    let k2 = f(&(s.velocity + k1.dv * h), &(r0 + k1.dr * h), &(s.body_rate + k1.dw * h));
    let k3 = f(&(s.velocity + k2.dv * h), &(r0 + k2.dr * h), &(s.body_rate + k2.dw * h));
    let k4 = f(
        &(s.velocity + k3.dv * dt),
        &(r0 + k3.dr * dt),
        &(s.body_rate + k3.dw * dt),
    );

    let sixth = dt / 6.0;
    let position = s.position + (k1.dp + (k2.dp + k3.dp) * 2.0 + k4.dp) * sixth;
    let velocity = s.velocity + (k1.dv + (k2.dv + k3.dv) * 2.0 + k4.dv) * sixth;
    let body_rate = s.body_rate + (k1.dw + (k2.dw + k3.dw) * 2.0 + k4.dw) * sixth;
    let r = r0 + (k1.dr + (k2.dr + k3.dr) * 2.0 + k4.dr) * sixth;

    let next = UavState {
        position,
        velocity,
        attitude: RotationMatrix::nearest(&r)?,
        body_rate,
    };
    if !next.is_finite() {
        return Err(Error::NonFinite("vehicle state"));
    }
    Ok(next)
}
