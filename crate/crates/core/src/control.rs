//! Dual-loop vehicle control: position and velocity tracking in the outer
//! loop, geometric attitude tracking on SO(3) in the inner loop.

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::{Error, Result};
use crate::geometry::{gravity_vector, hat, vee_unchecked, RotationMatrix, UavParams, UavState, Vec3};

/// Thrust magnitude below which the thrust direction is considered undefined, N.
pub const DEFAULT_MIN_THRUST: f64 = 1e-6;

/// Controller gains for `N` vehicles.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    /// Position gain, `3N × 3N`.
    pub kp: DMatrix<f64>,
    /// Velocity gain, `3N × 3N`.
    pub kv: DMatrix<f64>,
    /// Attitude error gain per vehicle.
    pub k1: Vec<Matrix3<f64>>,
    /// Angular rate error gain per vehicle.
    pub k2: Vec<Matrix3<f64>>,
}

impl GainSet {
    /// Scalar multiples of the identity for every gain.
    pub fn uniform(n: usize, kp: f64, kv: f64, k1: f64, k2: f64) -> Self {
        Self {
            kp: DMatrix::identity(3 * n, 3 * n) * kp,
            kv: DMatrix::identity(3 * n, 3 * n) * kv,
            k1: vec![Matrix3::identity() * k1; n],
            k2: vec![Matrix3::identity() * k2; n],
        }
    }

    /// Per-vehicle diagonal gains.
    pub fn from_diagonals(kp: &[Vec3], kv: &[Vec3], k1: &[Vec3], k2: &[Vec3]) -> Self {
        let stacked = |d: &[Vec3]| {
            DMatrix::from_diagonal(&DVector::from_iterator(
                3 * d.len(),
                d.iter().flat_map(|v| v.iter().copied()),
            ))
        };
        Self {
            kp: stacked(kp),
            kv: stacked(kv),
            k1: k1.iter().map(Matrix3::from_diagonal).collect(),
            k2: k2.iter().map(Matrix3::from_diagonal).collect(),
        }
    }

    pub fn n_uavs(&self) -> usize {
        self.k1.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.k1.len();
        if self.kp.shape() != (3 * n, 3 * n) || self.kv.shape() != (3 * n, 3 * n) || self.k2.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "gain set is not sized for {n} vehicles"
            )));
        }
        let positive = |x: &f64| *x > 0.0 && x.is_finite();
        let ok = self.kp.diagonal().iter().all(positive)
            && self.kv.diagonal().iter().all(positive)
            && self
                .k1
                .iter()
                .chain(self.k2.iter())
                .all(|k| k.diagonal().iter().all(positive));
        if !ok {
            return Err(Error::InvalidParameter(
                "controller gains must have positive diagonals".into(),
            ));
        }
        Ok(())
    }
}

/// Desired attitude and its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeSetpoint {
    pub r_d: RotationMatrix,
    pub w_d: Vec3,
    pub dw_d: Vec3,
    pub psi_d: f64,
}

/// Pseudo-velocity command `K_p (p_d - p) + ṗ_d`.
pub fn nominal_position_control(
    p: &DVector<f64>,
    p_d: &DVector<f64>,
    v_d: &DVector<f64>,
    kp: &DMatrix<f64>,
) -> DVector<f64> {
    kp * (p_d - p) + v_d
}

/// Inertial force command `K_v (u* - ṗ) + M G`.
pub fn velocity_tracking_control(
    u_star: &DVector<f64>,
    v: &DVector<f64>,
    kv: &DMatrix<f64>,
    masses: &[f64],
) -> DVector<f64> {
    let g = gravity_vector();
    let feedforward = DVector::from_iterator(
        3 * masses.len(),
        masses
            .iter()
            .flat_map(|&m| (g * m).into_iter().copied().collect::<Vec<_>>()),
    );
    kv * (u_star - v) + feedforward
}

/// Body-frame force `F = Rᵀ τ_p`; the third component is the thrust.
pub fn body_force_map(tau_p: &Vec3, r: &RotationMatrix) -> Vec3 {
    r.matrix().transpose() * tau_p
}

/// Attitude whose body z axis points along `tau_p` with heading `psi_d`.
pub fn desired_attitude(tau_p: &Vec3, psi_d: f64, f_min: f64) -> Result<RotationMatrix> {
    let norm = tau_p.norm();
    if !(norm > f_min) {
        return Err(Error::DegenerateThrust(norm));
    }
    let z_b = tau_p / norm;
    let y_a = Vec3::new(-psi_d.sin(), psi_d.cos(), 0.0);
    let x_raw = y_a.cross(&z_b);
    let x_norm = x_raw.norm();
    if x_norm < 1e-6 {
        return Err(Error::GimbalDegenerate);
    }
    let x_b = x_raw / x_norm;
    let y_b = z_b.cross(&x_b);
    RotationMatrix::nearest(&Matrix3::from_columns(&[x_b, y_b, z_b]))
}

/// The attitude a vehicle holds in steady hover under the force convention
/// of [`velocity_tracking_control`].
pub fn hover_attitude(mass: f64, psi_d: f64) -> RotationMatrix {
    desired_attitude(&(gravity_vector() * mass), psi_d, DEFAULT_MIN_THRUST)
        .expect("hover thrust is vertical and non-zero")
}

/// `e_q = ½ (Rᵀ R_d - R_dᵀ R)^∨`
pub fn attitude_error(r: &RotationMatrix, r_d: &RotationMatrix) -> Vec3 {
    let m = r.matrix().transpose() * r_d.matrix();
    vee_unchecked(&(m - m.transpose())) * 0.5
}

/// Geometric attitude law
///
/// ```text
/// τ_q = K1 e_q + K2 ė_q - J (Rᵀ R_d ẇ_d - hat(w) Rᵀ R_d w_d) - w × J w
/// ```
///
/// with `ė_q = Rᵀ R_d w_d - w`.
pub fn attitude_control(
    s: &UavState,
    sp: &AttitudeSetpoint,
    params: &UavParams,
    k1: &Matrix3<f64>,
    k2: &Matrix3<f64>,
) -> Vec3 {
    let w = s.body_rate;
    let rel = s.attitude.matrix().transpose() * sp.r_d.matrix();
    let e_q = attitude_error(&s.attitude, &sp.r_d);
    let e_w = rel * sp.w_d - w;
    let j = &params.inertia;
    let feedforward = j * (rel * sp.dw_d - hat(&w) * rel * sp.w_d);
    k1 * e_q + k2 * e_w - feedforward - w.cross(&(j * w))
}

/// Finite-difference estimate of the desired angular velocity and
/// acceleration from consecutive desired attitudes.
#[derive(Debug, Clone, Default)]
pub struct SetpointDifferentiator {
    prev: Option<(RotationMatrix, Vec3)>,
}

impl SetpointDifferentiator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Forgets history; the next setpoint gets zero rates.
    pub fn reset(&mut self) {
        self.prev = None;
    }

    pub fn update(&mut self, r_d: RotationMatrix, psi_d: f64, dt: f64) -> AttitudeSetpoint {
        let (w_d, dw_d) = match self.prev {
            None => (Vec3::zeros(), Vec3::zeros()),
            Some((r_prev, w_prev)) => {
                let m = r_prev.matrix().transpose() * r_d.matrix();
                let w = vee_unchecked(&(m - m.transpose())) * (0.5 / dt);
                (w, (w - w_prev) / dt)
            }
        };
        self.prev = Some((r_d, w_d));
        AttitudeSetpoint { r_d, w_d, dw_d, psi_d }
    }
}
