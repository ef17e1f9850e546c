//! Landing and collision barrier functions.
//!
//! The landing barrier keeps a vehicle above an exponentially decaying
//! surface centred on its pad:
//!
//! ```text
//! h_l(p, t) = e_z - β α d exp(-α d),   e = p - p_d(t),   d = sqrt(e_x² + e_y²)
//! ```
//!
//! The surface vanishes both on the pad axis and far from it, peaking at
//! `d = 1/α` with height `β/e`. The collision barrier between two vehicles
//! is the squared-distance sphere `h_s = ||p_i - p_j||² - (s_i + s_j)²`.

use nalgebra::SVector;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Horizontal distance below which the landing barrier gradient is not used.
pub const DEFAULT_NEAR_AXIS_TOL: f64 = 1e-3;

/// Shape parameters of a landing barrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcbfParams {
    /// Horizontal scale, 1/m.
    pub alpha: f64,
    /// Vertical scale, m.
    pub beta: f64,
}

impl LcbfParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "landing barrier needs alpha > 0 and beta > 0, got alpha = {alpha}, beta = {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// Height of the forbidden surface at horizontal distance `d`.
    pub fn boundary_height(&self, d: f64) -> f64 {
        self.beta * self.alpha * d * (-self.alpha * d).exp()
    }

    /// Horizontal distance of the surface maximum.
    pub fn peak_distance(&self) -> f64 {
        1.0 / self.alpha
    }

    pub fn peak_height(&self) -> f64 {
        self.beta / std::f64::consts::E
    }
}

/// Value, spatial gradient and explicit time derivative of a barrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierEval<const D: usize> {
    pub value: f64,
    pub grad_p: SVector<f64, D>,
    pub dt_partial: f64,
}

pub type LandingEval = BarrierEval<3>;
pub type CollisionEval = BarrierEval<6>;

/// Landing barrier value only. Defined everywhere, including on the axis.
pub fn lcbf_value(p: &Vec3, p_d: &Vec3, params: &LcbfParams) -> f64 {
    let e = p - p_d;
    let d = e.x.hypot(e.y);
    e.z - params.boundary_height(d)
}

/// Evaluates the landing barrier of a vehicle at `p` over a pad at `p_d`
/// moving with velocity `v_d`.
///
/// Returns [`Error::NearAxis`] when the horizontal distance is below `d_tol`;
/// the caller is expected to drop the constraint there.
pub fn lcbf_eval(p: &Vec3, p_d: &Vec3, v_d: &Vec3, params: &LcbfParams, d_tol: f64) -> Result<LandingEval> {
    let e = p - p_d;
    let d = e.x.hypot(e.y);
    if !(d >= d_tol) {
        return Err(Error::NearAxis { distance: d });
    }
    let (alpha, beta) = (params.alpha, params.beta);
    let decay = (-alpha * d).exp();
    let value = e.z - beta * alpha * d * decay;

    // d/d(e_x) of the boundary term, divided by e_x
    let slope = beta * alpha * decay * (alpha * d - 1.0) / d;
    let grad_p = SVector::<f64, 3>::new(slope * e.x, slope * e.y, 1.0);
    // e = p - p_d(t), so the explicit time dependence enters through -v_d
    let dt_partial = -grad_p.dot(v_d);

    Ok(BarrierEval {
        value,
        grad_p,
        dt_partial,
    })
}

/// Evaluates the pairwise collision barrier. The gradient is stacked as
/// `(∂h/∂p_i, ∂h/∂p_j)`; the barrier has no explicit time dependence.
pub fn scbf_eval(p_i: &Vec3, p_j: &Vec3, s_i: f64, s_j: f64) -> CollisionEval {
    let delta = p_i - p_j;
    let r = s_i + s_j;
    let mut grad_p = SVector::<f64, 6>::zeros();
    grad_p.fixed_rows_mut::<3>(0).copy_from(&(delta * 2.0));
    grad_p.fixed_rows_mut::<3>(3).copy_from(&(delta * -2.0));
    BarrierEval {
        value: delta.norm_squared() - r * r,
        grad_p,
        dt_partial: 0.0,
    }
}

/// Chooses `(α, β)` so the landing surface peaks at horizontal distance
/// `d_star` with height `ez_star`.
pub fn shaping_from_peak(d_star: f64, ez_star: f64) -> Result<LcbfParams> {
    if !(d_star > 0.0 && d_star.is_finite() && ez_star > 0.0 && ez_star.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "peak distance and height must be positive, got d* = {d_star}, e_z* = {ez_star}"
        )));
    }
    LcbfParams::new(1.0 / d_star, ez_star * std::f64::consts::E)
}
