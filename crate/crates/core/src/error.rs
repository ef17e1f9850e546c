use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not antisymmetric (||M + Mᵀ|| = {0:e})")]
    NotAntisymmetric(f64),

    #[error("matrix is not a rotation (||RᵀR - I|| = {ortho:e}, det = {det})")]
    NotRotation { ortho: f64, det: f64 },

    #[error("non-finite {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A scenario violates one of its named preconditions.
    #[error("scenario violates {name}: {detail}")]
    Invariant { name: &'static str, detail: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The landing barrier gradient is undefined this close to the descent axis.
    #[error("horizontal distance {distance:e} m is inside the near-axis guard")]
    NearAxis { distance: f64 },

    #[error("invalid vehicle pair ({i}, {j}) for {n} vehicles")]
    InvalidPair { i: usize, j: usize, n: usize },

    /// No input satisfies every constraint; `row` is the most violated one.
    #[error("safety filter infeasible after {iterations} iterations: row {row} violated by {violation:e}")]
    Infeasible {
        row: usize,
        violation: f64,
        iterations: usize,
    },

    #[error("thrust magnitude {0:e} N is too small to define a thrust direction")]
    DegenerateThrust(f64),

    #[error("yaw reference is parallel to the thrust direction")]
    GimbalDegenerate,
}
