//! Safe landing of several quadrotors on moving ground vehicles.
//!
//! A nominal position controller drives each aerial vehicle toward its pad.
//! A quadratic-program safety filter then adjusts the stacked command as
//! little as possible so that a landing barrier (a funnel above each pad)
//! and pairwise collision barriers stay forward invariant.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barriers;
pub mod control;
pub mod error;
pub mod filter;
pub mod geometry;
pub mod qp;
pub mod scenarios;
pub mod sim;

pub use barriers::{lcbf_eval, lcbf_value, scbf_eval, shaping_from_peak, BarrierEval, LcbfParams};
pub use control::GainSet;
pub use error::{Error, Result};
pub use filter::{assemble_constraints, filter, pair_row_index, solve_qp, ConstraintSystem, FilterConfig};
pub use geometry::{RotationMatrix, UavParams, UavState, UgvState, Vec3};
pub use sim::{run_scenario, safety_metrics, Fidelity, ScenarioConfig, SimLog};
