//! Dirichlet polynomials, mollifier and truncated L-series.

pub mod params;
pub mod phase;
pub mod poly;

pub use params::{derive_params, derive_params_with, ApproxParams, ParamConstants};
pub use phase::{reduce_phase, turn_const, Height, Phase, TurnConst};
pub use poly::*;
