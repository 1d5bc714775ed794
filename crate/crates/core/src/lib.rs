pub mod arith;
pub mod batch;
pub mod characters;
pub mod dirichlet_series;
pub mod distance_lab;
pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod moment_oracle;
mod par;
pub mod rng;
pub mod shifts_covariance;

pub use error::{Error, Result};
