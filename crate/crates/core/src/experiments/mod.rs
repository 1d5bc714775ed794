//! Experiment configuration, the sampling pipeline, distance tables, rate
//! sweeps and file output.

pub mod config;
pub mod io;
pub mod pipeline;
pub mod tables;

pub use config::{DistanceParams, ExperimentConfig, MomentsConfig, ParamsConfig, ShiftTolerances, SCHEMA_VERSION};
pub use io::{emit, emit_document, format_f64, load_json, render, to_json_string, write_text, Format, SampleRow, Tabular};
pub use pipeline::{dedekind_covariance, dedekind_pairing, dedekind_vectors, sample_chain, t_draws, Chain, Setup};
pub use tables::{moment_table, rate_sweep, stage_distance_table, RateRow};
