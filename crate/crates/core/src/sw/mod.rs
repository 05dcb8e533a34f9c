//! Two-dimensional linear shallow-water model: the sequential reference
//! implementation, experiment configuration, field dumps, and the
//! FORTRAN 77 corpus that the compiler is exercised on.

mod config;
pub mod corpus;
mod field_io;
mod oracle;
mod state;

pub use config::{ExperimentConfig, InitialCondition, ModelParams};
pub use field_io::{read_field, write_field, FieldDump, FieldIoError};
pub use oracle::{dynamics_step, reference_run, reference_step, shapiro_step, update_step, Dynamics};
pub use state::{Grid, ShallowWaterState};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwError {
    #[error("CFL condition violated: dt = {dt} but dx / sqrt(g * max h) = {limit}")]
    CflViolation { dt: f32, limit: f32 },
    #[error("field `{field}` is not finite at (j={j}, k={k})")]
    NonFiniteField { field: &'static str, j: usize, k: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
