//! Reference interpreter for the supported FORTRAN subset.

mod interp;
pub mod value;

pub use interp::{run_program, ArgTrace, ArrayValue, EvalConfig, EvalError, ProgramOutput, Session, VarValue};
pub use value::{Value, ValueError};
