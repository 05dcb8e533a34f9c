//! Dataflow analysis: loop classification and the functional IR.

mod build;
mod dump;
pub mod classify;
pub mod elemental;
pub mod ir;
pub(crate) mod ir_eval;
mod rewrite;

pub use build::{build_ir, compute_edges, rebuild_do, stmt_effects};
pub use dump::ir_to_json;
pub use classify::{classify_loop_nest, extract_nest, format_offsets, Classified};
pub use elemental::{CompileError, ElemFn};
pub use ir::*;
pub use ir_eval::run_ir;
pub use rewrite::{rewrite_ir, RewriteLog, RewriteRules};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("cannot inline call to {unit}: {reason}")]
    UnsupportedCall { unit: String, reason: String },
    #[error("argument {array} does not match the dummy's type or rank in {unit}")]
    IrTypeMismatch { array: String, unit: String },
    #[error(transparent)]
    Compile(#[from] CompileError),
}
