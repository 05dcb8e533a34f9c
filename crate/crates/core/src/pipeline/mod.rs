//! Lowering of the functional IR to streaming pipelines.

mod dump;
mod emit;
mod graph;
mod lower;
mod resolve;
mod transfer;

use std::collections::BTreeMap;

pub use dump::graph_to_json;
pub use emit::{emit_kernels, parse_kernel_text, KernelParam, KernelText};
pub use graph::*;
pub use lower::lower;
pub use resolve::{const_eval, resolve_constants, Consts};
pub use transfer::{device_exposed_reads, minimize_transfers};

#[derive(Debug, Clone)]
pub struct LowerOptions {
    /// Minimum channel capacity; lowering raises it where a consumer lags.
    pub capacity: usize,
    /// Largest smart-cache buffer allowed, in elements.
    pub buffer_budget: usize,
    /// PARAMETER overrides, as for the evaluator.
    pub params: BTreeMap<String, i32>,
    pub policy: BoundaryPolicy,
}

impl Default for LowerOptions {
    fn default() -> Self {
        Self { capacity: 64, buffer_budget: 1 << 16, params: BTreeMap::new(), policy: BoundaryPolicy::Clamp }
    }
}

impl LowerOptions {
    pub fn with_params(pairs: &[(&str, i32)]) -> Self {
        Self { params: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(), ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LowerError {
    #[error("smart-cache buffer of {buffer_len} elements exceeds the budget of {budget}")]
    BudgetExceeded { buffer_len: usize, budget: usize },
    #[error("stencil offset {offsets} on {array} wraps across a row")]
    NonLinearizableStencil { array: String, offsets: String },
    #[error("{array} does not share the pipeline's array shape")]
    ShapeMismatch { array: String },
    #[error("{node} reads {array} outside its bounds")]
    OutOfBounds { node: String, array: String },
    #[error("{0}")]
    Unsupported(String),
}
