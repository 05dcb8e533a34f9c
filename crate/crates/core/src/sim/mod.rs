//! Discrete simulation of pipeline graphs: kernels as processes over
//! bounded FIFOs and double-buffered global memory.

mod channel;
mod host;
mod kernels;
mod network;
mod smart_cache;

use std::collections::BTreeMap;

use serde::Serialize;

pub use channel::{Channel, Pop};
pub use host::simulate;
pub use network::{Counters, Ctx, Drain, Feeder, Memory, Process, Schedule, Scheduler, Status};
pub use smart_cache::{smart_cache_run, SmartCacheState, Want};

use crate::eval::value::ValueError;
use crate::eval::{EvalConfig, EvalError, ProgramOutput, Value};
use crate::pipeline::{KernelKind, PipelineGraph, Sink, Source, Variant};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("deadlock; blocked: {}", blocked.join(", "))]
    Deadlock { blocked: Vec<String> },
    #[error("scheduler step limit of {0} exceeded")]
    StepLimit(u64),
    #[error("write to closed channel {channel}")]
    WriteAfterClose { channel: String },
    #[error("{kernel}: {channel} ended early")]
    UnexpectedEnd { kernel: String, channel: String },
    #[error("{kernel}: {source}")]
    Value { kernel: String, source: ValueError },
    #[error("{array}: expected {expected} elements, found {found}")]
    ShapeMismatch { array: String, expected: usize, found: usize },
    #[error("`{0}` is not defined")]
    Missing(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub schedule: Schedule,
    pub max_steps: u64,
    /// PARAMETER overrides for the host program.
    pub eval: EvalConfig,
    /// Replaces host arrays after the prologue; row-major.
    pub initial: BTreeMap<String, Vec<Value>>,
    /// Replaces host scalars after the prologue.
    pub scalars: BTreeMap<String, Value>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            schedule: Schedule::RoundRobin,
            max_steps: 4_000_000_000,
            eval: EvalConfig::default(),
            initial: BTreeMap::new(),
            scalars: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct KernelReport {
    #[serde(flatten)]
    pub counters: Counters,
    pub launches: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HostTransfers {
    pub to_device_bytes: u64,
    pub to_host_bytes: u64,
    pub to_device_copies: u64,
    pub to_host_copies: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SimReport {
    pub variant: Variant,
    pub schedule: String,
    pub time_steps: u64,
    pub scheduler_steps: u64,
    pub per_kernel: BTreeMap<String, KernelReport>,
    pub totals: Counters,
    pub host_transfers: HostTransfers,
}

impl SimReport {
    pub fn new(variant: Variant, schedule: Schedule) -> SimReport {
        SimReport {
            variant,
            schedule: schedule.to_string(),
            time_steps: 0,
            scheduler_steps: 0,
            per_kernel: BTreeMap::new(),
            totals: Counters::default(),
            host_transfers: HostTransfers::default(),
        }
    }

    pub fn global_accesses(&self) -> u64 {
        self.totals.global_reads + self.totals.global_writes
    }
}

#[derive(Debug)]
pub struct SimResult {
    pub host: ProgramOutput,
    /// Final device arrays, row-major.
    pub device: BTreeMap<String, Vec<Value>>,
    pub report: SimReport,
}

/// Global reads and writes one launch of each kernel performs, counted
/// per scalar element, derived from the graph alone.
pub fn predicted_accesses(graph: &PipelineGraph) -> BTreeMap<String, (u64, u64)> {
    let size = graph.layout.size as u64;
    graph
        .kernels
        .iter()
        .map(|k| {
            let d = k.domain.len() as u64;
            let rw = match &k.kind {
                KernelKind::Compute(c) => {
                    let reads = c.sources.iter().filter(|s| matches!(s, Source::Mem { .. })).count() as u64;
                    let writes = c.sinks.iter().flatten().filter(|s| matches!(s, Sink::Mem { .. })).count() as u64;
                    let fold = c.fold.is_some() as u64;
                    (reads * d + fold, writes * d + fold)
                }
                KernelKind::MemRead { streams } => (streams.len() as u64 * size, 0),
                KernelKind::MemWrite { streams } => (0, streams.iter().map(|s| s.2.len() as u64).sum()),
                KernelKind::SmartCache { .. } => (0, 0),
            };
            (k.name.clone(), rw)
        })
        .collect()
}

/// Closed-form global reads and writes of `nt` time steps.
pub fn count_accesses(graph: &PipelineGraph, nt: u64) -> AccessCount {
    let (reads, writes) = predicted_accesses(graph).values().fold((0, 0), |(r, w), (a, b)| (r + a, w + b));
    AccessCount { reads: reads * nt, writes: writes * nt }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AccessCount {
    pub reads: u64,
    pub writes: u64,
}

impl AccessCount {
    pub fn total(&self) -> u64 {
        self.reads + self.writes
    }
}
