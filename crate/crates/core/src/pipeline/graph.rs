//! Pipeline graphs: kernels connected by channels and global memory.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::analysis::{ElemFn, FoldOp};
use crate::frontend::{BaseType, Expr, Stmt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Baseline,
    Channelized,
    SmartCache,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Baseline, Variant::Channelized, Variant::SmartCache];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Channelized => "channelized",
            Variant::SmartCache => "smartcache",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name() == s)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Row-major layout shared by every array of the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Layout {
    pub bounds: Vec<(i32, i32)>,
    pub strides: Vec<i64>,
    pub size: usize,
}

impl Layout {
    pub fn new(bounds: Vec<(i32, i32)>) -> Layout {
        let mut strides = vec![1i64; bounds.len()];
        for d in (0..bounds.len().saturating_sub(1)).rev() {
            let ext = (bounds[d + 1].1 - bounds[d + 1].0 + 1) as i64;
            strides[d] = strides[d + 1] * ext;
        }
        let size = bounds.iter().map(|(lo, hi)| (hi - lo + 1).max(0) as usize).product();
        Layout { bounds, strides, size }
    }

    /// Length of the innermost dimension; the stride of the next one out.
    pub fn row_stride(&self) -> i64 {
        if self.strides.len() >= 2 {
            self.strides[self.strides.len() - 2]
        } else {
            self.size as i64
        }
    }

    pub fn linear_offset(&self, d: &[i32]) -> i64 {
        d.iter().zip(&self.strides).map(|(&o, &s)| o as i64 * s).sum()
    }

    pub fn position(&self, idx: &[i32]) -> usize {
        idx.iter().zip(&self.bounds).zip(&self.strides).map(|((&i, &(lo, _)), &s)| (i - lo) as i64 * s).sum::<i64>()
            as usize
    }

    pub fn index_of(&self, mut p: usize) -> Vec<i32> {
        let mut idx = Vec::with_capacity(self.bounds.len());
        for (&(lo, _), &s) in self.bounds.iter().zip(&self.strides) {
            let q = p / s as usize;
            p %= s as usize;
            idx.push(lo + q as i32);
        }
        idx
    }
}

/// The iteration box of a kernel, with resolved bounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Domain {
    pub bounds: Vec<(i32, i32)>,
}

impl Domain {
    pub fn contains(&self, idx: &[i32]) -> bool {
        idx.iter().zip(&self.bounds).all(|(&i, &(lo, hi))| lo <= i && i <= hi)
    }

    pub fn len(&self) -> usize {
        self.bounds.iter().map(|(lo, hi)| (hi - lo + 1).max(0) as usize).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear positions inside the domain, ascending.
    pub fn positions(&self, layout: &Layout) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut idx: Vec<i32> = self.bounds.iter().map(|b| b.0).collect();
        if self.is_empty() {
            return out;
        }
        loop {
            out.push(layout.position(&idx));
            let mut d = idx.len();
            loop {
                if d == 0 {
                    return out;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] <= self.bounds[d].1 {
                    break;
                }
                idx[d] = self.bounds[d].0;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryPolicy {
    Clamp,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SmartCacheSpec {
    pub stream_id: String,
    pub size: usize,
    /// Linear offsets, sorted; one output channel each.
    pub offsets: Vec<i64>,
    pub mp_off: i64,
    pub mn_off: i64,
    pub buffer_len: usize,
    pub sync_only: bool,
    pub policy: BoundaryPolicy,
}

impl SmartCacheSpec {
    pub fn new(stream_id: impl Into<String>, size: usize, offsets: &[i64], policy: BoundaryPolicy) -> SmartCacheSpec {
        let mut offsets = offsets.to_vec();
        offsets.sort_unstable();
        offsets.dedup();
        let mp_off = offsets.iter().copied().chain([0]).max().expect("non-empty");
        let mn_off = -offsets.iter().copied().chain([0]).min().expect("non-empty");
        SmartCacheSpec {
            stream_id: stream_id.into(),
            size,
            offsets,
            mp_off,
            mn_off,
            buffer_len: (mp_off + mn_off + 1) as usize,
            sync_only: false,
            policy,
        }
    }

    /// A pure delay line of `delay` elements.
    pub fn sync(stream_id: impl Into<String>, size: usize, delay: i64) -> SmartCacheSpec {
        SmartCacheSpec {
            stream_id: stream_id.into(),
            size,
            offsets: vec![0],
            mp_off: delay,
            mn_off: 0,
            buffer_len: delay as usize + 1,
            sync_only: true,
            policy: BoundaryPolicy::Clamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ChannelEdge {
    pub name: String,
    pub producer: String,
    pub consumer: String,
    pub capacity: usize,
    pub elem_type: BaseType,
}

/// Where a compute kernel gets one slot value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase", tag = "from")]
pub enum Source {
    /// Global memory at the element's position plus `offset`. `after`
    /// names a kernel of the same launch group that writes the array and
    /// must have passed that position first.
    Mem { array: String, offset: i64, after: Option<String> },
    Channel { channel: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase", tag = "to")]
pub enum Sink {
    Mem { array: String },
    Channel { channel: usize },
}

#[derive(Debug, Clone)]
pub struct ComputeKernel {
    /// IR node this kernel came from.
    pub node: String,
    pub elem: ElemFn,
    pub fold: Option<(String, FoldOp)>,
    pub nest_vars: Vec<String>,
    pub body: Vec<Stmt>,
    /// One per elem slot.
    pub sources: Vec<Source>,
    /// One list per elem output.
    pub sinks: Vec<Vec<Sink>>,
    /// Iterate every position of the layout instead of just the domain;
    /// outside the domain the kernel forwards zeros.
    pub full_stream: bool,
}

#[derive(Debug, Clone)]
pub enum KernelKind {
    Compute(ComputeKernel),
    /// Streams whole arrays out of global memory; each array fans out to
    /// several channels.
    MemRead { streams: Vec<(String, Vec<usize>)> },
    /// Drains full-size streams and stores the positions inside each
    /// array's domain.
    MemWrite { streams: Vec<(String, usize, Domain)> },
    SmartCache { spec: SmartCacheSpec, input: usize, outputs: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct Kernel {
    pub name: String,
    pub kind: KernelKind,
    pub domain: Domain,
    pub params: Vec<String>,
}

impl Kernel {
    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            KernelKind::Compute(_) => "compute",
            KernelKind::MemRead { .. } => "mem_read",
            KernelKind::MemWrite { .. } => "mem_write",
            KernelKind::SmartCache { .. } => "smart_cache",
        }
    }

    pub fn as_compute(&self) -> Option<&ComputeKernel> {
        match &self.kind {
            KernelKind::Compute(c) => Some(c),
            _ => None,
        }
    }

    /// Global-memory ports as (array, direction).
    pub fn mem_ports(&self) -> BTreeSet<(String, MemDir)> {
        let mut out = BTreeSet::new();
        match &self.kind {
            KernelKind::Compute(c) => {
                for s in &c.sources {
                    if let Source::Mem { array, .. } = s {
                        out.insert((array.clone(), MemDir::Read));
                    }
                }
                for s in c.sinks.iter().flatten() {
                    if let Sink::Mem { array } = s {
                        out.insert((array.clone(), MemDir::Write));
                    }
                }
                if let Some((acc, _)) = &c.fold {
                    out.insert((acc.clone(), MemDir::Read));
                    out.insert((acc.clone(), MemDir::Write));
                }
            }
            KernelKind::MemRead { streams } => {
                out.extend(streams.iter().map(|(a, _)| (a.clone(), MemDir::Read)));
            }
            KernelKind::MemWrite { streams } => {
                out.extend(streams.iter().map(|(a, _, _)| (a.clone(), MemDir::Write)));
            }
            KernelKind::SmartCache { .. } => {}
        }
        out
    }

    pub fn channels_in(&self) -> Vec<usize> {
        match &self.kind {
            KernelKind::Compute(c) => c
                .sources
                .iter()
                .filter_map(|s| match s {
                    Source::Channel { channel } => Some(*channel),
                    _ => None,
                })
                .collect(),
            KernelKind::MemRead { .. } => vec![],
            KernelKind::MemWrite { streams } => streams.iter().map(|s| s.1).collect(),
            KernelKind::SmartCache { input, .. } => vec![*input],
        }
    }

    pub fn channels_out(&self) -> Vec<usize> {
        match &self.kind {
            KernelKind::Compute(c) => c
                .sinks
                .iter()
                .flatten()
                .filter_map(|s| match s {
                    Sink::Channel { channel } => Some(*channel),
                    _ => None,
                })
                .collect(),
            KernelKind::MemRead { streams } => streams.iter().flat_map(|s| s.1.iter().copied()).collect(),
            KernelKind::MemWrite { .. } => vec![],
            KernelKind::SmartCache { outputs, .. } => outputs.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MemDir {
    Read,
    Write,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TransferSchedule {
    pub once_to_device: BTreeSet<String>,
    pub per_step_to_device: BTreeSet<String>,
    pub once_to_host: BTreeSet<String>,
    pub per_step_to_host: BTreeSet<String>,
}

impl TransferSchedule {
    /// Copy every device array in both directions around every step.
    pub fn everything(arrays: &BTreeSet<String>) -> TransferSchedule {
        TransferSchedule {
            per_step_to_device: arrays.clone(),
            per_step_to_host: arrays.clone(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub enum HostOp {
    /// Host statements (a Seq node of the step).
    Host { node: String, stmts: Vec<Stmt> },
    /// Kernels launched together; they finish before the next op.
    Launch(Vec<String>),
}

#[derive(Debug, Clone)]
pub struct TimeLoopPlan {
    pub var: String,
    pub start: Expr,
    pub end: Expr,
}

#[derive(Debug, Clone)]
pub struct PipelineGraph {
    pub variant: Variant,
    pub layout: Layout,
    pub kernels: Vec<Kernel>,
    pub channels: Vec<ChannelEdge>,
    /// Device arrays and their element types.
    pub arrays: BTreeMap<String, BaseType>,
    /// Scalar types of the program, for parameters and accumulators.
    pub scalars: BTreeMap<String, BaseType>,
    /// Ops of one time step.
    pub step: Vec<HostOp>,
    pub time_loop: Option<TimeLoopPlan>,
    pub transfers: TransferSchedule,
    /// How arrays carried from one step to the next travel.
    pub recirculation: BTreeMap<String, String>,
}

impl PipelineGraph {
    pub fn kernel(&self, name: &str) -> Option<&Kernel> {
        self.kernels.iter().find(|k| k.name == name)
    }

    pub fn smart_caches(&self) -> Vec<&SmartCacheSpec> {
        self.kernels
            .iter()
            .filter_map(|k| match &k.kind {
                KernelKind::SmartCache { spec, .. } => Some(spec),
                _ => None,
            })
            .collect()
    }

    pub fn mem_ports(&self) -> Vec<(String, String, MemDir)> {
        self.kernels
            .iter()
            .flat_map(|k| k.mem_ports().into_iter().map(|(a, d)| (k.name.clone(), a, d)))
            .collect()
    }
}
