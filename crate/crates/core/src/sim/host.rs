//! The host side: runs the program's own statements through the
//! interpreter and launches kernel groups on the simulated device.

use std::collections::{BTreeMap, BTreeSet};

use super::channel::Channel;
use super::kernels::{ComputeProc, MemReadProc, MemWriteProc, SmartCacheProc};
use super::network::{Counters, Ctx, Memory, Process, Scheduler};
use super::{SimError, SimOptions, SimReport, SimResult};
use crate::analysis::ir_eval::open_session;
use crate::analysis::FunctionalIr;
use crate::eval::{Session, Value};
use crate::frontend::ProgramAst;
use crate::pipeline::{HostOp, KernelKind, Layout, MemDir, PipelineGraph};

const ELEM_BYTES: u64 = 4;

/// Column-major offset of each row-major position.
fn column_major_map(layout: &Layout) -> Vec<usize> {
    let mut strides = Vec::with_capacity(layout.bounds.len());
    let mut s = 1usize;
    for (lo, hi) in &layout.bounds {
        strides.push(s);
        s *= (hi - lo + 1) as usize;
    }
    (0..layout.size)
        .map(|p| {
            let idx = layout.index_of(p);
            idx.iter().zip(&layout.bounds).zip(&strides).map(|((i, (lo, _)), st)| (i - lo) as usize * st).sum()
        })
        .collect()
}

struct Device<'g> {
    graph: &'g PipelineGraph,
    mem: Memory,
    cm: Vec<usize>,
    sched: Scheduler,
    report: SimReport,
}

impl Device<'_> {
    fn push<'a>(&mut self, s: &mut Session, names: impl IntoIterator<Item = &'a String>) -> Result<(), SimError> {
        for a in names {
            let Some((data, bounds)) = s.array_mut(a) else { continue };
            if bounds != self.graph.layout.bounds {
                return Err(SimError::ShapeMismatch { array: a.clone(), expected: self.graph.layout.size, found: data.len() });
            }
            let dev = self.mem.front_mut(a).ok_or_else(|| SimError::Missing(a.clone()))?;
            for (p, &c) in self.cm.iter().enumerate() {
                dev[p] = data[c];
            }
            self.report.host_transfers.to_device_bytes += ELEM_BYTES * dev.len() as u64;
            self.report.host_transfers.to_device_copies += 1;
        }
        Ok(())
    }

    fn pull<'a>(&mut self, s: &mut Session, names: impl IntoIterator<Item = &'a String>) -> Result<(), SimError> {
        for a in names {
            let Some((data, bounds)) = s.array_mut(a) else { continue };
            if bounds != self.graph.layout.bounds {
                return Err(SimError::ShapeMismatch { array: a.clone(), expected: self.graph.layout.size, found: data.len() });
            }
            let dev = self.mem.front(a).ok_or_else(|| SimError::Missing(a.clone()))?;
            for (p, &c) in self.cm.iter().enumerate() {
                data[c] = dev[p];
            }
            self.report.host_transfers.to_host_bytes += ELEM_BYTES * dev.len() as u64;
            self.report.host_transfers.to_host_copies += 1;
        }
        Ok(())
    }

    fn launch(&mut self, s: &mut Session, names: &[String]) -> Result<(), SimError> {
        let g = self.graph;
        let kernels = names
            .iter()
            .map(|n| g.kernel(n).ok_or_else(|| SimError::Missing(n.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let written: BTreeSet<String> = kernels
            .iter()
            .flat_map(|k| k.mem_ports())
            .filter(|(a, d)| *d == MemDir::Write && g.arrays.contains_key(a))
            .map(|(a, _)| a)
            .collect();
        written.iter().for_each(|a| self.mem.begin(a));
        let mut channels: Vec<Channel> = g.channels.iter().map(|c| Channel::new(c.name.clone(), c.capacity)).collect();
        let mut progress = BTreeMap::new();
        let mut procs: Vec<Box<dyn Process + '_>> = Vec::new();
        let scalar = |s: &Session, p: &str| s.scalar(p).ok_or_else(|| SimError::Missing(p.to_string()));
        for k in &kernels {
            procs.push(match &k.kind {
                KernelKind::Compute(c) => {
                    let params = k.params.iter().map(|p| scalar(s, p)).collect::<Result<Vec<_>, _>>()?;
                    let acc = c.fold.as_ref().map(|(a, _)| scalar(s, a)).transpose()?;
                    let p = ComputeProc::new(k, c, &g.layout, params, acc);
                    progress.insert(k.name.clone(), p.first_position());
                    Box::new(p)
                }
                KernelKind::MemRead { streams } => Box::new(MemReadProc::new(&k.name, streams, g.layout.size)),
                KernelKind::MemWrite { streams } => Box::new(MemWriteProc::new(&k.name, streams, &g.layout)),
                KernelKind::SmartCache { spec, input, outputs } => {
                    Box::new(SmartCacheProc::new(&k.name, spec, *input, outputs))
                }
            });
        }
        let mut ctx = Ctx { channels: &mut channels, mem: &mut self.mem, progress: &mut progress };
        self.sched.run(&mut procs, &mut ctx)?;
        for (k, p) in kernels.iter().zip(&procs) {
            let e = self.report.per_kernel.entry(k.name.clone()).or_default();
            e.counters.add(p.counters());
            e.launches += 1;
            if let (KernelKind::Compute(c), Some(v)) = (&k.kind, p.result()) {
                let (acc, _) = c.fold.as_ref().expect("only folds return values");
                s.set_scalar(acc, v)?;
            }
        }
        written.iter().for_each(|a| self.mem.commit(a));
        Ok(())
    }

    fn step<'p>(&mut self, s: &mut Session<'p>, graph: &'p PipelineGraph) -> Result<(), SimError> {
        let t = &graph.transfers;
        self.push(s, &t.per_step_to_device)?;
        for op in &graph.step {
            match op {
                HostOp::Host { stmts, .. } => {
                    self.pull(s, &t.per_step_to_host)?;
                    s.exec(stmts)?;
                    self.push(s, &t.per_step_to_device)?;
                }
                HostOp::Launch(names) => self.launch(s, names)?,
            }
        }
        self.pull(s, &t.per_step_to_host)
    }
}

/// Runs the program with its time step executed by the pipeline.
/// `opts.eval` must carry the same PARAMETER overrides the graph was
/// lowered with.
pub fn simulate<'p>(
    prog: &'p ProgramAst,
    ir: &'p FunctionalIr,
    graph: &'p PipelineGraph,
    opts: &'p SimOptions,
) -> Result<SimResult, SimError> {
    let mut s = open_session(prog, ir, &opts.eval)?;
    for (a, init) in &opts.initial {
        let (data, bounds) = s.array_mut(a).ok_or_else(|| SimError::Missing(a.clone()))?;
        if init.len() != data.len() {
            return Err(SimError::ShapeMismatch { array: a.clone(), expected: data.len(), found: init.len() });
        }
        let layout = Layout::new(bounds);
        for (p, &c) in column_major_map(&layout).iter().enumerate() {
            data[c] = init[p].convert(data[c].base_type()).map_err(|source| SimError::Value { kernel: a.clone(), source })?;
        }
    }
    for (name, v) in &opts.scalars {
        let ty = s.scalar(name).ok_or_else(|| SimError::Missing(name.clone()))?.base_type();
        let v = v.convert(ty).map_err(|source| SimError::Value { kernel: name.clone(), source })?;
        s.set_scalar(name, v)?;
    }
    let mut mem = Memory::default();
    for (a, ty) in &graph.arrays {
        mem.insert(a, vec![Value::zero(*ty); graph.layout.size]);
    }
    let mut report = SimReport::new(graph.variant, opts.schedule);
    for k in &graph.kernels {
        report.per_kernel.entry(k.name.clone()).or_default();
    }
    let mut dev = Device {
        graph,
        mem,
        cm: column_major_map(&graph.layout),
        sched: Scheduler::new(opts.schedule, opts.max_steps),
        report,
    };
    let t = &graph.transfers;
    dev.push(&mut s, &t.once_to_device)?;
    match &graph.time_loop {
        Some(tl) => {
            let lo = s.eval(&tl.start)?.as_i32();
            let hi = s.eval(&tl.end)?.as_i32();
            s.set_scalar(&tl.var, Value::Int(lo))?;
            let mut n = lo;
            while n <= hi {
                dev.step(&mut s, graph)?;
                dev.report.time_steps += 1;
                n += 1;
                s.set_scalar(&tl.var, Value::Int(n))?;
            }
        }
        None => {
            dev.step(&mut s, graph)?;
            dev.report.time_steps += 1;
        }
    }
    dev.pull(&mut s, &t.once_to_host)?;
    s.exec(&ir.epilogue)?;
    let mut report = dev.report;
    report.scheduler_steps = dev.sched.steps;
    report.totals = report.per_kernel.values().fold(Counters::default(), |mut acc, k| {
        acc.add(&k.counters);
        acc
    });
    Ok(SimResult { host: s.finish(), device: dev.mem.into_fronts(), report })
}
