//! IR to pipeline graph, for each architecture variant.

use std::collections::{BTreeMap, BTreeSet};

use super::graph::*;
use super::resolve::{resolve_bounds, resolve_constants};
use super::transfer::minimize_transfers;
use super::{LowerError, LowerOptions};
use crate::analysis::{format_offsets, FunctionalIr, Node, NodeKind};
use crate::frontend::BaseType;

/// A Map or Fold node with resolved geometry.
struct Unit<'a> {
    node: &'a Node,
    domain: Domain,
    outputs: Vec<String>,
}

impl Unit<'_> {
    fn name(&self) -> &str {
        &self.node.name
    }

    fn elem(&self) -> &crate::analysis::ElemFn {
        match &self.node.kind {
            NodeKind::Map(m) => &m.elem,
            NodeKind::Fold(f) => &f.elem,
            NodeKind::Seq(_) => unreachable!("units are maps and folds"),
        }
    }
}

enum Piece<'a> {
    Host(&'a Node),
    Group(Vec<Unit<'a>>),
}

struct Builder<'o> {
    opts: &'o LowerOptions,
    layout: Layout,
    arrays: BTreeMap<String, BaseType>,
    kernels: Vec<Kernel>,
    channels: Vec<ChannelEdge>,
}

impl Builder<'_> {
    fn channel(&mut self, base: String, producer: &str, consumer: &str, elem_type: BaseType) -> usize {
        let mut name = base.clone();
        let mut i = 1;
        while self.channels.iter().any(|c| c.name == name) {
            i += 1;
            name = format!("{base}_{i}");
        }
        self.channels.push(ChannelEdge {
            name,
            producer: producer.to_string(),
            consumer: consumer.to_string(),
            capacity: self.opts.capacity,
            elem_type,
        });
        self.channels.len() - 1
    }

    fn ty(&self, a: &str) -> BaseType {
        self.arrays[a]
    }

    /// Sizes the channels created since `first`: a consumer that lags
    /// its producer by L elements needs room for L of them.
    fn balance(&mut self, first_kernel: usize) {
        let mut lat: BTreeMap<String, i64> = BTreeMap::new();
        let ks = &self.kernels[first_kernel..];
        for _ in 0..=ks.len() {
            let mut changed = false;
            for k in ks {
                let from_ch = |c: &usize| lat.get(&self.channels[*c].producer).copied().unwrap_or(0);
                let l = match &k.kind {
                    KernelKind::MemRead { .. } => 0,
                    KernelKind::SmartCache { spec, input, .. } => from_ch(input) + spec.mp_off,
                    KernelKind::MemWrite { streams } => streams.iter().map(|s| from_ch(&s.1)).max().unwrap_or(0),
                    KernelKind::Compute(c) => c
                        .sources
                        .iter()
                        .map(|s| match s {
                            Source::Channel { channel } => from_ch(channel),
                            Source::Mem { after: Some(p), offset, .. } => {
                                lat.get(p).copied().unwrap_or(0) + offset.max(&0)
                            }
                            Source::Mem { .. } => 0,
                        })
                        .max()
                        .unwrap_or(0),
                };
                if lat.insert(k.name.clone(), l) != Some(l) {
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for ch in self.channels.iter_mut() {
            if let (Some(p), Some(c)) = (lat.get(&ch.producer), lat.get(&ch.consumer)) {
                let need = (c - p + 2).max(1) as usize;
                ch.capacity = ch.capacity.max(need);
            }
        }
    }

    fn compute(&self, u: &Unit, sources: Vec<Source>, sinks: Vec<Vec<Sink>>, full_stream: bool) -> Kernel {
        let (fold, nest) = match &u.node.kind {
            NodeKind::Map(m) => (None, &m.nest),
            NodeKind::Fold(f) => (Some((f.acc.clone(), f.op)), &f.nest),
            NodeKind::Seq(_) => unreachable!(),
        };
        let elem = u.elem().clone();
        Kernel {
            name: u.name().to_string(),
            params: elem.params.clone(),
            domain: u.domain.clone(),
            kind: KernelKind::Compute(ComputeKernel {
                node: u.name().to_string(),
                fold,
                nest_vars: nest.vars.clone(),
                body: nest.body.clone(),
                sources,
                sinks,
                full_stream,
                elem,
            }),
        }
    }
}

/// Arrays whose contents must live in global memory between kernels:
/// read before written within a step, or read by the host.
fn persistent_arrays(ir: &FunctionalIr, pieces: &[Piece]) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = ir.host.reads_inside.union(&ir.host.reads_after).cloned().collect();
    let mut written = BTreeSet::new();
    for p in pieces {
        match p {
            Piece::Host(n) => written.extend(n.writes()),
            Piece::Group(units) => {
                for u in units {
                    for (a, _) in &u.elem().slots {
                        if !written.contains(a) {
                            out.insert(a.clone());
                        }
                    }
                    written.extend(u.outputs.iter().cloned());
                }
            }
        }
    }
    out
}

pub fn lower(ir: &FunctionalIr, variant: Variant, opts: &LowerOptions) -> Result<PipelineGraph, LowerError> {
    let env = resolve_constants(ir, &opts.params);
    let mut arrays = BTreeMap::new();
    for n in &ir.nodes {
        if matches!(n.kind, NodeKind::Seq(_)) {
            continue;
        }
        for a in n.inputs().iter().map(|s| &s.array).chain(n.as_map().map(|m| &m.outputs).into_iter().flatten()) {
            arrays.insert(a.clone(), ir.arrays[a].ty);
        }
    }
    let mut shape: Option<Vec<(i32, i32)>> = None;
    for a in arrays.keys() {
        let b = resolve_bounds(&ir.arrays[a].bounds, &env)
            .ok_or_else(|| LowerError::Unsupported(format!("shape of {a} is not constant")))?;
        match &shape {
            None => shape = Some(b),
            Some(s) if *s != b => return Err(LowerError::ShapeMismatch { array: a.clone() }),
            Some(_) => {}
        }
    }
    let layout = Layout::new(shape.unwrap_or_default());
    let extents: Vec<i32> = layout.bounds.iter().map(|(lo, hi)| hi - lo + 1).collect();

    let mut pieces: Vec<Piece> = Vec::new();
    for n in &ir.nodes {
        let nest = match &n.kind {
            NodeKind::Seq(_) => {
                pieces.push(Piece::Host(n));
                continue;
            }
            _ => n.nest().expect("map or fold"),
        };
        let bounds = resolve_bounds(&nest.bounds, &env)
            .ok_or_else(|| LowerError::Unsupported(format!("loop bounds of {} are not constant", n.name)))?;
        if bounds.len() != layout.bounds.len() {
            return Err(LowerError::ShapeMismatch { array: n.name.clone() });
        }
        let domain = Domain { bounds };
        for s in n.inputs() {
            for o in &s.offsets {
                if o.iter().zip(&extents).skip(1).any(|(d, e)| d.abs() >= *e) {
                    return Err(LowerError::NonLinearizableStencil { array: s.array.clone(), offsets: format_offsets(o) });
                }
                let inside = domain.is_empty()
                    || domain.bounds.iter().zip(o).zip(&layout.bounds).all(|(((lo, hi), d), (alo, ahi))| {
                        lo + d >= *alo && hi + d <= *ahi
                    });
                if !inside {
                    return Err(LowerError::OutOfBounds { node: n.name.clone(), array: s.array.clone() });
                }
            }
        }
        let outputs = n.as_map().map(|m| m.outputs.clone()).unwrap_or_default();
        let unit = Unit { node: n, domain, outputs };
        match pieces.last_mut() {
            // Two writers of one array in a group would race on its store.
            Some(Piece::Group(g))
                if variant != Variant::Baseline
                    && !g.iter().any(|x| x.outputs.iter().any(|a| unit.outputs.contains(a))) =>
            {
                g.push(unit)
            }
            _ => pieces.push(Piece::Group(vec![unit])),
        }
    }

    let persistent = persistent_arrays(ir, &pieces);
    // Per group: what the rest of the step reads, so it must be stored.
    let group_reads: Vec<BTreeSet<String>> = pieces
        .iter()
        .map(|p| match p {
            Piece::Host(n) => n.reads(),
            Piece::Group(units) => units.iter().flat_map(|u| u.elem().slots.iter().map(|(a, _)| a.clone())).collect(),
        })
        .collect();
    let mut b = Builder { opts, layout, arrays, kernels: Vec::new(), channels: Vec::new() };
    let mut step = Vec::new();
    let groups = pieces.iter().filter(|p| matches!(p, Piece::Group(_))).count();
    let mut gi = 0;
    for (pi, p) in pieces.iter().enumerate() {
        let mut keep = persistent.clone();
        for (qi, r) in group_reads.iter().enumerate() {
            if qi != pi {
                keep.extend(r.iter().cloned());
            }
        }
        match p {
            Piece::Host(n) => {
                let NodeKind::Seq(s) = &n.kind else { unreachable!() };
                step.push(HostOp::Host { node: n.name.clone(), stmts: s.stmts.clone() });
            }
            Piece::Group(units) => {
                gi += 1;
                let suffix = if groups > 1 { format!("_{gi}") } else { String::new() };
                let first = b.kernels.len();
                match variant {
                    Variant::Baseline | Variant::Channelized => lower_memory_group(&mut b, units, &keep, variant),
                    Variant::SmartCache => lower_smart_group(&mut b, units, &keep, &suffix)?,
                }
                b.balance(first);
                step.push(HostOp::Launch(b.kernels[first..].iter().map(|k| k.name.clone()).collect()));
            }
        }
    }
    let mut recirculation = BTreeMap::new();
    for n in &ir.nodes {
        for w in n.writes() {
            if persistent.contains(&w) && b.arrays.contains_key(&w) {
                recirculation.insert(w, "global".to_string());
            }
        }
    }
    let transfers = minimize_transfers(ir, &b.arrays);
    Ok(PipelineGraph {
        variant,
        layout: b.layout,
        kernels: b.kernels,
        channels: b.channels,
        arrays: b.arrays,
        scalars: ir.scalars.clone(),
        step,
        time_loop: ir.time_loop.as_ref().map(|t| TimeLoopPlan { var: t.var.clone(), start: t.start.clone(), end: t.end.clone() }),
        transfers,
        recirculation,
    })
}

/// Baseline and Channelized: every kernel walks its own domain; in the
/// channelized form same-point reads of a value produced earlier in the
/// group arrive over a channel, everything else goes through memory.
fn lower_memory_group(b: &mut Builder, units: &[Unit], persistent: &BTreeSet<String>, variant: Variant) {
    let mut sinks: Vec<Vec<Vec<Sink>>> = units.iter().map(|u| vec![Vec::new(); u.outputs.len()]).collect();
    let mut all_sources = Vec::new();
    let mut mem_read: BTreeSet<String> = BTreeSet::new();
    for (ci, c) in units.iter().enumerate() {
        let mut sources = Vec::new();
        for (a, off) in &c.elem().slots {
            let producer = (0..ci).rev().find(|&pi| units[pi].outputs.contains(a));
            let zero = off.iter().all(|&d| d == 0);
            match producer {
                Some(pi) if variant == Variant::Channelized && zero && units[pi].domain == c.domain => {
                    let p = &units[pi];
                    let ty = b.ty(a);
                    let ch = b.channel(format!("{}_{}_{a}", p.name(), c.name()), p.name(), c.name(), ty);
                    let oi = p.outputs.iter().position(|x| x == a).expect("output");
                    sinks[pi][oi].push(Sink::Channel { channel: ch });
                    sources.push(Source::Channel { channel: ch });
                }
                _ => {
                    mem_read.insert(a.clone());
                    let after = match variant {
                        Variant::Channelized => producer.map(|pi| units[pi].name().to_string()),
                        _ => None,
                    };
                    sources.push(Source::Mem { array: a.clone(), offset: b.layout.linear_offset(off), after });
                }
            }
        }
        all_sources.push(sources);
    }
    for (ui, u) in units.iter().enumerate() {
        for (oi, a) in u.outputs.iter().enumerate() {
            if variant == Variant::Baseline || persistent.contains(a) || mem_read.contains(a) {
                sinks[ui][oi].push(Sink::Mem { array: a.clone() });
            }
        }
    }
    for ((u, sources), s) in units.iter().zip(all_sources).zip(sinks) {
        let k = b.compute(u, sources, s, false);
        b.kernels.push(k);
    }
}

fn offset_label(o: i64) -> String {
    match o {
        0 => "o0".into(),
        o if o > 0 => format!("op{o}"),
        o => format!("om{}", -o),
    }
}

/// SmartCache: one mem_read kernel feeds every array the group reads
/// from memory, smart caches turn each stenciled stream into one channel
/// per offset, compute kernels only touch channels, and one mem_write
/// kernel stores what later steps or the host need.
fn lower_smart_group(
    b: &mut Builder,
    units: &[Unit],
    persistent: &BTreeSet<String>,
    suffix: &str,
) -> Result<(), LowerError> {
    let reader = format!("mem_read{suffix}");
    let writer = format!("mem_write{suffix}");
    let size = b.layout.size;
    // Consumers of each stream: (array, producer unit or None for memory).
    let mut fan: BTreeMap<(String, Option<usize>), Vec<usize>> = BTreeMap::new();
    let mut head_order: Vec<String> = Vec::new();
    let mut kernels_mid: Vec<Kernel> = Vec::new();
    let mut sinks: Vec<Vec<Vec<Sink>>> = units.iter().map(|u| vec![Vec::new(); u.outputs.len()]).collect();
    let mut sources_of: Vec<Vec<Source>> = Vec::new();
    for (ci, c) in units.iter().enumerate() {
        let streams = c.elem().streams();
        let stencil = streams.iter().any(|(_, offs)| offs.iter().any(|o| o.iter().any(|&d| d != 0)));
        let layout = b.layout.clone();
        let lin = |offs: &Vec<Vec<i32>>| -> Vec<i64> { offs.iter().map(|o| layout.linear_offset(o)).collect() };
        let max_mp = streams.iter().map(|(_, offs)| lin(offs).into_iter().max().unwrap_or(0).max(0)).max().unwrap_or(0);
        let mut slot_channel: BTreeMap<(String, i64), usize> = BTreeMap::new();
        for (a, offs) in &streams {
            let producer = (0..ci).rev().find(|&pi| units[pi].outputs.contains(a));
            let src_name = match producer {
                Some(pi) => units[pi].name().to_string(),
                None => {
                    if !head_order.contains(a) {
                        head_order.push(a.clone());
                    }
                    reader.clone()
                }
            };
            let ty = b.ty(a);
            let linear = lin(offs);
            let into = if stencil {
                let spec = if linear.iter().any(|&o| o != 0) {
                    SmartCacheSpec::new(a.clone(), size, &linear, b.opts.policy)
                } else {
                    SmartCacheSpec::sync(a.clone(), size, max_mp)
                };
                if spec.buffer_len > b.opts.buffer_budget {
                    return Err(LowerError::BudgetExceeded { buffer_len: spec.buffer_len, budget: b.opts.buffer_budget });
                }
                let sc = format!("sc_{}_{a}", c.name());
                let input = b.channel(format!("{src_name}_{sc}"), &src_name, &sc, ty);
                let mut outs = Vec::new();
                for &o in &spec.offsets {
                    let ch = b.channel(format!("{sc}_{}", offset_label(o)), &sc, c.name(), ty);
                    slot_channel.insert((a.clone(), o), ch);
                    outs.push(ch);
                }
                kernels_mid.push(Kernel {
                    name: sc,
                    kind: KernelKind::SmartCache { spec, input, outputs: outs },
                    domain: Domain { bounds: b.layout.bounds.clone() },
                    params: vec![],
                });
                input
            } else {
                let ch = b.channel(format!("{src_name}_{}_{a}", c.name()), &src_name, c.name(), ty);
                slot_channel.insert((a.clone(), 0), ch);
                ch
            };
            match producer {
                Some(pi) => {
                    let oi = units[pi].outputs.iter().position(|x| x == a).expect("output");
                    sinks[pi][oi].push(Sink::Channel { channel: into });
                }
                None => fan.entry((a.clone(), None)).or_default().push(into),
            }
        }
        let sources = c
            .elem()
            .slots
            .iter()
            .map(|(a, off)| Source::Channel { channel: slot_channel[&(a.clone(), b.layout.linear_offset(off))] })
            .collect();
        sources_of.push(sources);
    }
    // Stores: the last writer of each array that outlives the group.
    let mut stores = Vec::new();
    for (ui, u) in units.iter().enumerate() {
        for (oi, a) in u.outputs.iter().enumerate() {
            let last = !units[ui + 1..].iter().any(|x| x.outputs.contains(a));
            if last && (persistent.contains(a) || head_order.contains(a)) {
                let ch = b.channel(format!("{}_{writer}_{a}", u.name()), u.name(), &writer, b.ty(a));
                sinks[ui][oi].push(Sink::Channel { channel: ch });
                stores.push((a.clone(), ch, u.domain.clone()));
            }
        }
    }
    let full = Domain { bounds: b.layout.bounds.clone() };
    if !head_order.is_empty() {
        let streams = head_order.iter().map(|a| (a.clone(), fan[&(a.clone(), None)].clone())).collect();
        b.kernels.push(Kernel { name: reader, kind: KernelKind::MemRead { streams }, domain: full.clone(), params: vec![] });
    }
    // Caches first, then compute kernels in IR order.
    b.kernels.extend(kernels_mid);
    for ((u, sources), s) in units.iter().zip(sources_of).zip(sinks) {
        let k = b.compute(u, sources, s, true);
        b.kernels.push(k);
    }
    if !stores.is_empty() {
        b.kernels.push(Kernel { name: writer, kind: KernelKind::MemWrite { streams: stores }, domain: full, params: vec![] });
    }
    Ok(())
}
