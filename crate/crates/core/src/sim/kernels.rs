//! Pipeline kernels as processes.

use super::channel::Pop;
use super::network::{Counters, Ctx, Process, Status};
use super::smart_cache::{SmartCacheState, Want};
use super::SimError;
use crate::analysis::ir_eval::fold_combine;
use crate::eval::Value;
use crate::pipeline::{ComputeKernel, Domain, Kernel, Layout, SmartCacheSpec, Sink, Source};

fn inside_mask(domain: &Domain, layout: &Layout) -> Vec<bool> {
    let mut m = vec![false; layout.size];
    for p in domain.positions(layout) {
        m[p] = true;
    }
    m
}

fn missing(array: &str) -> SimError {
    SimError::Missing(array.to_string())
}

pub struct ComputeProc<'g> {
    name: String,
    c: &'g ComputeKernel,
    layout: &'g Layout,
    positions: Vec<usize>,
    /// Only for full-stream kernels.
    inside: Option<Vec<bool>>,
    params: Vec<Value>,
    acc: Option<Value>,
    cur: usize,
    slot: usize,
    emitting: bool,
    out: usize,
    sink: usize,
    ins: Vec<Value>,
    outs: Vec<Value>,
    counters: Counters,
}

impl<'g> ComputeProc<'g> {
    pub fn new(k: &'g Kernel, c: &'g ComputeKernel, layout: &'g Layout, params: Vec<Value>, acc: Option<Value>) -> Self {
        let (positions, inside) = if c.full_stream {
            ((0..layout.size).collect(), Some(inside_mask(&k.domain, layout)))
        } else {
            (k.domain.positions(layout), None)
        };
        let mut counters = Counters::default();
        if acc.is_some() {
            counters.global_reads += 1;
        }
        ComputeProc {
            name: k.name.clone(),
            c,
            layout,
            positions,
            inside,
            params,
            acc,
            cur: 0,
            slot: 0,
            emitting: false,
            out: 0,
            sink: 0,
            ins: Vec::new(),
            outs: Vec::new(),
            counters,
        }
    }

    pub fn first_position(&self) -> usize {
        self.next_position(0)
    }

    fn next_position(&self, i: usize) -> usize {
        match &self.inside {
            // Full-stream kernels write nothing to memory directly.
            Some(_) => usize::MAX,
            None => self.positions.get(i).copied().unwrap_or(usize::MAX),
        }
    }

    fn finish(&mut self, ctx: &mut Ctx) -> Status {
        for s in self.c.sinks.iter().flatten() {
            if let Sink::Channel { channel } = s {
                ctx.close(*channel);
            }
        }
        if self.acc.is_some() {
            self.counters.global_writes += 1;
        }
        ctx.progress.insert(self.name.clone(), usize::MAX);
        Status::Done
    }

    fn wait(moved: bool) -> Result<Status, SimError> {
        Ok(if moved { Status::Progress } else { Status::Blocked })
    }
}

impl Process for ComputeProc<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn step(&mut self, ctx: &mut Ctx) -> Result<Status, SimError> {
        if self.cur == self.positions.len() {
            return Ok(self.finish(ctx));
        }
        let p = self.positions[self.cur];
        let inside = self.inside.as_ref().is_none_or(|m| m[p]);
        let mut moved = false;
        if !self.emitting {
            while self.slot < self.c.sources.len() {
                let v = match &self.c.sources[self.slot] {
                    Source::Mem { array, offset, after } => {
                        if !inside {
                            Value::Int(0)
                        } else {
                            let q = (p as i64 + offset) as usize;
                            let buf = match after {
                                Some(w) => {
                                    if ctx.progress.get(w).copied().unwrap_or(0) <= q {
                                        return Self::wait(moved);
                                    }
                                    ctx.mem.back(array)
                                }
                                None => ctx.mem.front(array),
                            };
                            self.counters.global_reads += 1;
                            buf.ok_or_else(|| missing(array))?[q]
                        }
                    }
                    Source::Channel { channel } => match ctx.pop(*channel, &mut self.counters) {
                        Pop::Value(v) => v,
                        Pop::Empty => return Self::wait(moved),
                        Pop::EndOfStream => {
                            return Err(SimError::UnexpectedEnd { kernel: self.name.clone(), channel: ctx.channel_name(*channel) })
                        }
                    },
                };
                self.ins.push(v);
                self.slot += 1;
                moved = true;
            }
            if inside {
                let idx = self.layout.index_of(p);
                let contrib = self
                    .c
                    .elem
                    .eval(&self.ins, &self.params, &idx, &mut self.outs)
                    .map_err(|source| SimError::Value { kernel: self.name.clone(), source })?;
                if let (Some(acc), Some(c)) = (self.acc, contrib) {
                    let op = self.c.fold.as_ref().expect("fold kernel").1;
                    let v = fold_combine(op, acc, c).map_err(|source| SimError::Value { kernel: self.name.clone(), source })?;
                    self.acc = Some(v);
                }
            } else {
                self.outs.clear();
                self.outs.extend(self.c.elem.outputs.iter().map(|(_, ty)| Value::zero(*ty)));
            }
            self.emitting = true;
            moved = true;
        }
        while self.out < self.c.sinks.len() {
            let v = self.outs[self.out];
            while self.sink < self.c.sinks[self.out].len() {
                match &self.c.sinks[self.out][self.sink] {
                    Sink::Mem { array } => {
                        if inside {
                            ctx.mem.back_mut(array).ok_or_else(|| missing(array))?[p] = v;
                            self.counters.global_writes += 1;
                        }
                    }
                    Sink::Channel { channel } => {
                        if !ctx.push(*channel, v, &mut self.counters)? {
                            return Self::wait(moved);
                        }
                    }
                }
                self.sink += 1;
                moved = true;
            }
            self.sink = 0;
            self.out += 1;
        }
        self.ins.clear();
        self.slot = 0;
        self.out = 0;
        self.emitting = false;
        self.cur += 1;
        let next = self.next_position(self.cur);
        ctx.progress.insert(self.name.clone(), next);
        Ok(Status::Progress)
    }

    fn counters(&self) -> &Counters {
        &self.counters
    }

    fn counters_mut(&mut self) -> &mut Counters {
        &mut self.counters
    }

    fn result(&self) -> Option<Value> {
        self.acc
    }
}

/// Streams whole arrays from the front buffer, position by position.
pub struct MemReadProc<'g> {
    name: String,
    streams: &'g [(String, Vec<usize>)],
    size: usize,
    cur: usize,
    stream: usize,
    fan: usize,
    held: Option<Value>,
    counters: Counters,
}

impl<'g> MemReadProc<'g> {
    pub fn new(name: &str, streams: &'g [(String, Vec<usize>)], size: usize) -> Self {
        MemReadProc { name: name.to_string(), streams, size, cur: 0, stream: 0, fan: 0, held: None, counters: Counters::default() }
    }
}

impl Process for MemReadProc<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn step(&mut self, ctx: &mut Ctx) -> Result<Status, SimError> {
        if self.cur == self.size {
            for (_, outs) in self.streams {
                outs.iter().for_each(|&c| ctx.close(c));
            }
            return Ok(Status::Done);
        }
        let mut moved = false;
        while self.stream < self.streams.len() {
            let (array, outs) = &self.streams[self.stream];
            let v = match self.held {
                Some(v) => v,
                None => {
                    let v = ctx.mem.front(array).ok_or_else(|| missing(array))?[self.cur];
                    self.counters.global_reads += 1;
                    self.held = Some(v);
                    moved = true;
                    v
                }
            };
            while self.fan < outs.len() {
                if !ctx.push(outs[self.fan], v, &mut self.counters)? {
                    return Ok(if moved { Status::Progress } else { Status::Blocked });
                }
                self.fan += 1;
                moved = true;
            }
            self.fan = 0;
            self.held = None;
            self.stream += 1;
        }
        self.stream = 0;
        self.cur += 1;
        Ok(Status::Progress)
    }

    fn counters(&self) -> &Counters {
        &self.counters
    }

    fn counters_mut(&mut self) -> &mut Counters {
        &mut self.counters
    }
}

/// Drains full-size streams into the back buffer, keeping only the
/// positions inside each array's domain.
pub struct MemWriteProc<'g> {
    name: String,
    streams: &'g [(String, usize, Domain)],
    masks: Vec<Vec<bool>>,
    size: usize,
    cur: usize,
    stream: usize,
    counters: Counters,
}

impl<'g> MemWriteProc<'g> {
    pub fn new(name: &str, streams: &'g [(String, usize, Domain)], layout: &Layout) -> Self {
        let masks = streams.iter().map(|(_, _, d)| inside_mask(d, layout)).collect();
        MemWriteProc { name: name.to_string(), streams, masks, size: layout.size, cur: 0, stream: 0, counters: Counters::default() }
    }
}

impl Process for MemWriteProc<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn step(&mut self, ctx: &mut Ctx) -> Result<Status, SimError> {
        if self.cur == self.size {
            return Ok(Status::Done);
        }
        let mut moved = false;
        while self.stream < self.streams.len() {
            let (array, ch, _) = &self.streams[self.stream];
            match ctx.pop(*ch, &mut self.counters) {
                Pop::Value(v) => {
                    if self.masks[self.stream][self.cur] {
                        ctx.mem.back_mut(array).ok_or_else(|| missing(array))?[self.cur] = v;
                        self.counters.global_writes += 1;
                    }
                }
                Pop::Empty => return Ok(if moved { Status::Progress } else { Status::Blocked }),
                Pop::EndOfStream => {
                    return Err(SimError::UnexpectedEnd { kernel: self.name.clone(), channel: ctx.channel_name(*ch) })
                }
            }
            self.stream += 1;
            moved = true;
        }
        self.stream = 0;
        self.cur += 1;
        Ok(Status::Progress)
    }

    fn counters(&self) -> &Counters {
        &self.counters
    }

    fn counters_mut(&mut self) -> &mut Counters {
        &mut self.counters
    }
}

pub struct SmartCacheProc<'g> {
    name: String,
    st: SmartCacheState,
    input: usize,
    outputs: &'g [usize],
    slot: usize,
    counters: Counters,
}

impl<'g> SmartCacheProc<'g> {
    pub fn new(name: &str, spec: &SmartCacheSpec, input: usize, outputs: &'g [usize]) -> Self {
        SmartCacheProc {
            name: name.to_string(),
            st: SmartCacheState::new(spec.clone()),
            input,
            outputs,
            slot: 0,
            counters: Counters::default(),
        }
    }
}

impl Process for SmartCacheProc<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn step(&mut self, ctx: &mut Ctx) -> Result<Status, SimError> {
        let mut moved = false;
        loop {
            match self.st.want() {
                Want::Done => {
                    self.outputs.iter().for_each(|&c| ctx.close(c));
                    return Ok(Status::Done);
                }
                Want::Consume => match ctx.pop(self.input, &mut self.counters) {
                    Pop::Value(v) => {
                        self.st.consume(v);
                        moved = true;
                    }
                    Pop::Empty => break,
                    Pop::EndOfStream => {
                        return Err(SimError::UnexpectedEnd { kernel: self.name.clone(), channel: ctx.channel_name(self.input) })
                    }
                },
                Want::Emit => {
                    while self.slot < self.outputs.len() {
                        if !ctx.push(self.outputs[self.slot], self.st.value(self.slot), &mut self.counters)? {
                            return Ok(if moved { Status::Progress } else { Status::Blocked });
                        }
                        self.slot += 1;
                        moved = true;
                    }
                    self.slot = 0;
                    self.st.advance();
                    return Ok(Status::Progress);
                }
            }
        }
        Ok(if moved { Status::Progress } else { Status::Blocked })
    }

    fn counters(&self) -> &Counters {
        &self.counters
    }

    fn counters_mut(&mut self) -> &mut Counters {
        &mut self.counters
    }
}
