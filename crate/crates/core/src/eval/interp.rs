use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use super::value::{self, Value, ValueError};
use crate::frontend::link::Symbol;
use crate::frontend::{BaseType, Expr, ProgramAst, SourceUnit, Stmt, StmtKind, UnitKind};

#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Replaces the value of PARAMETER constants with these names in
    /// every unit (used to rescale `nx`, `ny`, `nt`).
    pub param_overrides: BTreeMap<String, i32>,
    pub max_steps: u64,
    /// Record per-argument read/write order.
    pub trace_args: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { param_overrides: BTreeMap::new(), max_steps: 200_000_000, trace_args: false }
    }
}

impl EvalConfig {
    pub fn with_params(pairs: &[(&str, i32)]) -> Self {
        Self { param_overrides: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(), ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{unit}: `{name}` is not defined")]
    Undefined { unit: String, name: String },
    #[error("{unit}: subscript {index:?} out of bounds for `{name}`")]
    OutOfBounds { unit: String, name: String, index: Vec<i32> },
    #[error("{unit}:{line}: {source}")]
    Value { unit: String, line: usize, source: ValueError },
    #[error("{unit}: {message}")]
    Invalid { unit: String, message: String },
    #[error("step limit of {0} statements exceeded")]
    StepLimit(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArrayValue {
    pub ty: BaseType,
    pub bounds: Vec<(i32, i32)>,
    /// Column-major, as in Fortran.
    pub data: Vec<Value>,
}

impl ArrayValue {
    /// Element order with the last subscript varying fastest.
    pub fn row_major(&self) -> Vec<Value> {
        if self.bounds.len() != 2 {
            return self.data.clone();
        }
        let ext0 = (self.bounds[0].1 - self.bounds[0].0 + 1) as usize;
        let ext1 = (self.bounds[1].1 - self.bounds[1].0 + 1) as usize;
        let mut out = Vec::with_capacity(self.data.len());
        for a in 0..ext0 {
            for b in 0..ext1 {
                out.push(self.data[a + b * ext0]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum VarValue {
    Scalar(Value),
    Array(ArrayValue),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArgTrace {
    pub unit: String,
    pub arg: String,
    pub read: bool,
    pub written: bool,
    /// Some element was read before this activation wrote it.
    pub read_before_write: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProgramOutput {
    /// Final values of the program unit's variables.
    pub vars: BTreeMap<String, VarValue>,
    pub steps: u64,
    pub arg_traces: Vec<ArgTrace>,
}

impl ProgramOutput {
    pub fn scalar(&self, name: &str) -> Option<Value> {
        match self.vars.get(name)? {
            VarValue::Scalar(v) => Some(*v),
            VarValue::Array(_) => None,
        }
    }

    pub fn array(&self, name: &str) -> Option<&ArrayValue> {
        match self.vars.get(name)? {
            VarValue::Array(a) => Some(a),
            VarValue::Scalar(_) => None,
        }
    }

    pub fn field_f32(&self, name: &str) -> Option<Vec<f32>> {
        Some(self.array(name)?.row_major().into_iter().map(Value::as_f32).collect())
    }

    pub fn field_i32(&self, name: &str) -> Option<Vec<i32>> {
        Some(self.array(name)?.row_major().into_iter().map(Value::as_i32).collect())
    }
}

#[derive(Debug, Clone)]
struct Binding {
    store: usize,
    offset: usize,
    ty: BaseType,
    bounds: Vec<(i32, i32)>,
    constant: bool,
}

impl Binding {
    fn len(&self) -> usize {
        self.bounds.iter().map(|(lo, hi)| (hi - lo + 1).max(0) as usize).product()
    }
}

struct Frame<'p> {
    unit: &'p SourceUnit,
    vars: HashMap<String, Binding>,
    line: usize,
}

struct TracedArg {
    name: String,
    store: usize,
    offset: usize,
    len: usize,
    written_at: HashSet<usize>,
    read: bool,
    written: bool,
    rbw: bool,
}

enum Flow {
    Normal,
    Return,
}

struct Interp<'p> {
    prog: &'p ProgramAst,
    cfg: &'p EvalConfig,
    stores: Vec<Vec<Value>>,
    commons: HashMap<String, Vec<usize>>,
    steps: u64,
    trace_stack: Vec<(String, Vec<TracedArg>)>,
    traces: BTreeMap<(String, String), ArgTrace>,
}

/// Runs the program unit to completion.
pub fn run_program(prog: &ProgramAst, cfg: &EvalConfig) -> Result<ProgramOutput, EvalError> {
    let main = prog.main();
    let mut s = Session::new(prog, cfg)?;
    s.exec(&main.body)?;
    Ok(s.finish())
}

/// The program unit's frame, kept open so that statements and direct
/// array updates can be interleaved.
pub struct Session<'p> {
    it: Interp<'p>,
    frame: Frame<'p>,
}

impl<'p> Session<'p> {
    pub fn new(prog: &'p ProgramAst, cfg: &'p EvalConfig) -> Result<Self, EvalError> {
        let mut it = Interp {
            prog,
            cfg,
            stores: Vec::new(),
            commons: HashMap::new(),
            steps: 0,
            trace_stack: Vec::new(),
            traces: BTreeMap::new(),
        };
        let frame = it.enter(prog.main(), &[])?;
        Ok(Session { it, frame })
    }

    /// Adds a scalar variable unless the name is already bound.
    pub fn declare(&mut self, name: &str, ty: BaseType) {
        if !self.frame.vars.contains_key(name) {
            let store = self.it.alloc(ty, 1);
            self.frame.vars.insert(name.to_string(), Binding { store, offset: 0, ty, bounds: vec![], constant: false });
        }
    }

    pub fn exec(&mut self, stmts: &'p [Stmt]) -> Result<(), EvalError> {
        self.it.exec_block(&mut self.frame, stmts)?;
        Ok(())
    }

    pub fn eval(&mut self, e: &Expr) -> Result<Value, EvalError> {
        self.it.eval(&mut self.frame, e)
    }

    pub fn set_scalar(&mut self, name: &str, v: Value) -> Result<(), EvalError> {
        self.it.write(&mut self.frame, name, &[], v)
    }

    pub fn scalar(&self, name: &str) -> Option<Value> {
        let b = self.frame.vars.get(name)?;
        b.bounds.is_empty().then(|| self.it.stores[b.store][b.offset])
    }

    /// Column-major storage and bounds of an array.
    pub fn array_mut(&mut self, name: &str) -> Option<(&mut [Value], Vec<(i32, i32)>)> {
        let b = self.frame.vars.get(name)?;
        if b.bounds.is_empty() {
            return None;
        }
        let (off, len, bounds) = (b.offset, b.len(), b.bounds.clone());
        Some((&mut self.it.stores[b.store][off..off + len], bounds))
    }

    pub fn tick(&mut self) -> Result<(), EvalError> {
        self.it.tick()
    }

    pub fn finish(self) -> ProgramOutput {
        let mut vars = BTreeMap::new();
        for (name, b) in &self.frame.vars {
            let data = self.it.stores[b.store][b.offset..b.offset + b.len()].to_vec();
            let v = if b.bounds.is_empty() {
                VarValue::Scalar(data[0])
            } else {
                VarValue::Array(ArrayValue { ty: b.ty, bounds: b.bounds.clone(), data })
            };
            vars.insert(name.clone(), v);
        }
        ProgramOutput { vars, steps: self.it.steps, arg_traces: self.it.traces.into_values().collect() }
    }
}

/// What a caller hands to a callee for one dummy argument.
enum Actual {
    Ref { store: usize, offset: usize },
    Temp(Value),
}

impl<'p> Interp<'p> {
    fn alloc(&mut self, ty: BaseType, len: usize) -> usize {
        self.stores.push(vec![Value::zero(ty); len]);
        self.stores.len() - 1
    }

    fn err_invalid(unit: &SourceUnit, message: impl Into<String>) -> EvalError {
        EvalError::Invalid { unit: unit.name.clone(), message: message.into() }
    }

    fn enter(&mut self, unit: &'p SourceUnit, actuals: &[Actual]) -> Result<Frame<'p>, EvalError> {
        let table = self.prog.symbols_of(&unit.name);
        let mut frame = Frame { unit, vars: HashMap::new(), line: unit.span.line };
        if actuals.len() != unit.args.len() {
            return Err(Self::err_invalid(unit, "wrong number of arguments"));
        }
        // Constants first; they may size arrays.
        let params: Vec<&Symbol> = table.symbols.iter().filter(|s| s.parameter.is_some()).collect();
        let mut pending = params.clone();
        while !pending.is_empty() {
            let before = pending.len();
            let mut rest = Vec::new();
            for s in pending {
                let v = match self.cfg.param_overrides.get(&s.name) {
                    Some(&o) => Ok(Value::Int(o)),
                    None => self.eval(&mut frame, s.parameter.as_ref().expect("parameter")),
                };
                match v {
                    Ok(v) => {
                        let v = v.convert(s.ty).map_err(|e| self.value_err(&frame, e))?;
                        let store = self.alloc(s.ty, 1);
                        self.stores[store][0] = v;
                        frame.vars.insert(
                            s.name.clone(),
                            Binding { store, offset: 0, ty: s.ty, bounds: vec![], constant: true },
                        );
                    }
                    Err(EvalError::Undefined { .. }) => rest.push(s),
                    Err(e) => return Err(e),
                }
            }
            if rest.len() == before {
                return Err(Self::err_invalid(unit, format!("cannot evaluate PARAMETER `{}`", rest[0].name)));
            }
            pending = rest;
        }
        // Scalar dummies, then everything else.
        let mut order: Vec<&Symbol> = table.symbols.iter().filter(|s| s.parameter.is_none()).collect();
        order.sort_by_key(|s| (!(s.dummy.is_some() && !s.is_array()), s.dummy.is_none()));
        for s in order {
            let mut bounds = Vec::new();
            for d in &s.dims {
                let lo = match &d.lower {
                    Some(l) => self.eval(&mut frame, l)?.as_i32(),
                    None => 1,
                };
                let hi = self.eval(&mut frame, &d.upper)?.as_i32();
                bounds.push((lo, hi));
            }
            let len: usize = bounds.iter().map(|(lo, hi)| (hi - lo + 1).max(0) as usize).product();
            let (store, offset) = if let Some(i) = s.dummy {
                match &actuals[i] {
                    Actual::Ref { store, offset } => {
                        if offset + len > self.stores[*store].len() {
                            return Err(Self::err_invalid(unit, format!("actual argument for `{}` is too small", s.name)));
                        }
                        (*store, *offset)
                    }
                    Actual::Temp(v) => {
                        let store = self.alloc(s.ty, len.max(1));
                        self.stores[store][0] = v.convert(s.ty).map_err(|e| self.value_err(&frame, e))?;
                        (store, 0)
                    }
                }
            } else if let Some((block, pos)) = &s.common {
                let slots = self.commons.entry(block.clone()).or_default();
                while slots.len() <= *pos {
                    slots.push(usize::MAX);
                }
                let store = if slots[*pos] == usize::MAX {
                    let id = self.stores.len();
                    self.stores.push(vec![Value::zero(s.ty); len.max(1)]);
                    self.commons.get_mut(block).expect("block")[*pos] = id;
                    id
                } else {
                    slots[*pos]
                };
                if self.stores[store].len() < len {
                    return Err(Self::err_invalid(unit, format!("common /{block}/ member `{}` is larger than elsewhere", s.name)));
                }
                (store, 0)
            } else {
                (self.alloc(s.ty, len.max(1)), 0)
            };
            frame.vars.insert(s.name.clone(), Binding { store, offset, ty: s.ty, bounds, constant: false });
        }
        if self.cfg.trace_args && unit.kind != UnitKind::Program {
            let args = unit
                .args
                .iter()
                .map(|a| {
                    let b = &frame.vars[a];
                    TracedArg {
                        name: a.clone(),
                        store: b.store,
                        offset: b.offset,
                        len: b.len().max(1),
                        written_at: HashSet::new(),
                        read: false,
                        written: false,
                        rbw: false,
                    }
                })
                .collect();
            self.trace_stack.push((unit.name.clone(), args));
        }
        Ok(frame)
    }

    fn leave(&mut self, unit: &SourceUnit) {
        if !self.cfg.trace_args || unit.kind == UnitKind::Program {
            return;
        }
        let (name, args) = self.trace_stack.pop().expect("trace frame");
        for a in args {
            let t = self.traces.entry((name.clone(), a.name.clone())).or_insert(ArgTrace {
                unit: name.clone(),
                arg: a.name.clone(),
                read: false,
                written: false,
                read_before_write: false,
            });
            t.read |= a.read;
            t.written |= a.written;
            t.read_before_write |= a.rbw;
        }
    }

    fn note(&mut self, store: usize, at: usize, write: bool) {
        for (_, args) in self.trace_stack.iter_mut() {
            for a in args.iter_mut() {
                if a.store == store && at >= a.offset && at < a.offset + a.len {
                    if write {
                        a.written = true;
                        a.written_at.insert(at);
                    } else {
                        a.read = true;
                        if !a.written_at.contains(&at) {
                            a.rbw = true;
                        }
                    }
                }
            }
        }
    }

    fn value_err(&self, frame: &Frame, source: ValueError) -> EvalError {
        EvalError::Value { unit: frame.unit.name.clone(), line: frame.line, source }
    }

    fn locate(&mut self, frame: &mut Frame<'p>, name: &str, idx: &[Expr]) -> Result<(usize, usize, BaseType), EvalError> {
        let mut subs = Vec::with_capacity(idx.len());
        for e in idx {
            subs.push(self.eval(frame, e)?.as_i32());
        }
        let b = frame
            .vars
            .get(name)
            .ok_or_else(|| EvalError::Undefined { unit: frame.unit.name.clone(), name: name.to_string() })?;
        if subs.len() != b.bounds.len() {
            return Err(Self::err_invalid(frame.unit, format!("`{name}` used with the wrong rank")));
        }
        let mut off = 0usize;
        let mut stride = 1usize;
        for (&s, &(lo, hi)) in subs.iter().zip(&b.bounds) {
            if s < lo || s > hi {
                return Err(EvalError::OutOfBounds { unit: frame.unit.name.clone(), name: name.to_string(), index: subs });
            }
            off += (s - lo) as usize * stride;
            stride *= (hi - lo + 1) as usize;
        }
        Ok((b.store, b.offset + off, b.ty))
    }

    fn read(&mut self, frame: &mut Frame<'p>, name: &str, idx: &[Expr]) -> Result<Value, EvalError> {
        let (store, at, _) = self.locate(frame, name, idx)?;
        if self.cfg.trace_args {
            self.note(store, at, false);
        }
        Ok(self.stores[store][at])
    }

    fn write(&mut self, frame: &mut Frame<'p>, name: &str, idx: &[Expr], v: Value) -> Result<(), EvalError> {
        if frame.vars.get(name).is_some_and(|b| b.constant) {
            return Err(Self::err_invalid(frame.unit, format!("assignment to PARAMETER `{name}`")));
        }
        let (store, at, ty) = self.locate(frame, name, idx)?;
        let v = v.convert(ty).map_err(|e| self.value_err(frame, e))?;
        if self.cfg.trace_args {
            self.note(store, at, true);
        }
        self.stores[store][at] = v;
        Ok(())
    }

    fn eval(&mut self, frame: &mut Frame<'p>, e: &Expr) -> Result<Value, EvalError> {
        Ok(match e {
            Expr::Int(i) => Value::Int(*i),
            Expr::Real(r) => Value::Real(*r),
            Expr::Logical(b) => Value::Logical(*b),
            Expr::Var(n) => self.read(frame, n, &[])?,
            Expr::ArrayRef(n, xs) => self.read(frame, n, xs)?,
            Expr::Unary(op, x) => {
                let v = self.eval(frame, x)?;
                value::unary(*op, v).map_err(|err| self.value_err(frame, err))?
            }
            Expr::Binary(op, a, b) => {
                let x = self.eval(frame, a)?;
                let y = self.eval(frame, b)?;
                value::binary(*op, x, y).map_err(|err| self.value_err(frame, err))?
            }
            Expr::Intrinsic(f, xs) => {
                let mut args = Vec::with_capacity(xs.len());
                for x in xs {
                    args.push(self.eval(frame, x)?);
                }
                value::intrinsic(*f, &args).map_err(|err| self.value_err(frame, err))?
            }
            Expr::Call(name, xs) => {
                let callee = self.unit(frame, name)?;
                let actuals = self.actuals(frame, xs)?;
                let mut inner = self.enter(callee, &actuals)?;
                self.exec_block(&mut inner, &callee.body)?;
                self.leave(callee);
                let b = inner.vars.get(name).ok_or_else(|| Self::err_invalid(callee, "function result never defined"))?;
                self.stores[b.store][b.offset]
            }
        })
    }

    fn unit(&self, frame: &Frame, name: &str) -> Result<&'p SourceUnit, EvalError> {
        self.prog
            .unit(name)
            .ok_or_else(|| EvalError::Undefined { unit: frame.unit.name.clone(), name: name.to_string() })
    }

    fn actuals(&mut self, frame: &mut Frame<'p>, xs: &[Expr]) -> Result<Vec<Actual>, EvalError> {
        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            let a = match x {
                Expr::Var(n) if frame.vars.get(n).is_some_and(|b| !b.constant) => {
                    let b = &frame.vars[n];
                    Actual::Ref { store: b.store, offset: b.offset }
                }
                Expr::ArrayRef(n, idx) => {
                    let (store, offset, _) = self.locate(frame, n, idx)?;
                    Actual::Ref { store, offset }
                }
                _ => Actual::Temp(self.eval(frame, x)?),
            };
            out.push(a);
        }
        Ok(out)
    }

    fn tick(&mut self) -> Result<(), EvalError> {
        self.steps += 1;
        if self.steps > self.cfg.max_steps {
            return Err(EvalError::StepLimit(self.cfg.max_steps));
        }
        Ok(())
    }

    fn exec_block(&mut self, frame: &mut Frame<'p>, body: &'p [Stmt]) -> Result<Flow, EvalError> {
        for s in body {
            if let Flow::Return = self.exec(frame, s)? {
                return Ok(Flow::Return);
            }
        }
        Ok(Flow::Normal)
    }

    fn exec(&mut self, frame: &mut Frame<'p>, s: &'p Stmt) -> Result<Flow, EvalError> {
        self.tick()?;
        frame.line = s.span.line;
        match &s.kind {
            StmtKind::Assign { target, value } => {
                let v = self.eval(frame, value)?;
                self.write(frame, &target.name, &target.indices, v)?;
            }
            StmtKind::Do(d) => {
                let start = self.eval(frame, &d.start)?.as_i32();
                let end = self.eval(frame, &d.end)?.as_i32();
                let step = match &d.step {
                    Some(st) => self.eval(frame, st)?.as_i32(),
                    None => 1,
                };
                if step == 0 {
                    return Err(Self::err_invalid(frame.unit, "DO step of zero"));
                }
                let trips = ((end as i64 - start as i64 + step as i64) / step as i64).max(0);
                let mut i = start;
                self.write(frame, &d.var, &[], Value::Int(i))?;
                for _ in 0..trips {
                    if let Flow::Return = self.exec_block(frame, &d.body)? {
                        return Ok(Flow::Return);
                    }
                    i = i.wrapping_add(step);
                    self.write(frame, &d.var, &[], Value::Int(i))?;
                }
            }
            StmtKind::If { arms, otherwise } => {
                for (c, body) in arms {
                    let v = self.eval(frame, c)?;
                    if v.as_bool().map_err(|e| self.value_err(frame, e))? {
                        return self.exec_block(frame, body);
                    }
                }
                if let Some(body) = otherwise {
                    return self.exec_block(frame, body);
                }
            }
            StmtKind::Call { name, args } => {
                let callee = self.unit(frame, name)?;
                let actuals = self.actuals(frame, args)?;
                let mut inner = self.enter(callee, &actuals)?;
                self.exec_block(&mut inner, &callee.body)?;
                self.leave(callee);
            }
            StmtKind::Continue => {}
            StmtKind::Return => return Ok(Flow::Return),
        }
        Ok(Flow::Normal)
    }
}
