//! Reference evaluation of the functional IR. Map and fold nodes run
//! through their elemental functions in canonical (ascending) order;
//! everything else goes through the statement interpreter.

use super::ir::{FoldOp, FunctionalIr, Nest, NodeKind};
use super::elemental::ElemFn;
use crate::eval::value::{self, Value};
use crate::eval::{EvalConfig, EvalError, ProgramOutput, Session};
use crate::frontend::{BinOp, Intrinsic, ProgramAst};

fn value_err(node: &str, source: value::ValueError) -> EvalError {
    EvalError::Value { unit: node.to_string(), line: 0, source }
}

/// Column-major offset of `idx` in an array with `bounds`.
fn linear(bounds: &[(i32, i32)], idx: &[i32]) -> Option<usize> {
    let mut off = 0usize;
    let mut stride = 1usize;
    for (&s, &(lo, hi)) in idx.iter().zip(bounds) {
        if s < lo || s > hi {
            return None;
        }
        off += (s - lo) as usize * stride;
        stride *= (hi - lo + 1) as usize;
    }
    Some(off)
}

pub(crate) fn fold_combine(op: FoldOp, acc: Value, c: Value) -> Result<Value, value::ValueError> {
    match op {
        FoldOp::Add => value::binary(BinOp::Add, acc, c),
        FoldOp::Mul => value::binary(BinOp::Mul, acc, c),
        FoldOp::Min => value::intrinsic(Intrinsic::Min, &[acc, c]),
        FoldOp::Max => value::intrinsic(Intrinsic::Max, &[acc, c]),
    }
}

struct Runner<'s, 'p> {
    s: &'s mut Session<'p>,
    node: &'p str,
    elem: &'p ElemFn,
    fold: Option<(String, FoldOp)>,
    ins: Vec<Value>,
    outs: Vec<Value>,
    params: Vec<Value>,
}

impl Runner<'_, '_> {
    fn element(&mut self, idx: &[i32]) -> Result<(), EvalError> {
        self.s.tick()?;
        self.ins.clear();
        for (array, offs) in &self.elem.slots {
            let at: Vec<i32> = idx.iter().zip(offs).map(|(i, o)| i + o).collect();
            let (data, bounds) = self.s.array_mut(array).ok_or_else(|| undefined(self.node, array))?;
            let p = linear(&bounds, &at).ok_or_else(|| out_of_bounds(self.node, array, at.clone()))?;
            self.ins.push(data[p]);
        }
        let contrib = self
            .elem
            .eval(&self.ins, &self.params, idx, &mut self.outs)
            .map_err(|e| value_err(self.node, e))?;
        for (i, (array, _)) in self.elem.outputs.iter().enumerate() {
            let v = self.outs[i];
            let (data, bounds) = self.s.array_mut(array).ok_or_else(|| undefined(self.node, array))?;
            let p = linear(&bounds, idx).ok_or_else(|| out_of_bounds(self.node, array, idx.to_vec()))?;
            data[p] = v;
        }
        if let (Some((acc, op)), Some(c)) = (&self.fold, contrib) {
            let a = self.s.scalar(acc).ok_or_else(|| undefined(self.node, acc))?;
            let v = fold_combine(*op, a, c).map_err(|e| value_err(self.node, e))?;
            self.s.set_scalar(acc, v)?;
        }
        Ok(())
    }

    /// DO semantics level by level, so nest variables end with the same
    /// values the loops would leave behind.
    fn level(&mut self, nest: &Nest, d: usize, idx: &mut Vec<i32>) -> Result<(), EvalError> {
        if d == nest.vars.len() {
            return self.element(idx);
        }
        let lo = self.s.eval(&nest.bounds[d].0)?.as_i32();
        let hi = self.s.eval(&nest.bounds[d].1)?.as_i32();
        let var = &nest.vars[d];
        self.s.set_scalar(var, Value::Int(lo))?;
        let mut i = lo;
        while i <= hi {
            idx.push(i);
            self.level(nest, d + 1, idx)?;
            idx.pop();
            i += 1;
            self.s.set_scalar(var, Value::Int(i))?;
        }
        Ok(())
    }
}

fn undefined(unit: &str, name: &str) -> EvalError {
    EvalError::Undefined { unit: unit.to_string(), name: name.to_string() }
}

fn out_of_bounds(unit: &str, name: &str, index: Vec<i32>) -> EvalError {
    EvalError::OutOfBounds { unit: unit.to_string(), name: name.to_string(), index }
}

fn run_step<'p>(s: &mut Session<'p>, ir: &'p FunctionalIr) -> Result<(), EvalError> {
    for n in &ir.nodes {
        let (nest, elem, params, fold) = match &n.kind {
            NodeKind::Seq(q) => {
                s.exec(&q.stmts)?;
                continue;
            }
            NodeKind::Map(m) => (&m.nest, &m.elem, &m.params, None),
            NodeKind::Fold(f) => (&f.nest, &f.elem, &f.params, Some((f.acc.clone(), f.op))),
        };
        let params = params
            .iter()
            .map(|p| s.scalar(p).ok_or_else(|| undefined(&n.name, p)))
            .collect::<Result<Vec<_>, _>>()?;
        let mut r = Runner { s, node: &n.name, elem, fold, ins: Vec::new(), outs: Vec::new(), params };
        r.level(nest, 0, &mut Vec::new())?;
    }
    Ok(())
}

/// Runs the whole program with the time step replaced by the IR nodes.
/// `prog` supplies the program unit's declarations.
/// Binds the IR's constants and scalars in a fresh program frame and
/// runs the prologue.
pub(crate) fn open_session<'p>(
    prog: &'p ProgramAst,
    ir: &'p FunctionalIr,
    cfg: &'p EvalConfig,
) -> Result<Session<'p>, EvalError> {
    let mut s = Session::new(prog, cfg)?;
    // Constants of inlined units that the program unit does not bind.
    for (name, e) in &ir.constants {
        if s.scalar(name).is_none() {
            s.declare(name, ir.scalars[name]);
            let v = match cfg.param_overrides.get(name) {
                Some(&o) => Value::Int(o),
                None => s.eval(e)?,
            };
            s.set_scalar(name, v)?;
        }
    }
    for (name, ty) in &ir.scalars {
        s.declare(name, *ty);
    }
    s.exec(&ir.prologue)?;
    Ok(s)
}

/// Runs the whole program with the time step replaced by the IR nodes.
/// `prog` supplies the program unit's declarations.
pub fn run_ir(prog: &ProgramAst, ir: &FunctionalIr, cfg: &EvalConfig) -> Result<ProgramOutput, EvalError> {
    let mut s = open_session(prog, ir, cfg)?;
    match &ir.time_loop {
        Some(t) => {
            let lo = s.eval(&t.start)?.as_i32();
            let hi = s.eval(&t.end)?.as_i32();
            s.set_scalar(&t.var, Value::Int(lo))?;
            let mut n = lo;
            while n <= hi {
                run_step(&mut s, ir)?;
                n += 1;
                s.set_scalar(&t.var, Value::Int(n))?;
            }
        }
        None => run_step(&mut s, ir)?,
    }
    s.exec(&ir.epilogue)?;
    Ok(s.finish())
}
