//! From the program AST to the functional IR: find the time loop, inline
//! its calls, and lift each loop nest into a node.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::classify::{classify_loop_nest, extract_nest};
use super::elemental::{CompileInput, ElemFn};
use super::ir::*;
use super::AnalysisError;
use crate::frontend::{BaseType, Expr, ProgramAst, SourceUnit, Stmt, StmtKind};

struct Ctx<'p> {
    prog: &'p ProgramAst,
    arrays: BTreeMap<String, ArrayInfo>,
    scalars: BTreeMap<String, BaseType>,
    constants: Vec<(String, Expr)>,
}

fn contains_call(s: &Stmt) -> bool {
    let mut hit = false;
    s.visit(&mut |st| hit |= matches!(st.kind, StmtKind::Call { .. }));
    hit
}

/// Names read and written by statements (arrays and scalars alike).
pub fn stmt_effects(stmts: &[Stmt]) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut reads = BTreeSet::new();
    let mut writes = BTreeSet::new();
    for s in stmts {
        s.visit(&mut |st| match &st.kind {
            StmtKind::Assign { target, .. } => {
                writes.insert(target.name.clone());
            }
            StmtKind::Do(d) => {
                writes.insert(d.var.clone());
            }
            StmtKind::Call { args, .. } => {
                for a in args {
                    if let Expr::Var(n) | Expr::ArrayRef(n, _) = a {
                        writes.insert(n.clone());
                    }
                }
            }
            _ => {}
        });
        s.visit_exprs(&mut |e| {
            if let Expr::Var(n) | Expr::ArrayRef(n, _) = e {
                reads.insert(n.clone());
            }
        });
    }
    (reads, writes)
}

impl<'p> Ctx<'p> {
    fn inline(&mut self, stmts: &[Stmt], origin: &str, out: &mut Vec<(String, Stmt)>) -> Result<(), AnalysisError> {
        for s in stmts {
            match &s.kind {
                StmtKind::Call { name, args } => {
                    let callee = self.prog.unit(name).expect("linked");
                    let body = self.inline_call(callee, args)?;
                    let mut inner = Vec::new();
                    self.inline(&body, &callee.name, &mut inner)?;
                    out.extend(inner);
                }
                StmtKind::Continue => {}
                _ if contains_call(s) => {
                    return Err(AnalysisError::UnsupportedCall {
                        unit: origin.to_string(),
                        reason: "CALL nested inside a loop or IF of the time step".into(),
                    })
                }
                _ => out.push((origin.to_string(), s.clone())),
            }
        }
        Ok(())
    }

    /// The callee body with dummies renamed to actuals and clashing locals
    /// and constants renamed apart.
    fn inline_call(&mut self, callee: &SourceUnit, args: &[Expr]) -> Result<Vec<Stmt>, AnalysisError> {
        let err = |reason: String| AnalysisError::UnsupportedCall { unit: callee.name.clone(), reason };
        let table = self.prog.symbols_of(&callee.name);
        let mut rename: HashMap<String, String> = HashMap::new();
        for (dummy, actual) in callee.args.iter().zip(args) {
            let Expr::Var(a) = actual else {
                return Err(err(format!("argument for {dummy} is not a plain variable")));
            };
            let dsym = table.get(dummy).expect("dummy declared");
            let aty = self
                .arrays
                .get(a)
                .map(|i| i.ty)
                .or_else(|| self.scalars.get(a).copied())
                .ok_or_else(|| err(format!("unknown actual {a}")))?;
            if aty != dsym.ty || dsym.is_array() != self.arrays.contains_key(a) {
                return Err(AnalysisError::IrTypeMismatch { array: a.clone(), unit: callee.name.clone() });
            }
            rename.insert(dummy.clone(), a.clone());
        }
        let do_vars: BTreeSet<String> = {
            let mut v = BTreeSet::new();
            for s in &callee.body {
                s.visit(&mut |st| {
                    if let StmtKind::Do(d) = &st.kind {
                        v.insert(d.var.clone());
                    }
                });
            }
            v
        };
        let taken = |n: &str, ctx: &Ctx| {
            ctx.scalars.contains_key(n) || ctx.arrays.contains_key(n) || ctx.constants.iter().any(|(c, _)| c == n)
        };
        for s in &table.symbols {
            if s.dummy.is_some() {
                continue;
            }
            if let Some(slot) = &s.common {
                let main = self.prog.symbols_of(&self.prog.main().name);
                let target = main.symbols.iter().find(|m| m.common.as_ref() == Some(slot));
                let Some(target) = target else {
                    return Err(err(format!("common member {} has no counterpart in the program unit", s.name)));
                };
                if target.ty != s.ty || target.dims.len() != s.dims.len() {
                    return Err(AnalysisError::IrTypeMismatch { array: target.name.clone(), unit: callee.name.clone() });
                }
                rename.insert(s.name.clone(), target.name.clone());
                continue;
            }
            if let Some(value) = &s.parameter {
                match self.constants.iter().find(|(c, _)| c == &s.name) {
                    Some((_, v)) if v == value => {}
                    Some(_) => {
                        let new = format!("{}_{}", callee.name, s.name);
                        self.constants.push((new.clone(), value.clone()));
                        self.scalars.insert(new.clone(), s.ty);
                        rename.insert(s.name.clone(), new);
                    }
                    None => {
                        self.constants.push((s.name.clone(), value.clone()));
                        self.scalars.insert(s.name.clone(), s.ty);
                    }
                }
                continue;
            }
            if s.is_array() {
                return Err(err(format!("local array {}", s.name)));
            }
            let name = if taken(&s.name, self) && !(do_vars.contains(&s.name) && self.scalars.get(&s.name) == Some(&s.ty)) {
                format!("{}_{}", callee.name, s.name)
            } else {
                s.name.clone()
            };
            self.scalars.insert(name.clone(), s.ty);
            if name != s.name {
                rename.insert(s.name.clone(), name);
            }
        }
        let mut body = callee.body.clone();
        if matches!(body.last().map(|s| &s.kind), Some(StmtKind::Return)) {
            body.pop();
        }
        let mut has_return = false;
        for s in &mut body {
            s.visit(&mut |st| has_return |= matches!(st.kind, StmtKind::Return));
            s.rename(&|n| rename.get(n).cloned());
        }
        if has_return {
            return Err(err("RETURN before the end of the unit".into()));
        }
        Ok(body)
    }
}

fn host_effects(stmts: &[Stmt], arrays: &BTreeMap<String, ArrayInfo>) -> (BTreeSet<String>, BTreeSet<String>) {
    let (r, w) = stmt_effects(stmts);
    (
        r.into_iter().filter(|n| arrays.contains_key(n)).collect(),
        w.into_iter().filter(|n| arrays.contains_key(n)).collect(),
    )
}

pub fn build_ir(prog: &ProgramAst) -> Result<FunctionalIr, AnalysisError> {
    let main = prog.main();
    let table = prog.symbols_of(&main.name);
    let mut ctx = Ctx { prog, arrays: BTreeMap::new(), scalars: BTreeMap::new(), constants: Vec::new() };
    for s in &table.symbols {
        if let Some(v) = &s.parameter {
            ctx.constants.push((s.name.clone(), v.clone()));
            ctx.scalars.insert(s.name.clone(), s.ty);
        } else if s.is_array() {
            let bounds = s
                .dims
                .iter()
                .map(|d| (d.lower.clone().unwrap_or(Expr::Int(1)), d.upper.clone()))
                .collect();
            ctx.arrays.insert(s.name.clone(), ArrayInfo { ty: s.ty, bounds });
        } else {
            ctx.scalars.insert(s.name.clone(), s.ty);
        }
    }
    let t = main.body.iter().position(|s| matches!(s.kind, StmtKind::Do(_)) && contains_call(s));
    let (before, step, after, time_loop) = match t {
        Some(t) => {
            let StmtKind::Do(d) = &main.body[t].kind else { unreachable!() };
            let tl = TimeLoop { var: d.var.clone(), start: d.start.clone(), end: d.end.clone() };
            (&main.body[..t], d.body.as_slice(), &main.body[t + 1..], Some(tl))
        }
        None => (&main.body[..0], main.body.as_slice(), &main.body[..0], None),
    };
    let mut flat = Vec::new();
    ctx.inline(step, &main.name, &mut flat)?;

    // Group into nests and runs of other statements.
    let mut pieces: Vec<(String, Result<Nest, (Vec<Stmt>, String)>)> = Vec::new();
    for (origin, s) in flat {
        if matches!(s.kind, StmtKind::Do(_)) {
            let p = extract_nest(&s).map_err(|why| (vec![s.clone()], why));
            pieces.push((origin, p));
        } else {
            match pieces.last_mut() {
                Some((o, Err((stmts, _)))) if *o == origin => stmts.push(s),
                _ => pieces.push((origin, Err((vec![s], "statements outside loop nests".into())))),
            }
        }
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for (o, _) in &pieces {
        *counts.entry(o.clone()).or_default() += 1;
    }
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let array_names: BTreeSet<String> = ctx.arrays.keys().cloned().collect();
    let mut nodes = Vec::new();
    for (origin, piece) in pieces {
        let k = seen.entry(origin.clone()).or_default();
        *k += 1;
        let name = if counts[&origin] == 1 { origin.clone() } else { format!("{origin}_{k}") };
        let kind = match piece {
            Err((stmts, reason)) => seq_node(stmts, reason),
            Ok(nest) => lift_nest(nest, &array_names, &ctx)?,
        };
        nodes.push(Node { name, kind });
    }
    let (reads_after, writes_after) = host_effects(after, &ctx.arrays);
    demote_live_out_locals(&mut nodes, after, &array_names);
    let edges = compute_edges(&nodes);
    let (reads_before, writes_before) = host_effects(before, &ctx.arrays);
    let mut host = HostUse { reads_before, writes_before, reads_after, writes_after, ..Default::default() };
    for n in &nodes {
        if let NodeKind::Seq(s) = &n.kind {
            host.reads_inside.extend(s.reads.iter().filter(|x| ctx.arrays.contains_key(*x)).cloned());
            host.writes_inside.extend(s.writes.iter().filter(|x| ctx.arrays.contains_key(*x)).cloned());
        }
    }
    Ok(FunctionalIr {
        program: main.name.clone(),
        nodes,
        edges,
        arrays: ctx.arrays,
        scalars: ctx.scalars,
        constants: ctx.constants,
        time_loop,
        host,
        prologue: before.to_vec(),
        epilogue: after.to_vec(),
    })
}

pub(crate) fn seq_node(stmts: Vec<Stmt>, reason: String) -> NodeKind {
    let (reads, writes) = stmt_effects(&stmts);
    NodeKind::Seq(SeqNode { stmts, reason, reads, writes })
}

/// Lifts a classified nest into a Map, Fold or Seq node.
pub(crate) fn lift_nest(nest: Nest, arrays: &BTreeSet<String>, ctx_types: &impl TypeSource) -> Result<NodeKind, AnalysisError> {
    let c = classify_loop_nest(&nest, arrays);
    let reads: Vec<(String, Vec<i32>)> =
        c.accesses.iter().filter(|a| a.mode == Mode::Read).map(|a| (a.array.clone(), a.offsets.clone())).collect();
    let mut outputs: Vec<(String, BaseType)> = Vec::new();
    for a in c.accesses.iter().filter(|a| a.mode == Mode::Write) {
        if !outputs.iter().any(|(n, _)| n == &a.array) {
            outputs.push((a.array.clone(), ctx_types.array_type(&a.array)));
        }
    }
    let scalar_types = ctx_types.scalar_types();
    Ok(match c.class {
        LoopClass::Sequential(reason) => {
            let stmt = rebuild_do(&nest);
            seq_node(vec![stmt], reason)
        }
        LoopClass::Map => {
            let elem = ElemFn::compile(&CompileInput {
                body: &nest.body,
                nest_vars: &nest.vars,
                params: &c.params,
                reads: &reads,
                outputs: &outputs,
                must_write: &c.must_write,
                scalar_types,
                fold_acc: None,
            })?;
            let inputs = elem.streams().into_iter().map(|(array, offsets)| StreamIn { array, offsets }).collect();
            NodeKind::Map(MapNode { nest, inputs, outputs: outputs.into_iter().map(|(n, _)| n).collect(), params: c.params, elem })
        }
        LoopClass::Fold { acc, op } => {
            let elem = ElemFn::compile(&CompileInput {
                body: &nest.body,
                nest_vars: &nest.vars,
                params: &c.params,
                reads: &reads,
                outputs: &[],
                must_write: &c.must_write,
                scalar_types,
                fold_acc: Some(&acc),
            })?;
            let inputs = elem.streams().into_iter().map(|(array, offsets)| StreamIn { array, offsets }).collect();
            NodeKind::Fold(FoldNode { nest, inputs, acc, op, params: c.params, elem })
        }
    })
}

pub(crate) trait TypeSource {
    fn array_type(&self, name: &str) -> BaseType;
    fn scalar_types(&self) -> &BTreeMap<String, BaseType>;
}

impl TypeSource for Ctx<'_> {
    fn array_type(&self, name: &str) -> BaseType {
        self.arrays[name].ty
    }
    fn scalar_types(&self) -> &BTreeMap<String, BaseType> {
        &self.scalars
    }
}

impl TypeSource for FunctionalIr {
    fn array_type(&self, name: &str) -> BaseType {
        self.arrays[name].ty
    }
    fn scalar_types(&self) -> &BTreeMap<String, BaseType> {
        &self.scalars
    }
}

/// The DO statement a nest came from.
pub fn rebuild_do(nest: &Nest) -> Stmt {
    let mut body = nest.body.clone();
    for (v, (lo, hi)) in nest.vars.iter().zip(&nest.bounds).rev() {
        let d = crate::frontend::DoLoop {
            var: v.clone(),
            start: lo.clone(),
            end: hi.clone(),
            step: None,
            body,
            term_label: None,
        };
        body = vec![Stmt::new(StmtKind::Do(d))];
    }
    body.pop().expect("non-empty nest")
}

/// Private scalars whose last value is read after the nest make the nest
/// sequential.
fn demote_live_out_locals(nodes: &mut [Node], after: &[Stmt], arrays: &BTreeSet<String>) {
    let (after_reads, _) = stmt_effects(after);
    for i in 0..nodes.len() {
        let locals: Vec<String> = match &nodes[i].kind {
            NodeKind::Map(m) => local_scalars(&m.nest, arrays),
            NodeKind::Fold(f) => local_scalars(&f.nest, arrays).into_iter().filter(|s| *s != f.acc).collect(),
            NodeKind::Seq(_) => continue,
        };
        let later: BTreeSet<String> = nodes[i + 1..].iter().flat_map(|n| n.reads()).chain(after_reads.iter().cloned()).collect();
        if let Some(l) = locals.iter().find(|l| later.contains(*l)) {
            let nest = nodes[i].nest().expect("nest").clone();
            nodes[i].kind = seq_node(vec![rebuild_do(&nest)], format!("scalar {l} live after the nest"));
        }
    }
}

fn local_scalars(nest: &Nest, arrays: &BTreeSet<String>) -> Vec<String> {
    classify_loop_nest(nest, arrays).locals
}

pub fn compute_edges(nodes: &[Node]) -> Vec<Edge> {
    let mut last: BTreeMap<String, usize> = BTreeMap::new();
    let mut edges = Vec::new();
    for (i, n) in nodes.iter().enumerate() {
        for r in n.reads() {
            if let Some(&w) = last.get(&r) {
                edges.push(Edge { from: w, to: i, array: r });
            }
        }
        for w in n.writes() {
            last.insert(w, i);
        }
    }
    edges
}
