//! Dependence test for loop nests: Map, Fold or Sequential.

use std::collections::{BTreeMap, BTreeSet};

use super::ir::{AccessPattern, FoldOp, LoopClass, Mode, Nest};
use crate::frontend::{BinOp, Expr, Intrinsic, Stmt, StmtKind};

#[derive(Debug, Clone, PartialEq)]
pub struct Classified {
    pub class: LoopClass,
    /// Sorted, without duplicates.
    pub accesses: Vec<AccessPattern>,
    /// Loop-invariant scalars read by the body, in order of first use.
    pub params: Vec<String>,
    /// Scalars defined before use in every iteration.
    pub locals: Vec<String>,
    /// Output arrays written on every path through the body.
    pub must_write: BTreeSet<String>,
    /// For folds: the contribution expression of the reduction statement.
    pub contribution: Option<Expr>,
}

/// Peels a perfectly nested loop nest off a DO statement.
pub fn extract_nest(stmt: &Stmt) -> Result<Nest, String> {
    let mut vars = Vec::new();
    let mut bounds = Vec::new();
    let mut cur = stmt;
    loop {
        let StmtKind::Do(d) = &cur.kind else { unreachable!("caller passes a DO") };
        if let Some(step) = &d.step {
            if *step != Expr::Int(1) {
                return Err(format!("loop over {} has a non-unit step", d.var));
            }
        }
        vars.push(d.var.clone());
        bounds.push((d.start.clone(), d.end.clone()));
        match d.body.as_slice() {
            [inner] if matches!(inner.kind, StmtKind::Do(_)) => cur = inner,
            body => return Ok(Nest { vars, bounds, body: body.to_vec() }),
        }
    }
}

pub(crate) fn subscript_offset(e: &Expr, var: &str) -> Option<i32> {
    match e {
        Expr::Var(v) if v == var => Some(0),
        Expr::Binary(BinOp::Add, a, b) => match (&**a, &**b) {
            (Expr::Var(v), Expr::Int(c)) | (Expr::Int(c), Expr::Var(v)) if v == var => Some(*c),
            _ => None,
        },
        Expr::Binary(BinOp::Sub, a, b) => match (&**a, &**b) {
            (Expr::Var(v), Expr::Int(c)) if v == var => Some(-*c),
            _ => None,
        },
        _ => None,
    }
}

pub fn format_offsets(o: &[i32]) -> String {
    if o.len() == 1 {
        o[0].to_string()
    } else {
        format!("({})", o.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
    }
}

struct Scan<'a> {
    nest: &'a Nest,
    arrays: &'a BTreeSet<String>,
    accesses: BTreeSet<AccessPattern>,
    scalar_reads: Vec<String>,
    scalar_writes: Vec<String>,
    problem: Option<String>,
}

impl Scan<'_> {
    fn fail(&mut self, why: String) {
        self.problem.get_or_insert(why);
    }

    fn pattern(&mut self, name: &str, idx: &[Expr], mode: Mode) {
        if idx.len() != self.nest.vars.len() {
            self.fail(format!("{name} has rank {} in a nest of depth {}", idx.len(), self.nest.vars.len()));
            return;
        }
        let mut offsets = Vec::new();
        for (e, v) in idx.iter().zip(&self.nest.vars) {
            match subscript_offset(e, v) {
                Some(o) => offsets.push(o),
                None => {
                    self.fail(format!("opaque subscript on {name}"));
                    return;
                }
            }
        }
        self.accesses.insert(AccessPattern { array: name.to_string(), mode, offsets });
    }

    fn expr(&mut self, e: &Expr) {
        e.visit(&mut |x| match x {
            Expr::ArrayRef(n, idx) => {
                let (n, idx) = (n.clone(), idx.clone());
                self.pattern(&n, &idx, Mode::Read);
            }
            Expr::Var(n) if self.arrays.contains(n) => self.fail(format!("whole-array use of {n}")),
            Expr::Var(n) => {
                if !self.scalar_reads.contains(n) {
                    self.scalar_reads.push(n.clone());
                }
            }
            Expr::Call(f, _) => self.fail(format!("function reference {f}")),
            _ => {}
        });
    }

    fn stmts(&mut self, body: &[Stmt]) {
        for s in body {
            match &s.kind {
                StmtKind::Assign { target, value } => {
                    self.expr(value);
                    for i in &target.indices {
                        self.expr(i);
                    }
                    if target.indices.is_empty() {
                        if self.arrays.contains(&target.name) {
                            self.fail(format!("whole-array assignment to {}", target.name));
                        } else if self.nest.vars.contains(&target.name) {
                            self.fail(format!("loop variable {} assigned", target.name));
                        } else if !self.scalar_writes.contains(&target.name) {
                            self.scalar_writes.push(target.name.clone());
                        }
                    } else {
                        let (n, idx) = (target.name.clone(), target.indices.clone());
                        self.pattern(&n, &idx, Mode::Write);
                    }
                }
                StmtKind::If { arms, otherwise } => {
                    for (c, b) in arms {
                        self.expr(c);
                        self.stmts(b);
                    }
                    if let Some(b) = otherwise {
                        self.stmts(b);
                    }
                }
                StmtKind::Do(_) => self.fail("imperfectly nested loop".into()),
                StmtKind::Call { name, .. } => self.fail(format!("call to {name} inside the nest")),
                StmtKind::Return => self.fail("RETURN inside the nest".into()),
                StmtKind::Continue => {}
            }
        }
    }
}

/// Recognises `s = s op e`, `s = e op s` (op in +, *) and `s = max(s, e)`.
fn reduction(s: &Stmt) -> Option<(String, FoldOp, Expr)> {
    let StmtKind::Assign { target, value } = &s.kind else { return None };
    if !target.indices.is_empty() {
        return None;
    }
    let acc = &target.name;
    let is_acc = |e: &Expr| matches!(e, Expr::Var(n) if n == acc);
    let (op, other) = match value {
        Expr::Binary(op @ (BinOp::Add | BinOp::Mul), a, b) => {
            let fop = if *op == BinOp::Add { FoldOp::Add } else { FoldOp::Mul };
            if is_acc(a) {
                (fop, (**b).clone())
            } else if is_acc(b) {
                (fop, (**a).clone())
            } else {
                return None;
            }
        }
        Expr::Intrinsic(f @ (Intrinsic::Min | Intrinsic::Max), args) if args.len() == 2 => {
            let fop = if *f == Intrinsic::Min { FoldOp::Min } else { FoldOp::Max };
            if is_acc(&args[0]) {
                (fop, args[1].clone())
            } else if is_acc(&args[1]) {
                (fop, args[0].clone())
            } else {
                return None;
            }
        }
        _ => return None,
    };
    let mut uses_acc = false;
    other.visit(&mut |x| uses_acc |= is_acc(x));
    if uses_acc {
        None
    } else {
        Some((acc.clone(), op, other))
    }
}

fn count_uses(body: &[Stmt], name: &str) -> usize {
    let mut n = 0;
    for s in body {
        s.visit_exprs(&mut |e| {
            if matches!(e, Expr::Var(v) if v == name) {
                n += 1;
            }
        });
        s.visit(&mut |st| {
            if let StmtKind::Assign { target, .. } = &st.kind {
                if target.name == name && target.indices.is_empty() {
                    n += 1;
                }
            }
        });
    }
    n
}

/// Scalars read before a definition on some path, among `defined`.
fn use_before_def(body: &[Stmt], defined: &BTreeSet<String>, have: &mut BTreeSet<String>, bad: &mut Vec<String>) {
    let check = |e: &Expr, have: &BTreeSet<String>, bad: &mut Vec<String>| {
        e.visit(&mut |x| {
            if let Expr::Var(n) = x {
                if defined.contains(n) && !have.contains(n) && !bad.contains(n) {
                    bad.push(n.clone());
                }
            }
        });
    };
    for s in body {
        match &s.kind {
            StmtKind::Assign { target, value } => {
                check(value, have, bad);
                for i in &target.indices {
                    check(i, have, bad);
                }
                if target.indices.is_empty() {
                    have.insert(target.name.clone());
                }
            }
            StmtKind::If { arms, otherwise } => {
                let mut outs: Vec<BTreeSet<String>> = Vec::new();
                for (c, b) in arms {
                    check(c, have, bad);
                    let mut h = have.clone();
                    use_before_def(b, defined, &mut h, bad);
                    outs.push(h);
                }
                match otherwise {
                    Some(b) => {
                        let mut h = have.clone();
                        use_before_def(b, defined, &mut h, bad);
                        outs.push(h);
                    }
                    None => outs.push(have.clone()),
                }
                let mut meet = outs[0].clone();
                for o in &outs[1..] {
                    meet = meet.intersection(o).cloned().collect();
                }
                *have = meet;
            }
            _ => {}
        }
    }
}

/// Arrays assigned on every path through `body`.
pub fn must_write(body: &[Stmt]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for s in body {
        match &s.kind {
            StmtKind::Assign { target, .. } if !target.indices.is_empty() => {
                out.insert(target.name.clone());
            }
            StmtKind::If { arms, otherwise: Some(other) } => {
                let mut meet = must_write(other);
                for (_, b) in arms {
                    meet = meet.intersection(&must_write(b)).cloned().collect();
                }
                out.extend(meet);
            }
            _ => {}
        }
    }
    out
}

pub fn classify_loop_nest(nest: &Nest, arrays: &BTreeSet<String>) -> Classified {
    let mut scan = Scan {
        nest,
        arrays,
        accesses: BTreeSet::new(),
        scalar_reads: vec![],
        scalar_writes: vec![],
        problem: None,
    };
    for (lo, hi) in &nest.bounds {
        scan.expr(lo);
        scan.expr(hi);
    }
    let bound_reads = scan.scalar_reads.clone();
    scan.stmts(&nest.body);
    let accesses: Vec<AccessPattern> = scan.accesses.iter().cloned().collect();
    let seq = |why: String, accesses: Vec<AccessPattern>| Classified {
        class: LoopClass::Sequential(why),
        accesses,
        params: vec![],
        locals: vec![],
        must_write: BTreeSet::new(),
        contribution: None,
    };
    if let Some(p) = scan.problem.take() {
        return seq(p, accesses);
    }
    for b in &bound_reads {
        if scan.scalar_writes.contains(b) {
            return seq(format!("loop bound depends on {b}, which the body assigns"), accesses);
        }
    }
    // Arrays: writes at offset zero, and no reads of written arrays elsewhere.
    let written: BTreeSet<&str> =
        accesses.iter().filter(|a| a.mode == Mode::Write).map(|a| a.array.as_str()).collect();
    for a in &accesses {
        if a.offsets.iter().any(|&o| o != 0) && written.contains(a.array.as_str()) {
            let what = if a.mode == Mode::Write { "written" } else { "carried" };
            return seq(format!("{} {what} at offset {}", a.array, format_offsets(&a.offsets)), accesses);
        }
    }
    // Scalars: reductions, privates, loop-invariant parameters.
    let mut reductions: BTreeMap<String, (FoldOp, Expr)> = BTreeMap::new();
    for s in &nest.body {
        if let Some((acc, op, e)) = reduction(s) {
            if count_uses(&nest.body, &acc) == 2 && !reductions.contains_key(&acc) {
                reductions.insert(acc, (op, e));
            }
        }
    }
    let defined: BTreeSet<String> =
        scan.scalar_writes.iter().filter(|s| !reductions.contains_key(*s)).cloned().collect();
    let mut bad = Vec::new();
    use_before_def(&nest.body, &defined, &mut BTreeSet::new(), &mut bad);
    if let Some(b) = bad.first() {
        return seq(format!("scalar {b} carried between iterations"), accesses);
    }
    let params: Vec<String> = scan
        .scalar_reads
        .iter()
        .filter(|s| !defined.contains(*s) && !reductions.contains_key(*s) && !nest.vars.contains(s))
        .cloned()
        .collect();
    let locals: Vec<String> = scan.scalar_writes.iter().filter(|s| defined.contains(*s)).cloned().collect();
    let class = match reductions.len() {
        0 => LoopClass::Map,
        1 if written.is_empty() => {
            let (acc, (op, _)) = reductions.iter().next().expect("one reduction");
            LoopClass::Fold { acc: acc.clone(), op: *op }
        }
        1 => return seq("reduction mixed with array writes".into(), accesses),
        _ => return seq("more than one reduction".into(), accesses),
    };
    let contribution = reductions.values().next().map(|(_, e)| e.clone());
    Classified { class, accesses, params, locals, must_write: must_write(&nest.body), contribution }
}
