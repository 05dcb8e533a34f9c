//! Map fusion and fission on the functional IR.

use std::collections::{BTreeMap, BTreeSet};

use super::build::{compute_edges, lift_nest, stmt_effects};
use super::classify::subscript_offset;
use super::ir::*;
use crate::frontend::{BinOp, Expr, LValue, Stmt, StmtKind};

#[derive(Debug, Clone)]
pub struct RewriteRules {
    pub fuse: bool,
    /// Nodes to split into independent statement groups.
    pub split: BTreeSet<String>,
    /// Also split any map node gathering more than this many slots.
    pub split_above_slots: Option<usize>,
}

impl Default for RewriteRules {
    fn default() -> Self {
        Self { fuse: true, split: BTreeSet::new(), split_above_slots: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RewriteLog {
    /// (producer, consumer, fused name).
    pub fused: Vec<(String, String, String)>,
    /// (original, pieces).
    pub split: Vec<(String, Vec<String>)>,
    /// Arrays that a fusion turned into per-element temporaries; their
    /// final contents are no longer maintained.
    pub eliminated: Vec<String>,
}

fn index_expr(var: &str, d: i32) -> Expr {
    match d {
        0 => Expr::var(var),
        d if d > 0 => Expr::bin(BinOp::Add, Expr::var(var), Expr::Int(d)),
        d => Expr::bin(BinOp::Sub, Expr::var(var), Expr::Int(-d)),
    }
}

/// `e` evaluated at the iteration shifted by `shift` (one entry per nest
/// variable).
fn shift_expr(e: &Expr, vars: &[String], shift: &[i32]) -> Expr {
    match e {
        Expr::Var(v) => match vars.iter().position(|x| x == v) {
            Some(i) => index_expr(v, shift[i]),
            None => e.clone(),
        },
        Expr::ArrayRef(n, xs) => Expr::ArrayRef(n.clone(), xs.iter().map(|x| shift_subscript(x, vars, shift)).collect()),
        Expr::Intrinsic(f, xs) => Expr::Intrinsic(*f, xs.iter().map(|x| shift_expr(x, vars, shift)).collect()),
        Expr::Call(n, xs) => Expr::Call(n.clone(), xs.iter().map(|x| shift_expr(x, vars, shift)).collect()),
        Expr::Unary(op, x) => Expr::Unary(*op, Box::new(shift_expr(x, vars, shift))),
        Expr::Binary(op, a, b) => Expr::bin(*op, shift_expr(a, vars, shift), shift_expr(b, vars, shift)),
        _ => e.clone(),
    }
}

fn shift_subscript(e: &Expr, vars: &[String], shift: &[i32]) -> Expr {
    for (i, v) in vars.iter().enumerate() {
        if let Some(o) = subscript_offset(e, v) {
            return index_expr(v, o + shift[i]);
        }
    }
    shift_expr(e, vars, shift)
}

fn shift_stmts(body: &[Stmt], vars: &[String], shift: &[i32]) -> Vec<Stmt> {
    let mut out = body.to_vec();
    for s in &mut out {
        s.visit_mut(&mut |st| match &mut st.kind {
            StmtKind::Assign { target, value } => {
                target.indices = target.indices.iter().map(|x| shift_subscript(x, vars, shift)).collect();
                *value = shift_expr(value, vars, shift);
            }
            StmtKind::If { arms, .. } => {
                for (c, _) in arms {
                    *c = shift_expr(c, vars, shift);
                }
            }
            _ => {}
        });
    }
    out
}

/// Replaces reads `a(i+d)` of arrays in `temps` by the scalar for (a, d),
/// and writes `a(i)` likewise.
fn to_temps(body: &mut [Stmt], vars: &[String], temps: &BTreeMap<(String, Vec<i32>), String>) {
    let offs = |n: &str, xs: &[Expr]| -> Option<String> {
        if xs.len() != vars.len() {
            return None;
        }
        let o: Option<Vec<i32>> = xs.iter().zip(vars).map(|(x, v)| subscript_offset(x, v)).collect();
        temps.get(&(n.to_string(), o?)).cloned()
    };
    for s in body {
        s.visit_mut(&mut |st| {
            if let StmtKind::Assign { target, .. } = &mut st.kind {
                if let Some(t) = offs(&target.name, &target.indices) {
                    *target = LValue { name: t, indices: vec![] };
                }
            }
        });
        s.visit_exprs_mut(&mut |e| {
            if let Expr::ArrayRef(n, xs) = e {
                if let Some(t) = offs(n, xs) {
                    *e = Expr::Var(t);
                }
            }
        });
    }
}

struct Names(BTreeSet<String>);

impl Names {
    fn fresh(&mut self, base: &str) -> String {
        let mut cand = base.to_string();
        let mut i = 1;
        while self.0.contains(&cand) {
            i += 1;
            cand = format!("{base}{i}");
        }
        self.0.insert(cand.clone());
        cand
    }
}

fn all_names(ir: &FunctionalIr) -> Names {
    let mut n: BTreeSet<String> = ir.arrays.keys().chain(ir.scalars.keys()).cloned().collect();
    for node in &ir.nodes {
        n.extend(node.reads());
        n.extend(node.writes());
        if let Some(nest) = node.nest() {
            n.extend(nest.vars.iter().cloned());
        }
    }
    Names(n)
}

/// Whether the array is read anywhere other than node `c`.
fn observed_elsewhere(ir: &FunctionalIr, a: &str, c: usize) -> bool {
    let (epi, _) = stmt_effects(&ir.epilogue);
    ir.nodes.iter().enumerate().any(|(i, n)| i != c && n.reads().contains(a))
        || ir.host.reads_inside.contains(a)
        || ir.host.reads_after.contains(a)
        || epi.contains(a)
}

/// Tries to fuse producer `p` into consumer `c`.
fn try_fuse(ir: &FunctionalIr, p: usize, c: usize) -> Option<(FunctionalIr, Vec<String>)> {
    let (pm, cm) = (ir.nodes[p].as_map()?, ir.nodes[c].as_map()?);
    if pm.nest.bounds != cm.nest.bounds || pm.nest.vars.len() != cm.nest.vars.len() {
        return None;
    }
    if ir.producers_of(c).iter().any(|e| e.from != p) || ir.consumers_of(p).iter().any(|e| e.to != c) {
        return None;
    }
    let p_reads = ir.nodes[p].reads();
    let p_writes = ir.nodes[p].writes();
    if p_reads.iter().any(|r| p_writes.contains(r)) {
        return None;
    }
    let c_writes = ir.nodes[c].writes();
    if c_writes.iter().any(|w| p_reads.contains(w) || p_writes.contains(w)) {
        return None;
    }
    for k in p + 1..c {
        let n = &ir.nodes[k];
        if n.writes().iter().any(|w| p_reads.contains(w) || p_writes.contains(w)) {
            return None;
        }
    }
    // Align the producer's loop variables with the consumer's.
    let mut p_body = pm.nest.body.clone();
    let vmap: BTreeMap<String, String> =
        pm.nest.vars.iter().cloned().zip(cm.nest.vars.iter().cloned()).filter(|(a, b)| a != b).collect();
    for s in &mut p_body {
        s.rename(&|n| vmap.get(n).cloned());
    }
    let vars = &cm.nest.vars;
    let mut names = all_names(ir);
    let p_stenciled = pm.inputs.iter().any(|s| s.is_stenciled());
    if p_stenciled && cm.inputs.iter().any(|s| s.is_stenciled()) {
        return None;
    }
    // Offsets at which C reads P's outputs.
    let mut reach: BTreeSet<Vec<i32>> = BTreeSet::new();
    for s in &cm.inputs {
        if p_writes.contains(&s.array) {
            reach.extend(s.offsets.iter().cloned());
        }
    }
    let zero = vec![0; vars.len()];
    let mut eliminated = Vec::new();
    let mut new_types = BTreeMap::new();
    let scalar_ty = |n: &str| ir.scalars.get(n).copied().unwrap_or(crate::frontend::BaseType::implicit_for(n));
    let body = if reach.iter().all(|o| *o == zero) {
        // Same element: run P's body, then C's.
        let p_locals: BTreeSet<String> = stmt_effects(&p_body).1.difference(&p_writes).cloned().collect();
        let c_names: BTreeSet<String> = {
            let (r, w) = stmt_effects(&cm.nest.body);
            r.union(&w).cloned().collect()
        };
        let ren: BTreeMap<String, String> = p_locals
            .iter()
            .filter(|l| c_names.contains(*l) && !vars.contains(l))
            .map(|l| {
                let t = names.fresh(&format!("{}_{l}", ir.nodes[p].name));
                new_types.insert(t.clone(), scalar_ty(l));
                (l.clone(), t)
            })
            .collect();
        for s in &mut p_body {
            s.rename(&|n| ren.get(n).cloned());
        }
        p_body.into_iter().chain(cm.nest.body.iter().cloned()).collect::<Vec<_>>()
    } else {
        if p_stenciled || p_writes.iter().any(|a| observed_elsewhere(ir, a, c)) {
            return None;
        }
        // Replicate P at every offset C reads, into scalar temporaries.
        let mut out = Vec::new();
        let mut temps: BTreeMap<(String, Vec<i32>), String> = BTreeMap::new();
        let p_locals: BTreeSet<String> = stmt_effects(&p_body).1.difference(&p_writes).cloned().collect();
        for (m, d) in reach.iter().enumerate() {
            let mut local_ren: BTreeMap<String, String> = BTreeMap::new();
            for l in p_locals.iter().filter(|l| !vars.contains(l)) {
                let t = names.fresh(&format!("{l}_{}", m + 1));
                new_types.insert(t.clone(), scalar_ty(l));
                local_ren.insert(l.clone(), t);
            }
            let mut inits = Vec::new();
            let mut here = BTreeMap::new();
            for a in &p_writes {
                let t = names.fresh(&format!("{a}_{}", m + 1));
                new_types.insert(t.clone(), ir.arrays[a].ty);
                let idx = vars.iter().zip(d).map(|(v, &o)| index_expr(v, o)).collect();
                inits.push(Stmt::new(StmtKind::Assign {
                    target: LValue { name: t.clone(), indices: vec![] },
                    value: Expr::ArrayRef(a.clone(), idx),
                }));
                here.insert((a.clone(), zero.clone()), t.clone());
                temps.insert((a.clone(), d.clone()), t);
            }
            let mut rep = shift_stmts(&p_body, vars, d);
            for s in &mut rep {
                s.rename(&|n| local_ren.get(n).cloned());
            }
            // Shifted writes land at offset d.
            let here_d: BTreeMap<(String, Vec<i32>), String> =
                here.into_iter().map(|((a, _), t)| ((a, d.clone()), t)).collect();
            to_temps(&mut rep, vars, &here_d);
            out.extend(inits);
            let guard = vars
                .iter()
                .zip(d)
                .zip(&cm.nest.bounds)
                .filter(|((_, &o), _)| o != 0)
                .flat_map(|((v, &o), (lo, hi))| {
                    [
                        Expr::bin(BinOp::Ge, index_expr(v, o), lo.clone()),
                        Expr::bin(BinOp::Le, index_expr(v, o), hi.clone()),
                    ]
                })
                .reduce(|a, b| Expr::bin(BinOp::And, a, b));
            match guard {
                None => out.extend(rep),
                Some(g) => out.push(Stmt::new(StmtKind::If { arms: vec![(g, rep)], otherwise: None })),
            }
        }
        let mut c_body = cm.nest.body.clone();
        to_temps(&mut c_body, vars, &temps);
        out.extend(c_body);
        eliminated.extend(p_writes.iter().cloned());
        out
    };
    let mut next = ir.clone();
    next.scalars.extend(new_types);
    let nest = Nest { vars: vars.clone(), bounds: cm.nest.bounds.clone(), body };
    let arrays: BTreeSet<String> = ir.arrays.keys().cloned().collect();
    let kind = lift_nest(nest, &arrays, &next).ok()?;
    if !matches!(kind, NodeKind::Map(_)) {
        return None;
    }
    let name = format!("{}_{}", ir.nodes[p].name, ir.nodes[c].name);
    next.nodes[c] = Node { name, kind };
    next.nodes.remove(p);
    next.edges = compute_edges(&next.nodes);
    Some((next, eliminated))
}

/// Splits a map node into groups of top-level statements that share no
/// written name.
fn split_node(ir: &FunctionalIr, i: usize) -> Option<Vec<Node>> {
    let m = ir.nodes[i].as_map()?;
    let body = &m.nest.body;
    let effects: Vec<(BTreeSet<String>, BTreeSet<String>)> =
        body.iter().map(|s| stmt_effects(std::slice::from_ref(s))).collect();
    let mut parent: Vec<usize> = (0..body.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for a in 0..body.len() {
        for b in a + 1..body.len() {
            let (ra, wa) = &effects[a];
            let (rb, wb) = &effects[b];
            let touches = |w: &BTreeSet<String>, r: &BTreeSet<String>, w2: &BTreeSet<String>| {
                w.iter().any(|x| !m.nest.vars.contains(x) && (r.contains(x) || w2.contains(x)))
            };
            if touches(wa, rb, wb) || touches(wb, ra, wa) {
                let (x, y) = (find(&mut parent, a), find(&mut parent, b));
                parent[y] = x;
            }
        }
    }
    let mut groups: Vec<(usize, Vec<Stmt>)> = Vec::new();
    for (k, s) in body.iter().enumerate() {
        let r = find(&mut parent, k);
        match groups.iter_mut().find(|(g, _)| *g == r) {
            Some((_, v)) => v.push(s.clone()),
            None => groups.push((r, vec![s.clone()])),
        }
    }
    if groups.len() < 2 {
        return None;
    }
    let arrays: BTreeSet<String> = ir.arrays.keys().cloned().collect();
    let mut out = Vec::new();
    for (g, (_, stmts)) in groups.into_iter().enumerate() {
        let nest = Nest { vars: m.nest.vars.clone(), bounds: m.nest.bounds.clone(), body: stmts };
        let kind = lift_nest(nest, &arrays, ir).ok()?;
        if !matches!(kind, NodeKind::Map(_)) {
            return None;
        }
        out.push(Node { name: format!("{}_{}", ir.nodes[i].name, g + 1), kind });
    }
    Some(out)
}

/// Applies fission to flagged nodes, then map fusion until nothing more
/// fuses.
pub fn rewrite_ir(ir: &FunctionalIr, rules: &RewriteRules) -> (FunctionalIr, RewriteLog) {
    let mut cur = ir.clone();
    let mut log = RewriteLog::default();
    let mut i = 0;
    while i < cur.nodes.len() {
        let n = &cur.nodes[i];
        let flagged = rules.split.contains(&n.name)
            || matches!((rules.split_above_slots, n.as_map()), (Some(max), Some(m)) if m.elem.slots.len() > max);
        match flagged.then(|| split_node(&cur, i)).flatten() {
            Some(pieces) => {
                log.split.push((n.name.clone(), pieces.iter().map(|p| p.name.clone()).collect()));
                let k = pieces.len();
                cur.nodes.splice(i..=i, pieces);
                i += k;
            }
            None => i += 1,
        }
    }
    cur.edges = compute_edges(&cur.nodes);
    if rules.fuse {
        let limit = cur.nodes.len() * cur.nodes.len();
        for _ in 0..limit {
            let mut done = true;
            for c in 0..cur.nodes.len() {
                let producers: BTreeSet<usize> = cur.producers_of(c).iter().map(|e| e.from).collect();
                let [p] = producers.into_iter().collect::<Vec<_>>()[..] else { continue };
                if let Some((next, elim)) = try_fuse(&cur, p, c) {
                    log.fused.push((cur.nodes[p].name.clone(), cur.nodes[c].name.clone(), next.nodes[c - 1].name.clone()));
                    log.eliminated.extend(elim);
                    cur = next;
                    done = false;
                    break;
                }
            }
            if done {
                break;
            }
        }
    }
    (cur, log)
}
