//! COMMON block variables become explicit arguments along the call tree.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::report::{DroppedVar, RenamedVar};
use crate::frontend::link::Symbol;
use crate::frontend::{Decl, Expr, ProgramAst, SourceUnit, StmtKind, UnitKind, VarDecl};

/// (block index in declaration order, position within the block)
type Slot = (usize, usize);

pub struct CommonResult {
    pub promoted: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    pub dropped: Vec<DroppedVar>,
    pub renamed: Vec<RenamedVar>,
}

fn referenced_names(u: &SourceUnit) -> HashSet<String> {
    let mut out = HashSet::new();
    for s in &u.body {
        s.visit(&mut |st| match &st.kind {
            StmtKind::Assign { target, .. } => {
                out.insert(target.name.clone());
            }
            StmtKind::Do(d) => {
                out.insert(d.var.clone());
            }
            _ => {}
        });
        s.visit_exprs(&mut |e| {
            if let Expr::Var(n) | Expr::ArrayRef(n, _) = e {
                out.insert(n.clone());
            }
        });
    }
    out
}

fn block_label(block: &str) -> &str {
    if block.is_empty() {
        "blank"
    } else {
        block
    }
}

pub fn eliminate(prog: &mut ProgramAst) -> CommonResult {
    let mut blocks: Vec<String> = Vec::new();
    for u in &prog.units {
        for (b, _) in u.common_blocks() {
            if !blocks.contains(&b) {
                blocks.push(b);
            }
        }
    }
    let block_idx = |b: &str| blocks.iter().position(|x| x == b).expect("known block");

    // Declared slots per unit and the canonical declaration of each slot.
    let mut declared: HashMap<String, BTreeMap<Slot, Symbol>> = HashMap::new();
    let mut canonical: BTreeMap<Slot, (Symbol, String)> = BTreeMap::new();
    let mut order: Vec<&SourceUnit> = prog.units.iter().filter(|u| u.kind == UnitKind::Program).collect();
    order.extend(prog.units.iter().filter(|u| u.kind != UnitKind::Program));
    for u in &order {
        let table = prog.symbols_of(&u.name);
        let mut mine = BTreeMap::new();
        for s in &table.symbols {
            if let Some((b, p)) = &s.common {
                let slot = (block_idx(b), *p);
                mine.insert(slot, s.clone());
                canonical.entry(slot).or_insert_with(|| (s.clone(), u.name.clone()));
            }
        }
        declared.insert(u.name.clone(), mine);
    }

    let mut direct: HashMap<String, BTreeSet<Slot>> = HashMap::new();
    for u in &prog.units {
        let names = referenced_names(u);
        let set = declared[&u.name].iter().filter(|(_, s)| names.contains(&s.name)).map(|(k, _)| *k).collect();
        direct.insert(u.name.clone(), set);
    }
    let mut needed: HashMap<String, BTreeSet<Slot>> = HashMap::new();
    for u in prog.calls.bottom_up(&prog.program) {
        let mut set = direct[&u].clone();
        for c in &prog.calls.callees[&u] {
            set.extend(needed[c].iter().copied());
        }
        needed.insert(u, set);
    }

    let mut renamed = Vec::new();
    let mut names: HashMap<String, BTreeMap<Slot, String>> = HashMap::new();
    for u in &prog.units {
        let table = prog.symbols_of(&u.name);
        let mut map = BTreeMap::new();
        for slot in &needed[&u.name] {
            let name = match declared[&u.name].get(slot) {
                Some(s) => s.name.clone(),
                None => {
                    let base = &canonical[slot].0.name;
                    if table.get(base).is_some() || prog.unit(base).is_some() {
                        let to = format!("{base}_cmn_{}", block_label(&blocks[slot.0]));
                        renamed.push(RenamedVar { unit: u.name.clone(), from: base.clone(), to: to.clone() });
                        to
                    } else {
                        base.clone()
                    }
                }
            };
            map.insert(*slot, name);
        }
        names.insert(u.name.clone(), map);
    }

    let mut promoted: BTreeMap<String, BTreeMap<String, Vec<String>>> = BTreeMap::new();
    let mut dropped = Vec::new();
    let unit_snapshot: HashMap<String, SourceUnit> = prog.units.iter().map(|u| (u.name.clone(), u.clone())).collect();
    for u in &mut prog.units {
        let need = &needed[&u.name];
        let map = &names[&u.name];
        // Unused members disappear.
        let drop: HashSet<String> = declared[&u.name]
            .iter()
            .filter(|(slot, _)| !need.contains(slot))
            .map(|(slot, s)| {
                dropped.push(DroppedVar {
                    unit: u.name.clone(),
                    block: blocks[slot.0].clone(),
                    name: s.name.clone(),
                });
                s.name.clone()
            })
            .collect();
        u.decls.retain(|d| match d {
            Decl::Common { .. } => false,
            Decl::Var(v) => !drop.contains(&v.name),
            _ => true,
        });
        // Declarations for slots this unit never declared.
        for slot in need {
            if declared[&u.name].contains_key(slot) {
                continue;
            }
            let (sym, src) = &canonical[slot];
            copy_parameters(u, &unit_snapshot[src], sym);
            u.decls.push(Decl::Var(VarDecl {
                name: map[slot].clone(),
                ty: sym.ty,
                dims: sym.dims.clone(),
                intent: None,
                parameter: None,
            }));
        }
        if u.kind != UnitKind::Program {
            for slot in need {
                u.args.push(map[slot].clone());
                promoted
                    .entry(blocks[slot.0].clone())
                    .or_default()
                    .entry(u.name.clone())
                    .or_default()
                    .push(map[slot].clone());
            }
        }
        // Pass promoted variables through every call site.
        let extra = |callee: &str| -> Vec<Expr> {
            needed.get(callee).map(|s| s.iter().map(|slot| Expr::Var(map[slot].clone())).collect()).unwrap_or_default()
        };
        for s in &mut u.body {
            s.visit_mut(&mut |st| {
                if let StmtKind::Call { name, args } = &mut st.kind {
                    args.extend(extra(name));
                }
            });
            s.visit_exprs_mut(&mut |e| {
                if let Expr::Call(name, args) = e {
                    args.extend(extra(name));
                }
            });
        }
    }
    CommonResult { promoted, dropped, renamed }
}

/// Copies PARAMETER declarations that `sym`'s bounds depend on.
fn copy_parameters(dst: &mut SourceUnit, src: &SourceUnit, sym: &Symbol) {
    let mut wanted = Vec::new();
    for d in &sym.dims {
        for e in d.lower.iter().chain(std::iter::once(&d.upper)) {
            e.visit(&mut |x| {
                if let Expr::Var(n) = x {
                    wanted.push(n.clone());
                }
            });
        }
    }
    let has = |u: &SourceUnit, n: &str| {
        u.decls.iter().any(|d| matches!(d, Decl::Var(v) if v.name == n))
    };
    while let Some(n) = wanted.pop() {
        if has(dst, &n) {
            continue;
        }
        let found = src.decls.iter().find_map(|d| match d {
            Decl::Var(v) if v.name == n && v.parameter.is_some() => Some(v.clone()),
            _ => None,
        });
        if let Some(v) = found {
            v.parameter.as_ref().expect("parameter").visit(&mut |x| {
                if let Expr::Var(m) = x {
                    wanted.push(m.clone());
                }
            });
            dst.decls.insert(1.min(dst.decls.len()), Decl::Var(v));
        }
    }
}
