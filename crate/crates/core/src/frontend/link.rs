//! Whole-program view: unit lookup, call graph and per-unit symbol tables.

use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

use super::ast::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinkError {
    #[error("unit `{caller}` calls `{callee}`, which is not defined")]
    UnresolvedCallee { caller: String, callee: String },
    #[error("unit `{0}` is defined more than once")]
    DuplicateUnit(String),
    #[error("no PROGRAM unit")]
    NoProgramUnit,
    #[error("more than one PROGRAM unit: {0:?}")]
    MultipleProgramUnits(Vec<String>),
    #[error("`{caller}` calls `{callee}` with {given} arguments, expected {expected}")]
    ArityMismatch { caller: String, callee: String, given: usize, expected: usize },
    #[error("`{name}` in `{unit}` has no type under IMPLICIT NONE")]
    Undeclared { unit: String, name: String },
    #[error("`{callee}` is a {kind}, not called that way from `{caller}`")]
    WrongKind { caller: String, callee: String, kind: &'static str },
    #[error("`{name}` in `{unit}` is used with {given} subscripts but has rank {rank}")]
    RankMismatch { unit: String, name: String, given: usize, rank: usize },
    #[error("recursive call chain through `{0}`")]
    Recursion(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    pub name: String,
    pub ty: BaseType,
    pub explicit: bool,
    pub dims: Vec<DimBound>,
    pub parameter: Option<Expr>,
    pub intent: Option<Intent>,
    /// Position in the dummy argument list.
    pub dummy: Option<usize>,
    /// Common block and position within it.
    pub common: Option<(String, usize)>,
}

impl Symbol {
    pub fn is_array(&self) -> bool {
        !self.dims.is_empty()
    }
}

/// Variables of one unit in declaration order, followed by implicitly
/// typed names in order of first use.
#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    pub symbols: Vec<Symbol>,
    index: HashMap<String, usize>,
}

impl SymbolTable {
    pub fn get(&self, name: &str) -> Option<&Symbol> {
        self.index.get(name).map(|&i| &self.symbols[i])
    }

    fn entry(&mut self, name: &str, implicit: BaseType) -> &mut Symbol {
        let i = match self.index.get(name) {
            Some(&i) => i,
            None => {
                self.symbols.push(Symbol {
                    name: name.to_string(),
                    ty: implicit,
                    explicit: false,
                    dims: vec![],
                    parameter: None,
                    intent: None,
                    dummy: None,
                    common: None,
                });
                self.index.insert(name.to_string(), self.symbols.len() - 1);
                self.symbols.len() - 1
            }
        };
        &mut self.symbols[i]
    }

    pub fn build(unit: &SourceUnit) -> SymbolTable {
        let mut t = SymbolTable::default();
        let mut block_len: HashMap<String, usize> = HashMap::new();
        for (i, a) in unit.args.iter().enumerate() {
            t.entry(a, BaseType::implicit_for(a)).dummy = Some(i);
        }
        for d in &unit.decls {
            match d {
                Decl::ImplicitNone => {}
                Decl::Type { ty, entities } => {
                    for e in entities {
                        let s = t.entry(&e.name, *ty);
                        s.ty = *ty;
                        s.explicit = true;
                        if !e.dims.is_empty() {
                            s.dims = e.dims.clone();
                        }
                    }
                }
                Decl::Dimension(es) => {
                    for e in es {
                        t.entry(&e.name, BaseType::implicit_for(&e.name)).dims = e.dims.clone();
                    }
                }
                Decl::Parameter(ps) => {
                    for (n, e) in ps {
                        t.entry(n, BaseType::implicit_for(n)).parameter = Some(e.clone());
                    }
                }
                Decl::Common { block, entities } => {
                    let base = block_len.entry(block.clone()).or_default();
                    let start = *base;
                    *base += entities.len();
                    for (i, e) in entities.iter().enumerate() {
                        let s = t.entry(&e.name, BaseType::implicit_for(&e.name));
                        s.common = Some((block.clone(), start + i));
                        if !e.dims.is_empty() {
                            s.dims = e.dims.clone();
                        }
                    }
                }
                Decl::Var(v) => {
                    let s = t.entry(&v.name, v.ty);
                    s.ty = v.ty;
                    s.explicit = true;
                    s.dims = v.dims.clone();
                    s.intent = v.intent;
                    if v.parameter.is_some() {
                        s.parameter = v.parameter.clone();
                    }
                }
            }
        }
        let mut used = Vec::new();
        collect_names(unit, &mut used);
        for n in used {
            t.entry(&n, BaseType::implicit_for(&n));
        }
        t
    }
}

/// Variable names referenced in a unit's body and bounds, in order.
fn collect_names(unit: &SourceUnit, out: &mut Vec<String>) {
    let mut seen = HashSet::new();
    let mut push = |n: &str, out: &mut Vec<String>| {
        if seen.insert(n.to_string()) {
            out.push(n.to_string());
        }
    };
    let mut exprs = Vec::new();
    for d in &unit.decls {
        let es: Vec<&Entity> = match d {
            Decl::Type { entities, .. } | Decl::Dimension(entities) | Decl::Common { entities, .. } => {
                entities.iter().collect()
            }
            _ => vec![],
        };
        for e in es {
            for b in &e.dims {
                exprs.extend(b.lower.iter().cloned());
                exprs.push(b.upper.clone());
            }
        }
        if let Decl::Var(v) = d {
            for b in &v.dims {
                exprs.extend(b.lower.iter().cloned());
                exprs.push(b.upper.clone());
            }
        }
    }
    for e in &exprs {
        e.visit(&mut |x| {
            if let Expr::Var(n) | Expr::ArrayRef(n, _) = x {
                push(n, out);
            }
        });
    }
    for s in &unit.body {
        s.visit(&mut |st| {
            match &st.kind {
                StmtKind::Assign { target, .. } => push(&target.name, out),
                StmtKind::Do(d) => push(&d.var, out),
                _ => {}
            }
        });
        s.visit_exprs(&mut |x| {
            if let Expr::Var(n) | Expr::ArrayRef(n, _) = x {
                push(n, out);
            }
        });
    }
    // Function results are assigned to the function name.
    if unit.kind == UnitKind::Function {
        push(&unit.name, out);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CallGraph {
    /// Callees of each unit, in order of first call, deduplicated.
    pub callees: BTreeMap<String, Vec<String>>,
}

impl CallGraph {
    pub fn callers_of(&self, callee: &str) -> Vec<String> {
        self.callees.iter().filter(|(_, cs)| cs.iter().any(|c| c == callee)).map(|(u, _)| u.clone()).collect()
    }

    /// Callees before callers, starting from `root`. Units in a cycle are
    /// emitted in discovery order.
    pub fn bottom_up(&self, root: &str) -> Vec<String> {
        fn go(g: &CallGraph, u: &str, seen: &mut HashSet<String>, out: &mut Vec<String>) {
            if !seen.insert(u.to_string()) {
                return;
            }
            for c in g.callees.get(u).into_iter().flatten() {
                go(g, c, seen, out);
            }
            out.push(u.to_string());
        }
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        go(self, root, &mut seen, &mut out);
        for u in self.callees.keys() {
            go(self, u, &mut seen, &mut out);
        }
        out
    }

    /// Unit names that lie on a call cycle.
    pub fn recursive_units(&self) -> HashSet<String> {
        let mut out = HashSet::new();
        for u in self.callees.keys() {
            let mut stack: Vec<&str> = self.callees[u].iter().map(String::as_str).collect();
            let mut seen = HashSet::new();
            while let Some(c) = stack.pop() {
                if c == u {
                    out.insert(u.clone());
                    break;
                }
                if seen.insert(c) {
                    stack.extend(self.callees.get(c).into_iter().flatten().map(String::as_str));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ProgramAst {
    pub units: Vec<SourceUnit>,
    pub calls: CallGraph,
    pub symbols: HashMap<String, SymbolTable>,
    pub program: String,
}

impl ProgramAst {
    pub fn unit(&self, name: &str) -> Option<&SourceUnit> {
        self.units.iter().find(|u| u.name == name)
    }

    pub fn symbols_of(&self, name: &str) -> &SymbolTable {
        &self.symbols[name]
    }

    pub fn main(&self) -> &SourceUnit {
        self.unit(&self.program).expect("program unit exists")
    }
}

/// Calls made by one unit: (callee, argument count, is_function_ref).
pub fn unit_calls(u: &SourceUnit) -> Vec<(String, usize, bool)> {
    let mut out = Vec::new();
    for s in &u.body {
        s.visit(&mut |st| {
            if let StmtKind::Call { name, args } = &st.kind {
                out.push((name.clone(), args.len(), false));
            }
        });
        s.visit_exprs(&mut |e| {
            if let Expr::Call(n, args) = e {
                out.push((n.clone(), args.len(), true));
            }
        });
    }
    out
}

pub fn link(units: Vec<SourceUnit>) -> Result<ProgramAst, LinkError> {
    let mut by_name: HashMap<String, usize> = HashMap::new();
    for (i, u) in units.iter().enumerate() {
        if by_name.insert(u.name.clone(), i).is_some() {
            return Err(LinkError::DuplicateUnit(u.name.clone()));
        }
    }
    let programs: Vec<String> =
        units.iter().filter(|u| u.kind == UnitKind::Program).map(|u| u.name.clone()).collect();
    let program = match programs.len() {
        0 => return Err(LinkError::NoProgramUnit),
        1 => programs[0].clone(),
        _ => return Err(LinkError::MultipleProgramUnits(programs)),
    };
    let mut calls = CallGraph::default();
    let mut symbols = HashMap::new();
    for u in &units {
        let mut cs: Vec<String> = Vec::new();
        for (callee, given, is_fn) in unit_calls(u) {
            let Some(&ci) = by_name.get(&callee) else {
                return Err(LinkError::UnresolvedCallee { caller: u.name.clone(), callee });
            };
            let target = &units[ci];
            let ok_kind = match target.kind {
                UnitKind::Function => is_fn,
                UnitKind::Subroutine => !is_fn,
                UnitKind::Program => false,
            };
            if !ok_kind {
                let kind = match target.kind {
                    UnitKind::Function => "function",
                    UnitKind::Subroutine => "subroutine",
                    UnitKind::Program => "program",
                };
                return Err(LinkError::WrongKind { caller: u.name.clone(), callee, kind });
            }
            if given != target.args.len() {
                return Err(LinkError::ArityMismatch {
                    caller: u.name.clone(),
                    callee,
                    given,
                    expected: target.args.len(),
                });
            }
            if !cs.contains(&callee) {
                cs.push(callee);
            }
        }
        calls.callees.insert(u.name.clone(), cs);
        let table = SymbolTable::build(u);
        if u.implicit_none() {
            if let Some(s) = table.symbols.iter().find(|s| !s.explicit) {
                return Err(LinkError::Undeclared { unit: u.name.clone(), name: s.name.clone() });
            }
        }
        check_ranks(u, &table)?;
        symbols.insert(u.name.clone(), table);
    }
    if let Some(r) = calls.recursive_units().into_iter().min() {
        return Err(LinkError::Recursion(r));
    }
    Ok(ProgramAst { units, calls, symbols, program })
}

fn check_ranks(u: &SourceUnit, table: &SymbolTable) -> Result<(), LinkError> {
    let mut bad = None;
    let mut check = |name: &str, given: usize| {
        if let Some(s) = table.get(name) {
            if given != s.dims.len() && bad.is_none() {
                bad = Some(LinkError::RankMismatch {
                    unit: u.name.clone(),
                    name: name.to_string(),
                    given,
                    rank: s.dims.len(),
                });
            }
        }
    };
    for s in &u.body {
        s.visit(&mut |st| {
            if let StmtKind::Assign { target, .. } = &st.kind {
                if !target.indices.is_empty() {
                    check(&target.name, target.indices.len());
                }
            }
        });
        s.visit_exprs(&mut |e| {
            if let Expr::ArrayRef(n, xs) = e {
                check(n, xs.len());
            }
        });
    }
    bad.map_or(Ok(()), Err)
}
