//! Explicit declarations for every name, in a canonical order.

use std::collections::HashMap;

use super::report::ImplicitDecl;
use super::RefactorError;
use crate::frontend::link::SymbolTable;
use crate::frontend::{Decl, Expr, Intent, ProgramAst, SourceUnit, VarDecl};

pub fn make_explicit(prog: &mut ProgramAst) -> Result<Vec<ImplicitDecl>, RefactorError> {
    let mut added = Vec::new();
    for u in &mut prog.units {
        check_conflicts(u)?;
        let table = &prog.symbols[&u.name];
        for s in &table.symbols {
            if !s.explicit {
                if u.implicit_none() {
                    return Err(RefactorError::Undeclared { unit: u.name.clone(), name: s.name.clone() });
                }
                added.push(ImplicitDecl { unit: u.name.clone(), name: s.name.clone(), ty: s.ty });
            }
        }
        u.decls = canonical_decls(u, table, &HashMap::new());
    }
    Ok(added)
}

fn check_conflicts(u: &SourceUnit) -> Result<(), RefactorError> {
    let mut seen = HashMap::new();
    let mut dims = HashMap::new();
    for d in &u.decls {
        let typed: Vec<(&str, _)> = match d {
            Decl::Type { ty, entities } => entities.iter().map(|e| (e.name.as_str(), *ty)).collect(),
            Decl::Var(v) => vec![(v.name.as_str(), v.ty)],
            _ => vec![],
        };
        for (n, ty) in typed {
            if seen.insert(n.to_string(), ty).is_some_and(|old| old != ty) {
                return Err(RefactorError::ConflictingDeclaration { unit: u.name.clone(), name: n.to_string() });
            }
        }
        let shaped: Vec<&str> = match d {
            Decl::Type { entities, .. } | Decl::Dimension(entities) | Decl::Common { entities, .. } => {
                entities.iter().filter(|e| !e.dims.is_empty()).map(|e| e.name.as_str()).collect()
            }
            Decl::Var(v) if !v.dims.is_empty() => vec![v.name.as_str()],
            _ => vec![],
        };
        for n in shaped {
            if dims.insert(n.to_string(), ()).is_some() {
                return Err(RefactorError::ConflictingDeclaration { unit: u.name.clone(), name: n.to_string() });
            }
        }
    }
    Ok(())
}

/// `implicit none`, PARAMETER constants (dependencies first), dummies in
/// argument order, remaining variables in order of first appearance, then
/// any COMMON statements reduced to name lists.
pub fn canonical_decls(u: &SourceUnit, table: &SymbolTable, intents: &HashMap<String, Intent>) -> Vec<Decl> {
    let mut decls = vec![Decl::ImplicitNone];
    let params: Vec<_> = table.symbols.iter().filter(|s| s.parameter.is_some()).collect();
    let mut emitted: Vec<String> = Vec::new();
    let mut pending = params.clone();
    while !pending.is_empty() {
        let before = pending.len();
        let mut rest = Vec::new();
        for s in pending {
            let mut deps_ok = true;
            s.parameter.as_ref().expect("parameter").visit(&mut |e| {
                if let Expr::Var(n) = e {
                    if params.iter().any(|p| &p.name == n) && !emitted.contains(n) {
                        deps_ok = false;
                    }
                }
            });
            if deps_ok {
                emitted.push(s.name.clone());
                decls.push(Decl::Var(VarDecl {
                    name: s.name.clone(),
                    ty: s.ty,
                    dims: s.dims.clone(),
                    intent: None,
                    parameter: s.parameter.clone(),
                }));
            } else {
                rest.push(s);
            }
        }
        if rest.len() == before {
            // cyclic; keep source order
            for s in rest {
                decls.push(Decl::Var(VarDecl {
                    name: s.name.clone(),
                    ty: s.ty,
                    dims: s.dims.clone(),
                    intent: None,
                    parameter: s.parameter.clone(),
                }));
            }
            break;
        }
        pending = rest;
    }
    let var = |s: &crate::frontend::link::Symbol| {
        Decl::Var(VarDecl {
            name: s.name.clone(),
            ty: s.ty,
            dims: s.dims.clone(),
            intent: if s.dummy.is_some() { intents.get(&s.name).copied().or(s.intent) } else { None },
            parameter: None,
        })
    };
    for a in &u.args {
        if let Some(s) = table.get(a) {
            decls.push(var(s));
        }
    }
    for s in &table.symbols {
        if s.parameter.is_none() && s.dummy.is_none() {
            decls.push(var(s));
        }
    }
    for (block, entities) in u.common_blocks() {
        let entities = entities
            .into_iter()
            .map(|mut e| {
                e.dims.clear();
                e
            })
            .collect();
        decls.push(Decl::Common { block, entities });
    }
    decls
}
