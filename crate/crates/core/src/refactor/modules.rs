//! One module per non-program unit, with `use ..., only:` imports.

use crate::frontend::{ProgramAst, UnitKind, Use};

pub fn module_name(unit: &str) -> String {
    format!("module_{unit}")
}

pub fn modularize(prog: &mut ProgramAst) -> Vec<String> {
    let mut modules = Vec::new();
    for u in &mut prog.units {
        u.module = if u.kind == UnitKind::Program {
            None
        } else {
            modules.push(module_name(&u.name));
            Some(module_name(&u.name))
        };
        u.uses = prog.calls.callees[&u.name]
            .iter()
            .map(|c| Use { module: module_name(c), only: vec![c.clone()] })
            .collect();
    }
    modules
}
