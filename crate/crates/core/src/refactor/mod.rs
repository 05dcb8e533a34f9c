//! Source-to-source modernisation: explicit types, intents, modules,
//! COMMON elimination and structured loops.

mod common;
mod implicit;
mod intent;
mod loops;
mod modules;
mod report;

use std::collections::HashMap;

use thiserror::Error;

use crate::frontend::{link, print_free, Intent, LinkError, ProgramAst};

pub use common::CommonResult;
pub use intent::IntentMap;
pub use modules::module_name;
pub use report::{DroppedVar, ImplicitDecl, RefactorReport, RenamedVar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RefactorError {
    #[error("`{name}` in `{unit}` is declared with conflicting types or shapes")]
    ConflictingDeclaration { unit: String, name: String },
    #[error("`{name}` in `{unit}` is used without a declaration under IMPLICIT NONE")]
    Undeclared { unit: String, name: String },
    #[error(transparent)]
    Link(#[from] LinkError),
}

fn relink(prog: ProgramAst) -> Result<ProgramAst, RefactorError> {
    Ok(link(prog.units)?)
}

/// Rewrites declarations of every unit into canonical order.
fn recanonicalize(prog: ProgramAst, intents: &IntentMap) -> Result<ProgramAst, RefactorError> {
    let mut prog = relink(prog)?;
    for u in &mut prog.units {
        let mine: HashMap<String, Intent> =
            intents.get(&u.name).map(|m| m.iter().map(|(k, v)| (k.clone(), *v)).collect()).unwrap_or_default();
        u.decls = implicit::canonical_decls(u, &prog.symbols[&u.name], &mine);
    }
    relink(prog)
}

pub fn normalize_loops(prog: &ProgramAst) -> (ProgramAst, usize) {
    let mut p = prog.clone();
    let n = loops::normalize_units(&mut p);
    (p, n)
}

pub fn make_types_explicit(prog: &ProgramAst) -> Result<(ProgramAst, Vec<ImplicitDecl>), RefactorError> {
    let mut p = prog.clone();
    let added = implicit::make_explicit(&mut p)?;
    Ok((relink(p)?, added))
}

pub fn eliminate_common_blocks(prog: &ProgramAst) -> Result<(ProgramAst, CommonResult), RefactorError> {
    let mut p = prog.clone();
    let r = common::eliminate(&mut p);
    Ok((recanonicalize(p, &IntentMap::new())?, r))
}

pub fn infer_intents(prog: &ProgramAst) -> Result<(ProgramAst, IntentMap), RefactorError> {
    let intents = intent::infer(prog);
    Ok((recanonicalize(prog.clone(), &intents)?, intents))
}

pub fn modularize_units(prog: &ProgramAst) -> Result<(ProgramAst, Vec<String>), RefactorError> {
    let mut p = prog.clone();
    let m = modules::modularize(&mut p);
    Ok((relink(p)?, m))
}

/// The full pipeline, in dependency order.
pub fn refactor(prog: &ProgramAst) -> Result<(ProgramAst, RefactorReport), RefactorError> {
    let (p, loops_normalized) = normalize_loops(prog);
    let (p, implicit_decls) = make_types_explicit(&p)?;
    let (p, common) = eliminate_common_blocks(&p)?;
    let (p, intents) = infer_intents(&p)?;
    let (p, modules) = modularize_units(&p)?;
    let report = RefactorReport {
        implicit_decls_added: implicit_decls.len(),
        implicit_decls,
        intents_inferred: intents,
        common_vars_promoted: common.promoted,
        common_vars_dropped: common.dropped,
        renamed: common.renamed,
        loops_normalized,
        modules,
    };
    Ok((p, report))
}

/// Free-form text, one file per input path (extension replaced by `.f95`).
pub fn emit_f95(prog: &ProgramAst) -> Vec<(String, String)> {
    let mut paths: Vec<&str> = Vec::new();
    for u in &prog.units {
        if !paths.contains(&u.path.as_str()) {
            paths.push(&u.path);
        }
    }
    paths
        .into_iter()
        .map(|path| {
            let units: Vec<_> = prog.units.iter().filter(|u| u.path == path).cloned().collect();
            let stem = match path.rfind('.') {
                Some(i) if !path[i..].contains('/') => &path[..i],
                _ => path,
            };
            (format!("{stem}.f95"), print_free(&units))
        })
        .collect()
}
