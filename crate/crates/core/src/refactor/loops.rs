//! Label-terminated DO loops to structured `do ... end do`.

use crate::frontend::{ProgramAst, Stmt, StmtKind};

/// Returns the number of loops rewritten.
pub fn normalize_units(prog: &mut ProgramAst) -> usize {
    let mut count = 0;
    for u in &mut prog.units {
        u.body = normalize_block(std::mem::take(&mut u.body), &mut count);
    }
    count
}

fn normalize_block(stmts: Vec<Stmt>, count: &mut usize) -> Vec<Stmt> {
    let mut out = Vec::with_capacity(stmts.len());
    for mut s in stmts {
        // Labels are only ever DO targets in the subset.
        s.label = None;
        match &mut s.kind {
            StmtKind::Do(d) => {
                if d.term_label.take().is_some() {
                    *count += 1;
                }
                d.body = normalize_block(std::mem::take(&mut d.body), count);
            }
            StmtKind::If { arms, otherwise } => {
                for (_, b) in arms.iter_mut() {
                    *b = normalize_block(std::mem::take(b), count);
                }
                if let Some(b) = otherwise {
                    *b = normalize_block(std::mem::take(b), count);
                }
            }
            StmtKind::Continue => continue,
            _ => {}
        }
        out.push(s);
    }
    out
}
