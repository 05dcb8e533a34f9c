//! Interprocedural INTENT inference for dummy arguments.

use std::collections::BTreeMap;

use crate::frontend::{Expr, Intent, ProgramAst, Stmt, StmtKind, UnitKind};

pub type IntentMap = BTreeMap<String, BTreeMap<String, Intent>>;

/// What the first access to a variable was, along the paths seen so far.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum First {
    Untouched,
    /// Written on some paths, untouched on others.
    Partly,
    Written,
    Read,
}

impl First {
    fn read(self) -> First {
        match self {
            First::Written => First::Written,
            _ => First::Read,
        }
    }

    fn write(self) -> First {
        match self {
            First::Read => First::Read,
            _ => First::Written,
        }
    }

    fn join(states: &[First]) -> First {
        if states.is_empty() {
            return First::Untouched;
        }
        if states.contains(&First::Read) {
            First::Read
        } else if states.iter().all(|s| *s == First::Written) {
            First::Written
        } else if states.iter().all(|s| *s == First::Untouched) {
            First::Untouched
        } else {
            First::Partly
        }
    }
}

struct Walker<'a> {
    var: &'a str,
    intents: &'a IntentMap,
    prog: &'a ProgramAst,
    read: bool,
    written: bool,
    returned: Vec<First>,
}

fn mentions(e: &Expr, var: &str) -> bool {
    let mut hit = false;
    e.visit(&mut |x| {
        if let Expr::Var(n) | Expr::ArrayRef(n, _) = x {
            hit |= n == var;
        }
    });
    hit
}

impl Walker<'_> {
    fn callee_intent(&self, callee: &str, i: usize) -> Intent {
        self.prog
            .unit(callee)
            .and_then(|u| u.args.get(i))
            .and_then(|a| self.intents.get(callee)?.get(a).copied())
            .unwrap_or(Intent::InOut)
    }

    fn on_read(&mut self, st: First) -> First {
        self.read = true;
        st.read()
    }

    fn on_write(&mut self, st: First) -> First {
        self.written = true;
        st.write()
    }

    /// Effect of evaluating an expression, including function references.
    fn expr(&mut self, mut st: First, e: &Expr) -> First {
        match e {
            Expr::Var(n) if n == self.var => self.on_read(st),
            Expr::ArrayRef(n, idx) => {
                for i in idx {
                    st = self.expr(st, i);
                }
                if n == self.var {
                    st = self.on_read(st);
                }
                st
            }
            Expr::Call(f, args) => self.actuals(st, f, args),
            Expr::Intrinsic(_, xs) => xs.iter().fold(st, |s, x| self.expr(s, x)),
            Expr::Unary(_, x) => self.expr(st, x),
            Expr::Binary(_, a, b) => {
                let s = self.expr(st, a);
                self.expr(s, b)
            }
            _ => st,
        }
    }

    fn actuals(&mut self, mut st: First, callee: &str, args: &[Expr]) -> First {
        for (i, a) in args.iter().enumerate() {
            let direct = match a {
                Expr::Var(n) => Some(n),
                Expr::ArrayRef(n, idx) => {
                    for x in idx {
                        st = self.expr(st, x);
                    }
                    Some(n)
                }
                _ => None,
            };
            match direct {
                Some(n) if n == self.var => match self.callee_intent(callee, i) {
                    Intent::In => st = self.on_read(st),
                    Intent::Out => st = self.on_write(st),
                    Intent::InOut => {
                        st = self.on_read(st);
                        st = self.on_write(st);
                    }
                },
                Some(_) => {}
                None => st = self.expr(st, a),
            }
        }
        st
    }

    /// Returns the fall-through state, or `None` if every path returned.
    fn block(&mut self, mut st: First, body: &[Stmt]) -> Option<First> {
        for s in body {
            st = self.stmt(st, s)?;
        }
        Some(st)
    }

    fn stmt(&mut self, st: First, s: &Stmt) -> Option<First> {
        Some(match &s.kind {
            StmtKind::Assign { target, value } => {
                let mut st = self.expr(st, value);
                for i in &target.indices {
                    st = self.expr(st, i);
                }
                if target.name == self.var {
                    st = self.on_write(st);
                }
                st
            }
            StmtKind::Do(d) => {
                let mut st = self.expr(st, &d.start);
                st = self.expr(st, &d.end);
                if let Some(x) = &d.step {
                    st = self.expr(st, x);
                }
                if d.var == self.var {
                    st = self.on_write(st);
                }
                // The body is taken to run at least once.
                self.block(st, &d.body)?
            }
            StmtKind::If { arms, otherwise } => {
                let mut outs = Vec::new();
                let mut cond_state = st;
                for (c, body) in arms {
                    cond_state = self.expr(cond_state, c);
                    outs.extend(self.block(cond_state, body));
                }
                match otherwise {
                    Some(body) => outs.extend(self.block(cond_state, body)),
                    None => outs.push(cond_state),
                }
                if outs.is_empty() {
                    return None;
                }
                First::join(&outs)
            }
            StmtKind::Call { name, args } => self.actuals(st, name, args),
            StmtKind::Continue => st,
            StmtKind::Return => {
                self.returned.push(st);
                return None;
            }
        })
    }
}

pub fn infer(prog: &ProgramAst) -> IntentMap {
    let mut intents = IntentMap::new();
    for name in prog.calls.bottom_up(&prog.program) {
        let u = prog.unit(&name).expect("unit");
        if u.kind == UnitKind::Program {
            continue;
        }
        let table = prog.symbols_of(&name);
        let mut mine = BTreeMap::new();
        for a in &u.args {
            let mut w = Walker { var: a, intents: &intents, prog, read: false, written: false, returned: vec![] };
            // Adjustable bounds read their scalar arguments on entry.
            let mut st = First::Untouched;
            for s in &table.symbols {
                for d in &s.dims {
                    for e in d.lower.iter().chain(std::iter::once(&d.upper)) {
                        if mentions(e, a) {
                            st = w.on_read(st);
                        }
                    }
                }
            }
            let end = w.block(st, &u.body);
            let mut finals = std::mem::take(&mut w.returned);
            finals.extend(end);
            let first = First::join(&finals);
            let is_array = table.get(a).is_some_and(|s| s.is_array());
            let intent = if !w.written {
                Intent::In
            } else if first == First::Written && !(is_array && w.read) {
                Intent::Out
            } else {
                Intent::InOut
            };
            mine.insert(a.clone(), intent);
        }
        intents.insert(name, mine);
    }
    intents
}
