//! Pretty printers for fixed-form FORTRAN 77 and free-form Fortran 95.

use super::ast::*;

const FIXED_WIDTH: usize = 72;
const FREE_WIDTH: usize = 100;

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn real_literal(r: f32) -> String {
    let s = format!("{:?}", r.abs());
    let s = if s.contains('.') || s.contains('e') { s } else { format!("{s}.0") };
    if r.is_sign_negative() {
        format!("-{s}")
    } else {
        s
    }
}

fn write_child(s: &mut String, e: &Expr, parens: bool) {
    if parens {
        s.push('(');
        write_expr(s, e);
        s.push(')');
    } else {
        write_expr(s, e);
    }
}

fn write_args(s: &mut String, xs: &[Expr]) {
    s.push('(');
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        write_expr(s, x);
    }
    s.push(')');
}

fn write_expr(s: &mut String, e: &Expr) {
    match e {
        Expr::Int(i) => s.push_str(&i.to_string()),
        Expr::Real(r) => s.push_str(&real_literal(*r)),
        Expr::Logical(b) => s.push_str(if *b { ".true." } else { ".false." }),
        Expr::Var(n) => s.push_str(n),
        Expr::ArrayRef(n, xs) | Expr::Call(n, xs) => {
            s.push_str(n);
            write_args(s, xs);
        }
        Expr::Intrinsic(i, xs) => {
            s.push_str(i.name());
            write_args(s, xs);
        }
        Expr::Unary(UnOp::Neg, x) => {
            s.push('-');
            write_child(s, x, x.precedence() <= 5);
        }
        Expr::Unary(UnOp::Not, x) => {
            s.push_str(".not. ");
            write_child(s, x, x.precedence() < 3);
        }
        Expr::Binary(op, a, b) => {
            let p = op.precedence();
            let lp = a.precedence();
            let left = lp < p || (lp == p && (*op == BinOp::Pow || op.is_relational()));
            let rp = b.precedence();
            let right = rp < p || (rp == p && *op != BinOp::Pow) || matches!(**b, Expr::Unary(UnOp::Neg, _));
            write_child(s, a, left);
            match op {
                BinOp::Mul | BinOp::Div | BinOp::Pow => s.push_str(op.symbol()),
                _ => {
                    s.push(' ');
                    s.push_str(op.symbol());
                    s.push(' ');
                }
            }
            write_child(s, b, right);
        }
    }
}

fn dims_to_string(dims: &[DimBound]) -> String {
    if dims.is_empty() {
        return String::new();
    }
    let parts: Vec<String> = dims
        .iter()
        .map(|d| match &d.lower {
            Some(l) => format!("{}:{}", expr_to_string(l), expr_to_string(&d.upper)),
            None => expr_to_string(&d.upper),
        })
        .collect();
    format!("({})", parts.join(", "))
}

fn entities(es: &[Entity]) -> String {
    es.iter().map(|e| format!("{}{}", e.name, dims_to_string(&e.dims))).collect::<Vec<_>>().join(", ")
}

pub fn decl_to_string(d: &Decl) -> String {
    match d {
        Decl::ImplicitNone => "implicit none".into(),
        Decl::Type { ty, entities: es } => format!("{} {}", ty.keyword(), entities(es)),
        Decl::Dimension(es) => format!("dimension {}", entities(es)),
        Decl::Parameter(ps) => {
            let parts: Vec<String> = ps.iter().map(|(n, e)| format!("{n} = {}", expr_to_string(e))).collect();
            format!("parameter ({})", parts.join(", "))
        }
        Decl::Common { block, entities: es } => {
            if block.is_empty() {
                format!("common {}", entities(es))
            } else {
                format!("common /{block}/ {}", entities(es))
            }
        }
        Decl::Var(v) => {
            let mut s = v.ty.keyword().to_string();
            if v.parameter.is_some() {
                s.push_str(", parameter");
            }
            if let Some(i) = v.intent {
                s.push_str(&format!(", intent({})", i.keyword()));
            }
            s.push_str(" :: ");
            s.push_str(&v.name);
            s.push_str(&dims_to_string(&v.dims));
            if let Some(p) = &v.parameter {
                s.push_str(" = ");
                s.push_str(&expr_to_string(p));
            }
            s
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Form {
    Fixed,
    Free,
}

struct Out {
    form: Form,
    text: String,
}

impl Out {
    fn line(&mut self, label: Option<u32>, depth: usize, body: &str) {
        match self.form {
            Form::Fixed => {
                let lab = label.map(|l| l.to_string()).unwrap_or_default();
                let indent = " ".repeat((2 * depth).min(30));
                let full = format!("{indent}{body}");
                let room = FIXED_WIDTH - 6;
                let chars: Vec<char> = full.chars().collect();
                let mut chunks = chars.chunks(room);
                let first: String = chunks.next().unwrap_or(&[]).iter().collect();
                self.text.push_str(format!("{lab:<5} {first}").trim_end());
                self.text.push('\n');
                for c in chunks {
                    let c: String = c.iter().collect();
                    self.text.push_str("     &");
                    self.text.push_str(&c);
                    self.text.push('\n');
                }
            }
            Form::Free => {
                let indent = " ".repeat(2 * depth);
                let lab = label.map(|l| format!("{l} ")).unwrap_or_default();
                let mut rest = format!("{indent}{lab}{body}");
                let cont_indent = format!("{indent}    ");
                while rest.len() > FREE_WIDTH {
                    // break at the last space that leaves room for ` &`
                    let cut = rest[..FREE_WIDTH - 2].rfind(' ').filter(|&c| c > indent.len() + lab.len());
                    let Some(cut) = cut else { break };
                    self.text.push_str(rest[..cut].trim_end());
                    self.text.push_str(" &\n");
                    rest = format!("{cont_indent}&{}", rest[cut..].trim_start());
                }
                self.text.push_str(&rest);
                self.text.push('\n');
            }
        }
    }
}

fn is_simple(s: &Stmt) -> bool {
    s.label.is_none() && matches!(s.kind, StmtKind::Assign { .. } | StmtKind::Call { .. } | StmtKind::Continue | StmtKind::Return)
}

fn leaf_to_string(k: &StmtKind) -> String {
    match k {
        StmtKind::Assign { target, value } => {
            let mut t = target.name.clone();
            if !target.indices.is_empty() {
                write_args(&mut t, &target.indices);
            }
            format!("{t} = {}", expr_to_string(value))
        }
        StmtKind::Call { name, args } => {
            if args.is_empty() {
                format!("call {name}")
            } else {
                let mut s = format!("call {name}");
                write_args(&mut s, args);
                s
            }
        }
        StmtKind::Continue => "continue".into(),
        StmtKind::Return => "return".into(),
        StmtKind::Do(_) | StmtKind::If { .. } => unreachable!("not a leaf statement"),
    }
}

fn write_stmts(out: &mut Out, stmts: &[Stmt], depth: usize) {
    for s in stmts {
        write_stmt(out, s, depth);
    }
}

fn write_stmt(out: &mut Out, s: &Stmt, depth: usize) {
    match &s.kind {
        StmtKind::Do(d) => {
            let mut head = String::from("do ");
            if let Some(l) = d.term_label {
                head.push_str(&format!("{l} "));
            }
            head.push_str(&format!("{} = {}, {}", d.var, expr_to_string(&d.start), expr_to_string(&d.end)));
            if let Some(st) = &d.step {
                head.push_str(&format!(", {}", expr_to_string(st)));
            }
            out.line(s.label, depth, &head);
            write_stmts(out, &d.body, depth + 1);
            if d.term_label.is_none() {
                out.line(None, depth, "end do");
            }
        }
        StmtKind::If { arms, otherwise } => {
            if arms.len() == 1 && otherwise.is_none() && arms[0].1.len() == 1 && is_simple(&arms[0].1[0]) {
                let line = format!("if ({}) {}", expr_to_string(&arms[0].0), leaf_to_string(&arms[0].1[0].kind));
                out.line(s.label, depth, &line);
                return;
            }
            for (i, (c, body)) in arms.iter().enumerate() {
                let kw = if i == 0 { "if" } else { "else if" };
                out.line(if i == 0 { s.label } else { None }, depth, &format!("{kw} ({}) then", expr_to_string(c)));
                write_stmts(out, body, depth + 1);
            }
            if let Some(b) = otherwise {
                out.line(None, depth, "else");
                write_stmts(out, b, depth + 1);
            }
            out.line(None, depth, "end if");
        }
        k => out.line(s.label, depth, &leaf_to_string(k)),
    }
}

fn unit_keyword(k: UnitKind) -> &'static str {
    match k {
        UnitKind::Program => "program",
        UnitKind::Subroutine => "subroutine",
        UnitKind::Function => "function",
    }
}

fn write_unit(out: &mut Out, u: &SourceUnit, depth: usize) {
    let kw = unit_keyword(u.kind);
    let head = if u.kind == UnitKind::Program || (u.kind == UnitKind::Subroutine && u.args.is_empty()) {
        format!("{kw} {}", u.name)
    } else {
        format!("{kw} {}({})", u.name, u.args.join(", "))
    };
    out.line(None, depth, &head);
    for us in &u.uses {
        let line = if us.only.is_empty() {
            format!("use {}", us.module)
        } else {
            format!("use {}, only: {}", us.module, us.only.join(", "))
        };
        out.line(None, depth + 1, &line);
    }
    for d in &u.decls {
        out.line(None, depth + 1, &decl_to_string(d));
    }
    write_stmts(out, &u.body, depth + 1);
    match out.form {
        Form::Fixed => out.line(None, depth, "end"),
        Form::Free => out.line(None, depth, &format!("end {kw} {}", u.name)),
    }
}

/// Fixed-form text for a sequence of units (no module wrapping).
pub fn print_fixed(units: &[SourceUnit]) -> String {
    let mut out = Out { form: Form::Fixed, text: String::new() };
    for u in units {
        write_unit(&mut out, u, 0);
    }
    out.text
}

/// Free-form text. Consecutive units that share a module are wrapped in
/// `module ... contains ... end module`.
pub fn print_free(units: &[SourceUnit]) -> String {
    let mut out = Out { form: Form::Free, text: String::new() };
    let mut i = 0;
    while i < units.len() {
        match &units[i].module {
            None => {
                write_unit(&mut out, &units[i], 0);
                i += 1;
            }
            Some(m) => {
                out.line(None, 0, &format!("module {m}"));
                out.line(None, 0, "contains");
                while i < units.len() && units[i].module.as_deref() == Some(m.as_str()) {
                    write_unit(&mut out, &units[i], 1);
                    i += 1;
                }
                out.line(None, 0, &format!("end module {m}"));
            }
        }
    }
    out.text
}

pub fn print_unit_free(unit: &SourceUnit) -> String {
    print_free(std::slice::from_ref(unit))
}
