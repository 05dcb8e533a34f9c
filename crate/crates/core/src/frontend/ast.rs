//! Syntax tree for the supported FORTRAN 77 subset and the free-form
//! Fortran 95 shape produced by the refactorings.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Source position. Compares equal to every other span so that trees
/// can be compared modulo locations.
#[derive(Debug, Clone, Copy, Default, Eq, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Span {
    pub fn new(line: usize, col: usize) -> Self {
        Self { line, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseType {
    Real,
    Integer,
    Logical,
}

impl BaseType {
    /// The FORTRAN 77 default: names starting with i..n are integer.
    pub fn implicit_for(name: &str) -> BaseType {
        match name.chars().next() {
            Some('i'..='n') => BaseType::Integer,
            _ => BaseType::Real,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            BaseType::Real => "real",
            BaseType::Integer => "integer",
            BaseType::Logical => "logical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnitKind {
    Program,
    Subroutine,
    Function,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Intent {
    In,
    Out,
    InOut,
}

impl Intent {
    pub fn keyword(self) -> &'static str {
        match self {
            Intent::In => "in",
            Intent::Out => "out",
            Intent::InOut => "inout",
        }
    }
}

/// One dimension `lower:upper`; a missing lower bound means 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimBound {
    pub lower: Option<Expr>,
    pub upper: Expr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub name: String,
    pub dims: Vec<DimBound>,
}

/// Canonical single-variable declaration, the form every declaration
/// takes after the refactorings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarDecl {
    pub name: String,
    pub ty: BaseType,
    pub dims: Vec<DimBound>,
    pub intent: Option<Intent>,
    pub parameter: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Decl {
    ImplicitNone,
    Type { ty: BaseType, entities: Vec<Entity> },
    Dimension(Vec<Entity>),
    Parameter(Vec<(String, Expr)>),
    Common { block: String, entities: Vec<Entity> },
    Var(VarDecl),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Use {
    pub module: String,
    pub only: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub path: String,
    pub kind: UnitKind,
    pub name: String,
    pub args: Vec<String>,
    /// Enclosing module, once the unit has been modularised.
    pub module: Option<String>,
    pub uses: Vec<Use>,
    pub decls: Vec<Decl>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

impl SourceUnit {
    pub fn implicit_none(&self) -> bool {
        self.decls.iter().any(|d| matches!(d, Decl::ImplicitNone))
    }

    /// `(block, members)` in declaration order; repeated COMMON
    /// statements for one block are concatenated.
    pub fn common_blocks(&self) -> Vec<(String, Vec<Entity>)> {
        let mut out: Vec<(String, Vec<Entity>)> = Vec::new();
        for d in &self.decls {
            if let Decl::Common { block, entities } = d {
                match out.iter_mut().find(|(b, _)| b == block) {
                    Some((_, e)) => e.extend(entities.iter().cloned()),
                    None => out.push((block.clone(), entities.clone())),
                }
            }
        }
        out
    }

    pub fn has_common(&self) -> bool {
        self.decls.iter().any(|d| matches!(d, Decl::Common { .. }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stmt {
    pub label: Option<u32>,
    pub kind: StmtKind,
    pub span: Span,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Self { label: None, kind, span: Span::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LValue {
    pub name: String,
    pub indices: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoLoop {
    pub var: String,
    pub start: Expr,
    pub end: Expr,
    pub step: Option<Expr>,
    pub body: Vec<Stmt>,
    /// `Some(l)` for the label-terminated form `do l var = ...`; the
    /// terminal statement is the last element of `body`.
    pub term_label: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StmtKind {
    Assign { target: LValue, value: Expr },
    Do(DoLoop),
    If { arms: Vec<(Expr, Vec<Stmt>)>, otherwise: Option<Vec<Stmt>> },
    Call { name: String, args: Vec<Expr> },
    Continue,
    Return,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Intrinsic {
    Abs,
    Min,
    Max,
    Sqrt,
    Mod,
}

impl Intrinsic {
    pub fn from_name(name: &str) -> Option<Intrinsic> {
        Some(match name {
            "abs" => Intrinsic::Abs,
            "min" => Intrinsic::Min,
            "max" => Intrinsic::Max,
            "sqrt" => Intrinsic::Sqrt,
            "mod" => Intrinsic::Mod,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Intrinsic::Abs => "abs",
            Intrinsic::Min => "min",
            Intrinsic::Max => "max",
            Intrinsic::Sqrt => "sqrt",
            Intrinsic::Mod => "mod",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
            BinOp::Pow => 7,
        }
    }

    pub fn is_relational(self) -> bool {
        self.precedence() == 4
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "**",
            BinOp::Lt => ".lt.",
            BinOp::Le => ".le.",
            BinOp::Gt => ".gt.",
            BinOp::Ge => ".ge.",
            BinOp::Eq => ".eq.",
            BinOp::Ne => ".ne.",
            BinOp::And => ".and.",
            BinOp::Or => ".or.",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Int(i32),
    Real(f32),
    Logical(bool),
    /// Scalar reference, or a whole array when passed as an argument.
    Var(String),
    ArrayRef(String, Vec<Expr>),
    Intrinsic(Intrinsic, Vec<Expr>),
    /// Reference to a user FUNCTION.
    Call(String, Vec<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Unary(UnOp::Not, _) => 3,
            Expr::Unary(UnOp::Neg, _) => 5,
            Expr::Int(i) if *i < 0 => 5,
            Expr::Real(r) if r.is_sign_negative() => 5,
            _ => 8,
        }
    }

    /// Pre-order traversal.
    pub fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::ArrayRef(_, xs) | Expr::Intrinsic(_, xs) | Expr::Call(_, xs) => {
                xs.iter().for_each(|x| x.visit(f))
            }
            Expr::Unary(_, x) => x.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    /// Post-order mutable traversal.
    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Expr)) {
        match self {
            Expr::ArrayRef(_, xs) | Expr::Intrinsic(_, xs) | Expr::Call(_, xs) => {
                xs.iter_mut().for_each(|x| x.visit_mut(f))
            }
            Expr::Unary(_, x) => x.visit_mut(f),
            Expr::Binary(_, a, b) => {
                a.visit_mut(f);
                b.visit_mut(f);
            }
            _ => {}
        }
        f(self);
    }

    /// Renames variable, array and function names through `f`.
    pub fn rename(&mut self, f: &dyn Fn(&str) -> Option<String>) {
        self.visit_mut(&mut |e| match e {
            Expr::Var(n) | Expr::ArrayRef(n, _) | Expr::Call(n, _) => {
                if let Some(m) = f(n) {
                    *n = m;
                }
            }
            _ => {}
        });
    }
}

impl Stmt {
    /// Every expression in this statement and its children, including
    /// assignment subscripts and loop bounds.
    pub fn visit_exprs(&self, f: &mut dyn FnMut(&Expr)) {
        match &self.kind {
            StmtKind::Assign { target, value } => {
                target.indices.iter().for_each(|x| x.visit(f));
                value.visit(f);
            }
            StmtKind::Do(d) => {
                d.start.visit(f);
                d.end.visit(f);
                if let Some(s) = &d.step {
                    s.visit(f);
                }
                d.body.iter().for_each(|s| s.visit_exprs(f));
            }
            StmtKind::If { arms, otherwise } => {
                for (c, b) in arms {
                    c.visit(f);
                    b.iter().for_each(|s| s.visit_exprs(f));
                }
                if let Some(b) = otherwise {
                    b.iter().for_each(|s| s.visit_exprs(f));
                }
            }
            StmtKind::Call { args, .. } => args.iter().for_each(|x| x.visit(f)),
            StmtKind::Continue | StmtKind::Return => {}
        }
    }

    pub fn visit_exprs_mut(&mut self, f: &mut dyn FnMut(&mut Expr)) {
        match &mut self.kind {
            StmtKind::Assign { target, value } => {
                target.indices.iter_mut().for_each(|x| x.visit_mut(f));
                value.visit_mut(f);
            }
            StmtKind::Do(d) => {
                d.start.visit_mut(f);
                d.end.visit_mut(f);
                if let Some(s) = &mut d.step {
                    s.visit_mut(f);
                }
                d.body.iter_mut().for_each(|s| s.visit_exprs_mut(f));
            }
            StmtKind::If { arms, otherwise } => {
                for (c, b) in arms {
                    c.visit_mut(f);
                    b.iter_mut().for_each(|s| s.visit_exprs_mut(f));
                }
                if let Some(b) = otherwise {
                    b.iter_mut().for_each(|s| s.visit_exprs_mut(f));
                }
            }
            StmtKind::Call { args, .. } => args.iter_mut().for_each(|x| x.visit_mut(f)),
            StmtKind::Continue | StmtKind::Return => {}
        }
    }

    /// Pre-order traversal over this statement and nested statements.
    pub fn visit(&self, f: &mut dyn FnMut(&Stmt)) {
        f(self);
        for b in self.children() {
            b.iter().for_each(|s| s.visit(f));
        }
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Stmt)) {
        f(self);
        for b in self.children_mut() {
            b.iter_mut().for_each(|s| s.visit_mut(f));
        }
    }

    pub fn children(&self) -> Vec<&Vec<Stmt>> {
        match &self.kind {
            StmtKind::Do(d) => vec![&d.body],
            StmtKind::If { arms, otherwise } => {
                let mut v: Vec<&Vec<Stmt>> = arms.iter().map(|(_, b)| b).collect();
                if let Some(b) = otherwise {
                    v.push(b);
                }
                v
            }
            _ => Vec::new(),
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Vec<Stmt>> {
        match &mut self.kind {
            StmtKind::Do(d) => vec![&mut d.body],
            StmtKind::If { arms, otherwise } => {
                let mut v: Vec<&mut Vec<Stmt>> = arms.iter_mut().map(|(_, b)| b).collect();
                if let Some(b) = otherwise {
                    v.push(b);
                }
                v
            }
            _ => Vec::new(),
        }
    }

    /// Renames every variable, array, callee and loop variable.
    pub fn rename(&mut self, f: &dyn Fn(&str) -> Option<String>) {
        self.visit_mut(&mut |s| {
            match &mut s.kind {
                StmtKind::Assign { target, .. } => {
                    if let Some(m) = f(&target.name) {
                        target.name = m;
                    }
                }
                StmtKind::Do(d) => {
                    if let Some(m) = f(&d.var) {
                        d.var = m;
                    }
                }
                _ => {}
            }
        });
        self.visit_exprs_mut(&mut |e| {
            if let Expr::Var(n) | Expr::ArrayRef(n, _) = e {
                if let Some(m) = f(n) {
                    *n = m;
                }
            }
        });
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::printer::expr_to_string(self))
    }
}
