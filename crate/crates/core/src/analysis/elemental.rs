//! Loop bodies compiled to elemental functions over gathered inputs.

use std::collections::{BTreeMap, BTreeSet};

use crate::eval::value::{self, Value, ValueError};
use crate::frontend::{BaseType, BinOp, Expr, Intrinsic, Stmt, StmtKind, UnOp};

#[derive(Debug, Clone, PartialEq)]
enum CExpr {
    Const(Value),
    Slot(usize),
    Local(usize),
    Out(usize),
    Param(usize),
    Index(usize),
    Un(UnOp, Box<CExpr>),
    Bin(BinOp, Box<CExpr>, Box<CExpr>),
    Intr(Intrinsic, Vec<CExpr>),
}

#[derive(Debug, Clone, PartialEq)]
enum CStmt {
    Local(usize, CExpr),
    Out(usize, CExpr),
    If(Vec<(CExpr, Vec<CStmt>)>, Option<Vec<CStmt>>),
    Emit(CExpr),
}

/// An elemental function. Per element the caller gathers one value per
/// slot (array, offset), then receives one value per output array and,
/// for folds, the element's contribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ElemFn {
    pub slots: Vec<(String, Vec<i32>)>,
    pub outputs: Vec<(String, BaseType)>,
    pub params: Vec<String>,
    pub nest_vars: Vec<String>,
    pub param_types: Vec<BaseType>,
    /// Private scalars of the body, in local-slot order.
    pub locals: Vec<(String, BaseType)>,
    local_types: Vec<BaseType>,
    out_init: Vec<Option<usize>>,
    code: Vec<CStmt>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("`{0}` has no known type")]
    UnknownName(String),
    #[error("unsupported construct in an elemental body: {0}")]
    Unsupported(String),
}

pub struct CompileInput<'a> {
    pub body: &'a [Stmt],
    pub nest_vars: &'a [String],
    pub params: &'a [String],
    /// Read accesses (array, offsets), in the order slots should take.
    pub reads: &'a [(String, Vec<i32>)],
    /// Output arrays with their element types.
    pub outputs: &'a [(String, BaseType)],
    pub must_write: &'a BTreeSet<String>,
    pub scalar_types: &'a BTreeMap<String, BaseType>,
    /// Accumulator of a fold; its update becomes the contribution.
    pub fold_acc: Option<&'a str>,
}

struct Compiler<'a> {
    input: &'a CompileInput<'a>,
    slots: Vec<(String, Vec<i32>)>,
    locals: BTreeMap<String, usize>,
    local_types: Vec<BaseType>,
}

impl Compiler<'_> {
    fn slot(&mut self, array: &str, offsets: Vec<i32>) -> usize {
        if let Some(i) = self.slots.iter().position(|(a, o)| a == array && *o == offsets) {
            return i;
        }
        self.slots.push((array.to_string(), offsets));
        self.slots.len() - 1
    }

    fn out_index(&self, name: &str) -> Option<usize> {
        self.input.outputs.iter().position(|(n, _)| n == name)
    }

    fn offsets(&self, idx: &[Expr]) -> Result<Vec<i32>, CompileError> {
        idx.iter()
            .zip(self.input.nest_vars)
            .map(|(e, v)| match e {
                Expr::Var(x) if x == v => Ok(0),
                Expr::Binary(BinOp::Add, a, b) => match (&**a, &**b) {
                    (Expr::Var(x), Expr::Int(c)) | (Expr::Int(c), Expr::Var(x)) if x == v => Ok(*c),
                    _ => Err(CompileError::Unsupported(format!("subscript {e}"))),
                },
                Expr::Binary(BinOp::Sub, a, b) => match (&**a, &**b) {
                    (Expr::Var(x), Expr::Int(c)) if x == v => Ok(-*c),
                    _ => Err(CompileError::Unsupported(format!("subscript {e}"))),
                },
                _ => Err(CompileError::Unsupported(format!("subscript {e}"))),
            })
            .collect()
    }

    fn local(&mut self, name: &str) -> Result<usize, CompileError> {
        if let Some(&i) = self.locals.get(name) {
            return Ok(i);
        }
        let ty = *self.input.scalar_types.get(name).ok_or_else(|| CompileError::UnknownName(name.to_string()))?;
        self.local_types.push(ty);
        self.locals.insert(name.to_string(), self.local_types.len() - 1);
        Ok(self.local_types.len() - 1)
    }

    fn expr(&mut self, e: &Expr) -> Result<CExpr, CompileError> {
        Ok(match e {
            Expr::Int(i) => CExpr::Const(Value::Int(*i)),
            Expr::Real(r) => CExpr::Const(Value::Real(*r)),
            Expr::Logical(b) => CExpr::Const(Value::Logical(*b)),
            Expr::Var(n) => {
                if let Some(i) = self.input.nest_vars.iter().position(|v| v == n) {
                    CExpr::Index(i)
                } else if let Some(i) = self.input.params.iter().position(|p| p == n) {
                    CExpr::Param(i)
                } else {
                    CExpr::Local(self.local(n)?)
                }
            }
            Expr::ArrayRef(n, idx) => {
                let offs = self.offsets(idx)?;
                match self.out_index(n) {
                    Some(i) if offs.iter().all(|&o| o == 0) => CExpr::Out(i),
                    Some(_) => return Err(CompileError::Unsupported(format!("{n} read at a shifted offset"))),
                    None => CExpr::Slot(self.slot(n, offs)),
                }
            }
            Expr::Unary(op, x) => CExpr::Un(*op, Box::new(self.expr(x)?)),
            Expr::Binary(op, a, b) => CExpr::Bin(*op, Box::new(self.expr(a)?), Box::new(self.expr(b)?)),
            Expr::Intrinsic(f, xs) => CExpr::Intr(*f, xs.iter().map(|x| self.expr(x)).collect::<Result<_, _>>()?),
            Expr::Call(f, _) => return Err(CompileError::Unsupported(format!("function reference {f}"))),
        })
    }

    fn stmts(&mut self, body: &[Stmt]) -> Result<Vec<CStmt>, CompileError> {
        let mut out = Vec::new();
        for s in body {
            out.push(match &s.kind {
                StmtKind::Assign { target, value } if Some(target.name.as_str()) == self.input.fold_acc => {
                    let contribution = match value {
                        Expr::Binary(_, a, b) => {
                            if matches!(&**a, Expr::Var(n) if n == &target.name) {
                                b
                            } else {
                                a
                            }
                        }
                        Expr::Intrinsic(_, xs) => {
                            if matches!(&xs[0], Expr::Var(n) if n == &target.name) {
                                &xs[1]
                            } else {
                                &xs[0]
                            }
                        }
                        _ => return Err(CompileError::Unsupported("reduction shape".into())),
                    };
                    CStmt::Emit(self.expr(contribution)?)
                }
                StmtKind::Assign { target, value } => {
                    let v = self.expr(value)?;
                    if target.indices.is_empty() {
                        CStmt::Local(self.local(&target.name)?, v)
                    } else {
                        let i = self
                            .out_index(&target.name)
                            .ok_or_else(|| CompileError::Unsupported(format!("write to {}", target.name)))?;
                        CStmt::Out(i, v)
                    }
                }
                StmtKind::If { arms, otherwise } => {
                    let mut carms = Vec::new();
                    for (c, b) in arms {
                        carms.push((self.expr(c)?, self.stmts(b)?));
                    }
                    let other = match otherwise {
                        Some(b) => Some(self.stmts(b)?),
                        None => None,
                    };
                    CStmt::If(carms, other)
                }
                StmtKind::Continue => continue,
                other => return Err(CompileError::Unsupported(format!("{other:?}"))),
            });
        }
        Ok(out)
    }
}

impl ElemFn {
    pub fn compile(input: &CompileInput) -> Result<ElemFn, CompileError> {
        let mut c = Compiler { input, slots: Vec::new(), locals: BTreeMap::new(), local_types: Vec::new() };
        for (a, o) in input.reads {
            if c.out_index(a).is_none() {
                c.slot(a, o.clone());
            }
        }
        // Outputs that are read, or not written on every path, start from
        // the old value.
        let mut out_init = Vec::new();
        let mut reads_out = BTreeSet::new();
        for (a, _) in input.reads {
            if c.out_index(a).is_some() {
                reads_out.insert(a.clone());
            }
        }
        for (name, _) in input.outputs {
            if reads_out.contains(name) || !input.must_write.contains(name) {
                out_init.push(Some(c.slot(name, vec![0; input.nest_vars.len()])));
            } else {
                out_init.push(None);
            }
        }
        let code = c.stmts(input.body)?;
        let param_types = input
            .params
            .iter()
            .map(|p| input.scalar_types.get(p).copied().ok_or_else(|| CompileError::UnknownName(p.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let mut locals: Vec<(String, BaseType)> =
            c.locals.iter().map(|(n, &i)| (n.clone(), c.local_types[i])).collect();
        locals.sort_by_key(|(n, _)| c.locals[n]);
        Ok(ElemFn {
            param_types,
            locals,
            slots: c.slots,
            outputs: input.outputs.to_vec(),
            params: input.params.to_vec(),
            nest_vars: input.nest_vars.to_vec(),
            local_types: c.local_types,
            out_init,
            code,
        })
    }

    /// Slot an output starts from, when it is not written on every path
    /// or is read before being written.
    pub fn out_init(&self, i: usize) -> Option<usize> {
        self.out_init[i]
    }

    /// Slots grouped by array, in slot order.
    pub fn streams(&self) -> Vec<(String, Vec<Vec<i32>>)> {
        let mut out: Vec<(String, Vec<Vec<i32>>)> = Vec::new();
        for (a, o) in &self.slots {
            match out.iter_mut().find(|(x, _)| x == a) {
                Some((_, v)) => v.push(o.clone()),
                None => out.push((a.clone(), vec![o.clone()])),
            }
        }
        out
    }

    /// Evaluates one element. `outs` receives one value per output.
    pub fn eval(&self, ins: &[Value], params: &[Value], idx: &[i32], outs: &mut Vec<Value>) -> Result<Option<Value>, ValueError> {
        outs.clear();
        for (i, (_, ty)) in self.outputs.iter().enumerate() {
            outs.push(match self.out_init[i] {
                Some(s) => ins[s],
                None => Value::zero(*ty),
            });
        }
        let mut locals: Vec<Value> = self.local_types.iter().map(|t| Value::zero(*t)).collect();
        let mut emit = None;
        let mut env = Env { ins, params, idx, locals: &mut locals, outs, emit: &mut emit, f: self };
        env.run(&self.code)?;
        Ok(emit)
    }
}

struct Env<'a> {
    ins: &'a [Value],
    params: &'a [Value],
    idx: &'a [i32],
    locals: &'a mut Vec<Value>,
    outs: &'a mut Vec<Value>,
    emit: &'a mut Option<Value>,
    f: &'a ElemFn,
}

impl Env<'_> {
    fn expr(&self, e: &CExpr) -> Result<Value, ValueError> {
        Ok(match e {
            CExpr::Const(v) => *v,
            CExpr::Slot(i) => self.ins[*i],
            CExpr::Local(i) => self.locals[*i],
            CExpr::Out(i) => self.outs[*i],
            CExpr::Param(i) => self.params[*i],
            CExpr::Index(i) => Value::Int(self.idx[*i]),
            CExpr::Un(op, x) => value::unary(*op, self.expr(x)?)?,
            CExpr::Bin(op, a, b) => value::binary(*op, self.expr(a)?, self.expr(b)?)?,
            CExpr::Intr(f, xs) => {
                let args = xs.iter().map(|x| self.expr(x)).collect::<Result<Vec<_>, _>>()?;
                value::intrinsic(*f, &args)?
            }
        })
    }

    fn run(&mut self, code: &[CStmt]) -> Result<(), ValueError> {
        for s in code {
            match s {
                CStmt::Local(i, e) => {
                    let v = self.expr(e)?.convert(self.f.local_types[*i])?;
                    self.locals[*i] = v;
                }
                CStmt::Out(i, e) => {
                    let v = self.expr(e)?.convert(self.f.outputs[*i].1)?;
                    self.outs[*i] = v;
                }
                CStmt::Emit(e) => *self.emit = Some(self.expr(e)?),
                CStmt::If(arms, other) => {
                    let mut taken = false;
                    for (c, b) in arms {
                        if self.expr(c)?.as_bool()? {
                            self.run(b)?;
                            taken = true;
                            break;
                        }
                    }
                    if !taken {
                        if let Some(b) = other {
                            self.run(b)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
