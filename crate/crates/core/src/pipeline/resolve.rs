//! Constant folding of PARAMETERs, array shapes and loop bounds.

use std::collections::BTreeMap;

use crate::analysis::FunctionalIr;
use crate::eval::value::{self, Value};
use crate::frontend::Expr;

pub type Consts = BTreeMap<String, Value>;

pub fn const_eval(e: &Expr, env: &Consts) -> Option<Value> {
    Some(match e {
        Expr::Int(i) => Value::Int(*i),
        Expr::Real(r) => Value::Real(*r),
        Expr::Logical(b) => Value::Logical(*b),
        Expr::Var(n) => *env.get(n)?,
        Expr::Unary(op, x) => value::unary(*op, const_eval(x, env)?).ok()?,
        Expr::Binary(op, a, b) => value::binary(*op, const_eval(a, env)?, const_eval(b, env)?).ok()?,
        Expr::Intrinsic(f, xs) => {
            let args = xs.iter().map(|x| const_eval(x, env)).collect::<Option<Vec<_>>>()?;
            value::intrinsic(*f, &args).ok()?
        }
        Expr::ArrayRef(..) | Expr::Call(..) => return None,
    })
}

/// PARAMETER values with `overrides` applied, in declaration order.
pub fn resolve_constants(ir: &FunctionalIr, overrides: &BTreeMap<String, i32>) -> Consts {
    let mut env = Consts::new();
    for (name, e) in &ir.constants {
        let v = match overrides.get(name) {
            Some(&o) => Some(Value::Int(o)),
            None => const_eval(e, &env),
        };
        if let Some(v) = v {
            let ty = ir.scalars.get(name).copied();
            let v = match ty {
                Some(t) => v.convert(t).unwrap_or(v),
                None => v,
            };
            env.insert(name.clone(), v);
        }
    }
    env
}

pub fn resolve_bounds(bounds: &[(Expr, Expr)], env: &Consts) -> Option<Vec<(i32, i32)>> {
    bounds
        .iter()
        .map(|(lo, hi)| Some((const_eval(lo, env)?.as_i32(), const_eval(hi, env)?.as_i32())))
        .collect()
}
