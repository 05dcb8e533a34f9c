//! Scalar values and the arithmetic shared by the evaluator and the
//! compiled elemental functions.

use serde::{Deserialize, Serialize};

use crate::frontend::{BaseType, BinOp, Intrinsic, UnOp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Int(i32),
    Real(f32),
    Logical(bool),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValueError {
    #[error("integer division by zero")]
    DivisionByZero,
    #[error("operator {op} applied to {found}")]
    Type { op: &'static str, found: &'static str },
}

impl Value {
    pub fn zero(ty: BaseType) -> Value {
        match ty {
            BaseType::Real => Value::Real(0.0),
            BaseType::Integer => Value::Int(0),
            BaseType::Logical => Value::Logical(false),
        }
    }

    pub fn base_type(self) -> BaseType {
        match self {
            Value::Int(_) => BaseType::Integer,
            Value::Real(_) => BaseType::Real,
            Value::Logical(_) => BaseType::Logical,
        }
    }

    pub fn type_name(self) -> &'static str {
        match self {
            Value::Int(_) => "integer",
            Value::Real(_) => "real",
            Value::Logical(_) => "logical",
        }
    }

    pub fn as_f32(self) -> f32 {
        match self {
            Value::Int(i) => i as f32,
            Value::Real(r) => r,
            Value::Logical(b) => b as i32 as f32,
        }
    }

    pub fn as_i32(self) -> i32 {
        match self {
            Value::Int(i) => i,
            Value::Real(r) => r as i32,
            Value::Logical(b) => b as i32,
        }
    }

    pub fn as_bool(self) -> Result<bool, ValueError> {
        match self {
            Value::Logical(b) => Ok(b),
            v => Err(ValueError::Type { op: "logical test", found: v.type_name() }),
        }
    }

    /// Assignment conversion to a declared type.
    pub fn convert(self, ty: BaseType) -> Result<Value, ValueError> {
        Ok(match (ty, self) {
            (BaseType::Real, v @ (Value::Int(_) | Value::Real(_))) => Value::Real(v.as_f32()),
            (BaseType::Integer, v @ (Value::Int(_) | Value::Real(_))) => Value::Int(v.as_i32()),
            (BaseType::Logical, Value::Logical(b)) => Value::Logical(b),
            (_, v) => return Err(ValueError::Type { op: "assignment", found: v.type_name() }),
        })
    }
}

fn ipow(base: i32, exp: i32) -> i32 {
    if exp < 0 {
        return match base {
            1 => 1,
            -1 if exp % 2 == 0 => 1,
            -1 => -1,
            _ => 0,
        };
    }
    base.wrapping_pow(exp as u32)
}

pub fn unary(op: UnOp, v: Value) -> Result<Value, ValueError> {
    match (op, v) {
        (UnOp::Neg, Value::Int(i)) => Ok(Value::Int(i.wrapping_neg())),
        (UnOp::Neg, Value::Real(r)) => Ok(Value::Real(-r)),
        (UnOp::Not, Value::Logical(b)) => Ok(Value::Logical(!b)),
        (_, v) => Err(ValueError::Type { op: "unary operator", found: v.type_name() }),
    }
}

pub fn binary(op: BinOp, a: Value, b: Value) -> Result<Value, ValueError> {
    use BinOp::*;
    match op {
        And | Or => {
            let (x, y) = (a.as_bool()?, b.as_bool()?);
            return Ok(Value::Logical(if op == And { x && y } else { x || y }));
        }
        _ => {}
    }
    if matches!(a, Value::Logical(_)) || matches!(b, Value::Logical(_)) {
        let bad = if matches!(a, Value::Logical(_)) { a } else { b };
        return Err(ValueError::Type { op: op.symbol(), found: bad.type_name() });
    }
    if let (Value::Int(x), Value::Int(y)) = (a, b) {
        return Ok(match op {
            Add => Value::Int(x.wrapping_add(y)),
            Sub => Value::Int(x.wrapping_sub(y)),
            Mul => Value::Int(x.wrapping_mul(y)),
            Div => {
                if y == 0 {
                    return Err(ValueError::DivisionByZero);
                }
                Value::Int(x.wrapping_div(y))
            }
            Pow => Value::Int(ipow(x, y)),
            Lt => Value::Logical(x < y),
            Le => Value::Logical(x <= y),
            Gt => Value::Logical(x > y),
            Ge => Value::Logical(x >= y),
            Eq => Value::Logical(x == y),
            Ne => Value::Logical(x != y),
            And | Or => unreachable!(),
        });
    }
    if op == Pow {
        if let (Value::Real(x), Value::Int(y)) = (a, b) {
            return Ok(Value::Real(x.powi(y)));
        }
    }
    let (x, y) = (a.as_f32(), b.as_f32());
    Ok(match op {
        Add => Value::Real(x + y),
        Sub => Value::Real(x - y),
        Mul => Value::Real(x * y),
        Div => Value::Real(x / y),
        Pow => Value::Real(x.powf(y)),
        Lt => Value::Logical(x < y),
        Le => Value::Logical(x <= y),
        Gt => Value::Logical(x > y),
        Ge => Value::Logical(x >= y),
        Eq => Value::Logical(x == y),
        Ne => Value::Logical(x != y),
        And | Or => unreachable!(),
    })
}

pub fn intrinsic(f: Intrinsic, args: &[Value]) -> Result<Value, ValueError> {
    let bad = |v: Value| ValueError::Type { op: f.name(), found: v.type_name() };
    let arity_ok = match f {
        Intrinsic::Abs | Intrinsic::Sqrt => args.len() == 1,
        Intrinsic::Mod => args.len() == 2,
        Intrinsic::Min | Intrinsic::Max => args.len() >= 2,
    };
    if !arity_ok {
        return Err(ValueError::Type { op: f.name(), found: "wrong number of arguments" });
    }
    if let Some(v) = args.iter().find(|v| matches!(v, Value::Logical(_))) {
        return Err(bad(*v));
    }
    let all_int = args.iter().all(|v| matches!(v, Value::Int(_)));
    Ok(match f {
        Intrinsic::Abs => match args[0] {
            Value::Int(i) => Value::Int(i.wrapping_abs()),
            v => Value::Real(v.as_f32().abs()),
        },
        Intrinsic::Sqrt => Value::Real(args[0].as_f32().sqrt()),
        Intrinsic::Mod if all_int => {
            let (x, y) = (args[0].as_i32(), args[1].as_i32());
            if y == 0 {
                return Err(ValueError::DivisionByZero);
            }
            Value::Int(x.wrapping_rem(y))
        }
        Intrinsic::Mod => Value::Real(args[0].as_f32() % args[1].as_f32()),
        Intrinsic::Min | Intrinsic::Max => {
            let pick_first = |x: f32, y: f32| if f == Intrinsic::Min { y < x } else { y > x };
            if all_int {
                let it = args.iter().map(|v| v.as_i32());
                Value::Int(if f == Intrinsic::Min { it.min().unwrap() } else { it.max().unwrap() })
            } else {
                let mut best = args[0].as_f32();
                for v in &args[1..] {
                    let y = v.as_f32();
                    if pick_first(best, y) {
                        best = y;
                    }
                }
                Value::Real(best)
            }
        }
    })
}
