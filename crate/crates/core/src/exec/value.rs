use std::cmp::Ordering;
use std::fmt;

use crate::dsl::{BinOp, UnOp};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Unit,
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Unit => f.write_str("()"),
        }
    }
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Bool(_) => "bool",
            Value::Str(_) => "string",
            Value::Unit => "unit",
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(n) => Some(*n as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    pub fn truthy(&self) -> Result<bool, String> {
        match self {
            Value::Bool(b) => Ok(*b),
            other => Err(format!("expected bool, found {}", other.type_name())),
        }
    }
}

pub fn unary(op: UnOp, v: Value) -> Result<Value, String> {
    match (op, v) {
        (UnOp::Neg, Value::Int(n)) => n
            .checked_neg()
            .map(Value::Int)
            .ok_or_else(|| "integer overflow".to_string()),
        (UnOp::Neg, Value::Float(x)) => Ok(Value::Float(-x)),
        (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
        (op, v) => Err(format!("cannot apply `{op:?}` to {}", v.type_name())),
    }
}

/// Strict binary operators; `&&` and `||` short-circuit in the interpreter.
pub fn binary(op: BinOp, l: Value, r: Value) -> Result<Value, String> {
    use Value::*;
    match op {
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => arith(op, l, r),
        BinOp::Eq => Ok(Bool(values_equal(&l, &r))),
        BinOp::Ne => Ok(Bool(!values_equal(&l, &r))),
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let ord = match (&l, &r) {
                (Str(a), Str(b)) => Some(a.cmp(b)),
                _ => match (l.as_f64(), r.as_f64()) {
                    (Some(_), Some(_)) => numeric_cmp(&l, &r),
                    _ => {
                        return Err(format!(
                            "cannot compare {} with {}",
                            l.type_name(),
                            r.type_name()
                        ))
                    }
                },
            };
            // NaN compares false under every ordering operator
            Ok(Bool(match ord {
                None => false,
                Some(o) => match op {
                    BinOp::Lt => o == Ordering::Less,
                    BinOp::Le => o != Ordering::Greater,
                    BinOp::Gt => o == Ordering::Greater,
                    _ => o != Ordering::Less,
                },
            }))
        }
        BinOp::And | BinOp::Or => {
            let (a, b) = (l.truthy()?, r.truthy()?);
            Ok(Bool(if op == BinOp::And { a && b } else { a || b }))
        }
    }
}

fn numeric_cmp(l: &Value, r: &Value) -> Option<Ordering> {
    match (l, r) {
        (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
        _ => l.as_f64()?.partial_cmp(&r.as_f64()?),
    }
}

pub fn values_equal(l: &Value, r: &Value) -> bool {
    match (l, r) {
        (Value::Int(a), Value::Int(b)) => a == b,
        (Value::Float(_), _) | (_, Value::Float(_)) => match (l.as_f64(), r.as_f64()) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        },
        (a, b) => a == b,
    }
}

fn arith(op: BinOp, l: Value, r: Value) -> Result<Value, String> {
    use Value::*;
    match (l, r) {
        (Int(a), Int(b)) => {
            let res = match op {
                BinOp::Add => a.checked_add(b),
                BinOp::Sub => a.checked_sub(b),
                BinOp::Mul => a.checked_mul(b),
                BinOp::Div | BinOp::Rem if b == 0 => return Err("division by zero".into()),
                BinOp::Div => a.checked_div(b),
                _ => a.checked_rem(b),
            };
            res.map(Int).ok_or_else(|| "integer overflow".into())
        }
        (Str(a), Str(b)) if op == BinOp::Add => Ok(Str(a + &b)),
        (l, r) => match (l.as_f64(), r.as_f64()) {
            (Some(a), Some(b)) => Ok(Float(match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                _ => a % b,
            })),
            _ => Err(format!(
                "cannot apply `{}` to {} and {}",
                op.symbol(),
                l.type_name(),
                r.type_name()
            )),
        },
    }
}

pub fn call_builtin(name: &str, args: &[Value]) -> Result<Value, String> {
    let num = |i: usize| -> Result<f64, String> {
        args[i]
            .as_f64()
            .ok_or_else(|| format!("`{name}` expects a number, found {}", args[i].type_name()))
    };
    match name {
        "abs" => match &args[0] {
            Value::Int(n) => n
                .checked_abs()
                .map(Value::Int)
                .ok_or_else(|| "integer overflow".into()),
            _ => Ok(Value::Float(num(0)?.abs())),
        },
        "min" | "max" => match (&args[0], &args[1]) {
            (Value::Int(a), Value::Int(b)) => {
                Ok(Value::Int(if name == "min" { *a.min(b) } else { *a.max(b) }))
            }
            _ => {
                let (a, b) = (num(0)?, num(1)?);
                Ok(Value::Float(if name == "min" { a.min(b) } else { a.max(b) }))
            }
        },
        "sqrt" => Ok(Value::Float(num(0)?.sqrt())),
        "sin" => Ok(Value::Float(num(0)?.sin())),
        "cos" => Ok(Value::Float(num(0)?.cos())),
        "floor" => Ok(Value::Float(num(0)?.floor())),
        "pi" => Ok(Value::Float(std::f64::consts::PI)),
        _ => Err(format!("unknown builtin `{name}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_semantics() {
        assert_eq!(binary(BinOp::Div, Value::Int(7), Value::Int(2)), Ok(Value::Int(3)));
        assert!(binary(BinOp::Div, Value::Int(1), Value::Int(0)).is_err());
        assert!(binary(BinOp::Mul, Value::Int(i64::MAX), Value::Int(2)).is_err());
        assert_eq!(
            binary(BinOp::Add, Value::Int(1), Value::Float(0.5)),
            Ok(Value::Float(1.5))
        );
    }

    #[test]
    fn nan_is_never_equal() {
        let nan = Value::Float(f64::NAN);
        assert!(!values_equal(&nan, &nan));
        assert_eq!(binary(BinOp::Lt, nan.clone(), Value::Int(1)), Ok(Value::Bool(false)));
        assert_eq!(binary(BinOp::Ge, nan, Value::Int(1)), Ok(Value::Bool(false)));
    }

    #[test]
    fn mixed_equality() {
        assert!(values_equal(&Value::Int(2), &Value::Float(2.0)));
        assert!(!values_equal(&Value::Int(1), &Value::Bool(true)));
        assert!(binary(BinOp::Lt, Value::Bool(true), Value::Int(1)).is_err());
    }
}
