use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::ast::{BinOp, Expr, UnOp};
use super::printer::quote;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    /// Result of `slunit_run`: 0 passed, 1 failed, 2 error.
    Status { status: i64, output: String },
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Float(_) => "double",
            Value::Bool(_) => "bool",
            Value::Str(_) => "string",
            Value::Status { .. } => "status record",
        }
    }

    /// Source-like rendering used in assertion messages.
    pub fn repr(&self) -> String {
        match self {
            Value::Str(s) => quote(s),
            other => other.to_string(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => f.write_str(s),
            Value::Status { status, output } => {
                write!(f, "{{status: {status}, output: {}}}", quote(output))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    IntegerOverflow,
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("`{name}` expects {expected} argument(s), got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("no field `{field}` on {ty}")]
    NoField { field: String, ty: &'static str },
    #[error("variable `{0}` already declared")]
    Redeclared(String),
}

pub type Env = HashMap<String, Value>;

/// Provider of builtin functions. Builtins are the only expressions with
/// side effects.
pub trait Host {
    fn call(&mut self, name: &str, args: Vec<Value>) -> Result<Value, RuntimeError>;
}

struct NoHost;

impl Host for NoHost {
    fn call(&mut self, name: &str, _: Vec<Value>) -> Result<Value, RuntimeError> {
        Err(RuntimeError::UnknownFunction(name.to_string()))
    }
}

/// Evaluates a side-effect-free expression. Builtin calls are rejected.
pub fn eval_expr(e: &Expr, env: &Env) -> Result<Value, RuntimeError> {
    eval_with(e, env, &mut NoHost)
}

fn mismatch(op: &str, a: &Value, b: &Value) -> RuntimeError {
    RuntimeError::TypeMismatch(format!("{} {op} {}", a.type_name(), b.type_name()))
}

fn as_bool(v: Value, op: &str) -> Result<bool, RuntimeError> {
    match v {
        Value::Bool(b) => Ok(b),
        other => Err(RuntimeError::TypeMismatch(format!("`{op}` on {}", other.type_name()))),
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(x) => Some(*x),
        _ => None,
    }
}

/// `==` semantics: int/float compare after promotion, other types must match.
pub fn values_equal(a: &Value, b: &Value) -> Result<bool, RuntimeError> {
    Ok(match (a, b) {
        (Value::Int(x), Value::Int(y)) => x == y,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Str(x), Value::Str(y)) => x == y,
        _ => match (as_f64(a), as_f64(b)) {
            (Some(x), Some(y)) => x == y,
            _ => return Err(mismatch("==", a, b)),
        },
    })
}

/// Truthiness for `TS_ASSERT`: booleans, or numbers compared against zero.
pub fn truthy(v: &Value) -> Result<bool, RuntimeError> {
    match v {
        Value::Bool(b) => Ok(*b),
        Value::Int(i) => Ok(*i != 0),
        Value::Float(x) => Ok(*x != 0.0),
        other => Err(RuntimeError::TypeMismatch(format!(
            "{} used as a condition",
            other.type_name()
        ))),
    }
}

pub(crate) fn eval_with(e: &Expr, env: &Env, host: &mut dyn Host) -> Result<Value, RuntimeError> {
    match e {
        Expr::Int(i) => Ok(Value::Int(*i)),
        Expr::Float(x) => Ok(Value::Float(*x)),
        Expr::Bool(b) => Ok(Value::Bool(*b)),
        Expr::Str(s) => Ok(Value::Str(s.clone())),
        Expr::Var(name) => env
            .get(name)
            .cloned()
            .ok_or_else(|| RuntimeError::UnboundVariable(name.clone())),
        Expr::Unary(UnOp::Neg, x) => match eval_with(x, env, host)? {
            Value::Int(i) => i.checked_neg().map(Value::Int).ok_or(RuntimeError::IntegerOverflow),
            Value::Float(f) => Ok(Value::Float(-f)),
            other => Err(RuntimeError::TypeMismatch(format!("`-` on {}", other.type_name()))),
        },
        Expr::Unary(UnOp::Not, x) => Ok(Value::Bool(!as_bool(eval_with(x, env, host)?, "!")?)),
        Expr::Binary(BinOp::And, l, r) => {
            if !as_bool(eval_with(l, env, host)?, "&&")? {
                return Ok(Value::Bool(false));
            }
            Ok(Value::Bool(as_bool(eval_with(r, env, host)?, "&&")?))
        }
        Expr::Binary(BinOp::Or, l, r) => {
            if as_bool(eval_with(l, env, host)?, "||")? {
                return Ok(Value::Bool(true));
            }
            Ok(Value::Bool(as_bool(eval_with(r, env, host)?, "||")?))
        }
        Expr::Binary(op, l, r) => {
            let a = eval_with(l, env, host)?;
            let b = eval_with(r, env, host)?;
            binary(*op, &a, &b)
        }
        Expr::Call(name, args) => {
            let vals = args
                .iter()
                .map(|a| eval_with(a, env, host))
                .collect::<Result<Vec<_>, _>>()?;
            host.call(name, vals)
        }
        Expr::Field(base, field) => match eval_with(base, env, host)? {
            Value::Status { status, output } => match field.as_str() {
                "status" => Ok(Value::Int(status)),
                "output" => Ok(Value::Str(output)),
                _ => Err(RuntimeError::NoField {
                    field: field.clone(),
                    ty: "status record",
                }),
            },
            other => Err(RuntimeError::NoField {
                field: field.clone(),
                ty: other.type_name(),
            }),
        },
    }
}

fn binary(op: BinOp, a: &Value, b: &Value) -> Result<Value, RuntimeError> {
    let sym = op.symbol();
    match op {
        BinOp::Eq => return values_equal(a, b).map(Value::Bool),
        BinOp::Ne => return values_equal(a, b).map(|eq| Value::Bool(!eq)),
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let ord = match (a, b) {
                (Value::Int(x), Value::Int(y)) => x.partial_cmp(y),
                _ => match (as_f64(a), as_f64(b)) {
                    (Some(x), Some(y)) => x.partial_cmp(&y),
                    _ => return Err(mismatch(sym, a, b)),
                },
            };
            use std::cmp::Ordering::*;
            let res = match (op, ord) {
                (_, None) => false,
                (BinOp::Lt, Some(o)) => o == Less,
                (BinOp::Le, Some(o)) => o != Greater,
                (BinOp::Gt, Some(o)) => o == Greater,
                (_, Some(o)) => o != Less,
            };
            return Ok(Value::Bool(res));
        }
        _ => {}
    }
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => {
            let r = match op {
                BinOp::Add => x.checked_add(*y),
                BinOp::Sub => x.checked_sub(*y),
                BinOp::Mul => x.checked_mul(*y),
                _ => {
                    if *y == 0 {
                        return Err(RuntimeError::DivisionByZero);
                    }
                    x.checked_div(*y)
                }
            };
            r.map(Value::Int).ok_or(RuntimeError::IntegerOverflow)
        }
        (Value::Str(x), Value::Str(y)) if op == BinOp::Add => Ok(Value::Str(format!("{x}{y}"))),
        _ => match (as_f64(a), as_f64(b)) {
            (Some(x), Some(y)) => Ok(Value::Float(match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                _ => {
                    if y == 0.0 {
                        return Err(RuntimeError::DivisionByZero);
                    }
                    x / y
                }
            })),
            _ => Err(mismatch(sym, a, b)),
        },
    }
}
