//! Bound expressions. Column references are positions in the input tuple of
//! the operator that owns the expression; for joins that is the left input
//! followed by the right input.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sql::ast::BinOp;
use crate::value::{Value, ValueType};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    Column(usize),
    Literal(Value),
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    /// Membership in a replicated single-column table.
    InTable { expr: Box<Expr>, table: String },
}

/// Static type of an expression: a scalar or a predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExprType {
    Scalar(ValueType),
    Bool,
}

/// Membership lists visible to `IN <table>` predicates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Env {
    pub sets: BTreeMap<String, BTreeSet<Value>>,
}

impl Env {
    pub fn contains(&self, table: &str, v: &Value) -> bool {
        self.sets.get(table).is_some_and(|s| s.contains(v))
    }
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn columns(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_columns(&mut out);
        out
    }

    pub fn collect_columns(&self, out: &mut BTreeSet<usize>) {
        match self {
            Expr::Column(i) => {
                out.insert(*i);
            }
            Expr::Literal(_) => {}
            Expr::Binary { lhs, rhs, .. } => {
                lhs.collect_columns(out);
                rhs.collect_columns(out);
            }
            Expr::InTable { expr, .. } => expr.collect_columns(out),
        }
    }

    pub fn remap(&self, f: &dyn Fn(usize) -> usize) -> Expr {
        match self {
            Expr::Column(i) => Expr::Column(f(*i)),
            Expr::Literal(v) => Expr::Literal(v.clone()),
            Expr::Binary { op, lhs, rhs } => Expr::binary(*op, lhs.remap(f), rhs.remap(f)),
            Expr::InTable { expr, table } => Expr::InTable { expr: Box::new(expr.remap(f)), table: table.clone() },
        }
    }

    pub fn as_column(&self) -> Option<usize> {
        match self {
            Expr::Column(i) => Some(*i),
            _ => None,
        }
    }

    /// Top-level AND operands.
    pub fn conjuncts(&self) -> Vec<Expr> {
        match self {
            Expr::Binary { op: BinOp::And, lhs, rhs } => {
                let mut v = lhs.conjuncts();
                v.extend(rhs.conjuncts());
                v
            }
            other => vec![other.clone()],
        }
    }

    pub fn and_all(mut parts: Vec<Expr>) -> Option<Expr> {
        if parts.is_empty() {
            return None;
        }
        let first = parts.remove(0);
        Some(parts.into_iter().fold(first, |acc, e| Expr::binary(BinOp::And, acc, e)))
    }

    /// Scalar value. Arithmetic over null is null; predicates yield 1 or 0.
    pub fn eval(&self, row: &[Value], env: &Env) -> Value {
        match self {
            Expr::Column(i) => row[*i].clone(),
            Expr::Literal(v) => v.clone(),
            Expr::Binary { op, lhs, rhs } if op.is_arith() => arith(*op, &lhs.eval(row, env), &rhs.eval(row, env)),
            _ => Value::Int(i64::from(self.holds(row, env))),
        }
    }

    /// Predicate truth under two-valued logic: anything involving null is false.
    pub fn holds(&self, row: &[Value], env: &Env) -> bool {
        match self {
            Expr::Binary { op: BinOp::And, lhs, rhs } => lhs.holds(row, env) && rhs.holds(row, env),
            Expr::Binary { op: BinOp::Or, lhs, rhs } => lhs.holds(row, env) || rhs.holds(row, env),
            Expr::Binary { op, lhs, rhs } if op.is_comparison() => {
                let (a, b) = (lhs.eval(row, env), rhs.eval(row, env));
                if a.is_null() || b.is_null() {
                    return false;
                }
                let ord = a.cmp(&b);
                match op {
                    BinOp::Eq => ord.is_eq(),
                    BinOp::Neq => ord.is_ne(),
                    BinOp::Lt => ord.is_lt(),
                    BinOp::Le => ord.is_le(),
                    BinOp::Gt => ord.is_gt(),
                    BinOp::Ge => ord.is_ge(),
                    _ => unreachable!("comparison operator"),
                }
            }
            Expr::InTable { expr, table } => {
                let v = expr.eval(row, env);
                !v.is_null() && env.contains(table, &v)
            }
            other => matches!(other.eval(row, env), Value::Int(v) if v != 0),
        }
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, names }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary { op, .. } => match op {
                BinOp::Or => 1,
                BinOp::And => 2,
                BinOp::Add | BinOp::Sub => 4,
                _ => 3,
            },
            Expr::InTable { .. } => 3,
            _ => u8::MAX,
        }
    }
}

fn arith(op: BinOp, a: &Value, b: &Value) -> Value {
    let sign = if op == BinOp::Sub { -1 } else { 1 };
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Value::Int(x.wrapping_add(sign * y)),
        (Value::Date(x), Value::Int(y)) => Value::Date((i64::from(*x) + sign * y) as i32),
        (Value::Int(x), Value::Date(y)) if op == BinOp::Add => Value::Date((x + i64::from(*y)) as i32),
        (Value::Date(x), Value::Date(y)) if op == BinOp::Sub => Value::Int(i64::from(*x) - i64::from(*y)),
        _ => Value::Null,
    }
}

/// Result type of `lhs op rhs` for arithmetic, or `None` if ill-typed.
pub fn arith_type(op: BinOp, lhs: ValueType, rhs: ValueType) -> Option<ValueType> {
    use ValueType::*;
    match (op, lhs, rhs) {
        (_, Int64, Int64) => Some(Int64),
        (_, Date, Int64) => Some(Date),
        (BinOp::Add, Int64, Date) => Some(Date),
        (BinOp::Sub, Date, Date) => Some(Int64),
        _ => None,
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.expr {
            Expr::Column(i) => match self.names.get(*i) {
                Some(n) => f.write_str(n),
                None => write!(f, "#{i}"),
            },
            Expr::Literal(v) => write!(f, "{v}"),
            Expr::Binary { op, lhs, rhs } => {
                let p = self.expr.precedence();
                let l = lhs.display(self.names);
                let r = rhs.display(self.names);
                if lhs.precedence() < p {
                    write!(f, "({l})")?;
                } else {
                    write!(f, "{l}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if rhs.precedence() <= p {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
            Expr::InTable { expr, table } => write!(f, "{} IN {table}", expr.display(self.names)),
        }
    }
}
