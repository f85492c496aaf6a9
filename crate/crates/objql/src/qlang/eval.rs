//! Strict evaluator for the expression sublanguage.
//!
//! Arithmetic: Int op Int stays Int with checked overflow, except `/`
//! which is always float division; any Float operand promotes to Float.
//! Float division by zero follows IEEE (±inf/NaN); Int `%` by zero is an
//! error. `==`/`!=` are deep value equality; `<` and friends use the
//! total value order. `&&`/`||` short-circuit.

use super::ast::{BinOp, Expr, ExprNode, UnOp};
use crate::value::{MapKey, Value};

#[derive(Debug, Clone, thiserror::Error)]
#[error("{message}")]
pub struct EvalError {
    pub message: String,
}

fn err<T>(message: impl Into<String>) -> Result<T, EvalError> {
    Err(EvalError {
        message: message.into(),
    })
}

pub const BUILTINS: &[&str] = &[
    "len", "abs", "min", "max", "sum", "mean", "quantile", "count", "contains", "keys", "setof",
    "str", "col",
];

/// Evaluates `e` with `it` bound to `row`.
pub fn eval_expr(e: &Expr, row: &Value) -> Result<Value, EvalError> {
    match &e.node {
        ExprNode::Lit(v) => Ok(v.clone()),
        ExprNode::It => Ok(row.clone()),
        ExprNode::Pos(i) => match row {
            Value::List(parts) if *i < parts.len() => Ok(parts[*i].clone()),
            Value::List(parts) => err(format!(
                "join position _{i} out of range for a {}-tuple",
                parts.len()
            )),
            _ => err(format!("_{i} used on a non-tuple row")),
        },
        ExprNode::Field(inner, name) => {
            let v = eval_expr(inner, row)?;
            match v {
                Value::Map(_) => v
                    .field(name)
                    .cloned()
                    .ok_or(())
                    .or_else(|_| err(format!("no field `{name}`"))),
                other => err(format!("field `{name}` accessed on non-map value {other}")),
            }
        }
        ExprNode::Index(inner, idx) => {
            let coll = eval_expr(inner, row)?;
            let idx = eval_expr(idx, row)?;
            index_value(&coll, &idx)
        }
        ExprNode::Unary(op, inner) => {
            let v = eval_expr(inner, row)?;
            match (op, v) {
                (UnOp::Neg, Value::Int(i)) => i
                    .checked_neg()
                    .map(Value::Int)
                    .ok_or(())
                    .or_else(|_| err("integer overflow in negation")),
                (UnOp::Neg, Value::Float(f)) => Ok(Value::Float(-f)),
                (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                (UnOp::Neg, other) => err(format!("cannot negate {other}")),
                (UnOp::Not, other) => err(format!("`!` applied to non-boolean {other}")),
            }
        }
        ExprNode::Binary(op, lhs, rhs) => eval_binary(*op, lhs, rhs, row),
        ExprNode::Cond(c, t, f) => match eval_expr(c, row)? {
            Value::Bool(true) => eval_expr(t, row),
            Value::Bool(false) => eval_expr(f, row),
            other => err(format!("condition evaluated to non-boolean {other}")),
        },
        ExprNode::Call(name, args) => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval_expr(a, row)?);
            }
            call_builtin(name, &vals)
        }
        ExprNode::ListLit(items) => {
            let mut out = Vec::with_capacity(items.len());
            for item in items {
                out.push(eval_expr(item, row)?);
            }
            Ok(Value::List(out))
        }
        ExprNode::MapLit(entries) => {
            let mut out = Vec::with_capacity(entries.len());
            for (k, v) in entries {
                out.push((MapKey::Text(k.clone()), eval_expr(v, row)?));
            }
            Ok(Value::map(out))
        }
    }
}

fn index_value(coll: &Value, idx: &Value) -> Result<Value, EvalError> {
    match (coll, idx) {
        (Value::List(xs), Value::Int(i)) => {
            let i = usize::try_from(*i).ok();
            match i.and_then(|i| xs.get(i)) {
                Some(v) => Ok(v.clone()),
                None => err(format!("index {idx} out of range for list of {}", xs.len())),
            }
        }
        (Value::Map(_), Value::Text(k)) => coll
            .field(k)
            .cloned()
            .ok_or(())
            .or_else(|_| err(format!("no field `{k}`"))),
        (Value::Map(entries), Value::Int(i)) => entries
            .iter()
            .find(|(k, _)| *k == MapKey::Int(*i))
            .map(|(_, v)| v.clone())
            .ok_or(())
            .or_else(|_| err(format!("no key {i}"))),
        (c, i) => err(format!("cannot index {c} with {i}")),
    }
}

fn eval_binary(op: BinOp, lhs: &Expr, rhs: &Expr, row: &Value) -> Result<Value, EvalError> {
    // short-circuit forms first
    match op {
        BinOp::And | BinOp::Or => {
            let l = match eval_expr(lhs, row)? {
                Value::Bool(b) => b,
                other => return err(format!("logical operand is non-boolean {other}")),
            };
            if (op == BinOp::And && !l) || (op == BinOp::Or && l) {
                return Ok(Value::Bool(l));
            }
            return match eval_expr(rhs, row)? {
                Value::Bool(b) => Ok(Value::Bool(b)),
                other => err(format!("logical operand is non-boolean {other}")),
            };
        }
        _ => {}
    }
    let l = eval_expr(lhs, row)?;
    let r = eval_expr(rhs, row)?;
    match op {
        BinOp::Eq => Ok(Value::Bool(l.equals(&r))),
        BinOp::Ne => Ok(Value::Bool(!l.equals(&r))),
        BinOp::Lt => Ok(Value::Bool(l.compare(&r) == std::cmp::Ordering::Less)),
        BinOp::Le => Ok(Value::Bool(l.compare(&r) != std::cmp::Ordering::Greater)),
        BinOp::Gt => Ok(Value::Bool(l.compare(&r) == std::cmp::Ordering::Greater)),
        BinOp::Ge => Ok(Value::Bool(l.compare(&r) != std::cmp::Ordering::Less)),
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod => arith(op, &l, &r),
        BinOp::And | BinOp::Or => unreachable!("handled above"),
    }
}

fn arith(op: BinOp, l: &Value, r: &Value) -> Result<Value, EvalError> {
    if op == BinOp::Add {
        if let (Value::Text(a), Value::Text(b)) = (l, r) {
            return Ok(Value::Text(format!("{a}{b}")));
        }
    }
    match (l, r) {
        (Value::Int(a), Value::Int(b)) => {
            let a = *a;
            let b = *b;
            let checked = match op {
                BinOp::Add => a.checked_add(b),
                BinOp::Sub => a.checked_sub(b),
                BinOp::Mul => a.checked_mul(b),
                BinOp::Div => {
                    // integer division is float division
                    if b == 0 {
                        return err("division by zero");
                    }
                    return Ok(Value::Float(a as f64 / b as f64));
                }
                BinOp::Mod => {
                    if b == 0 {
                        return err("modulo by zero");
                    }
                    a.checked_rem(b)
                }
                _ => unreachable!(),
            };
            checked
                .map(Value::Int)
                .ok_or(())
                .or_else(|_| err("integer overflow"))
        }
        _ => {
            let a = l
                .as_f64()
                .ok_or(())
                .or_else(|_| err(format!("arithmetic on non-numeric value {l}")))?;
            let b = r
                .as_f64()
                .ok_or(())
                .or_else(|_| err(format!("arithmetic on non-numeric value {r}")))?;
            Ok(Value::Float(match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                BinOp::Mod => a % b,
                _ => unreachable!(),
            }))
        }
    }
}

fn numeric_items(name: &str, v: &Value) -> Result<Vec<f64>, EvalError> {
    let items = match v {
        Value::List(xs) | Value::Set(xs) => xs,
        other => return err(format!("{name} expects a collection, got {other}")),
    };
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        match item.as_f64() {
            Some(f) => out.push(f),
            None => return err(format!("{name} over non-numeric element {item}")),
        }
    }
    Ok(out)
}

/// Quantile by linear interpolation between closest order statistics,
/// `p` in [0, 1].
pub fn quantile(values: &mut [f64], p: f64) -> Result<f64, EvalError> {
    if values.is_empty() {
        return err("quantile of an empty collection");
    }
    if !(0.0..=1.0).contains(&p) {
        return err(format!("quantile position {p} outside [0, 1]"));
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let h = p * (values.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(values[lo] + (h - lo as f64) * (values[hi] - values[lo]))
}

fn call_builtin(name: &str, args: &[Value]) -> Result<Value, EvalError> {
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            err(format!("{name} expects {n} argument(s), got {}", args.len()))
        }
    };
    match name {
        "len" | "count" => {
            arity(1)?;
            let n = match &args[0] {
                Value::List(xs) | Value::Set(xs) => xs.len(),
                Value::Map(entries) => entries.len(),
                Value::Text(s) => s.chars().count(),
                other => return err(format!("{name} of non-collection {other}")),
            };
            Ok(Value::Int(n as i64))
        }
        "abs" => {
            arity(1)?;
            match &args[0] {
                Value::Int(i) => i
                    .checked_abs()
                    .map(Value::Int)
                    .ok_or(())
                    .or_else(|_| err("integer overflow in abs")),
                Value::Float(f) => Ok(Value::Float(f.abs())),
                other => err(format!("abs of non-numeric {other}")),
            }
        }
        "min" | "max" => {
            let items: Vec<Value> = match args {
                [Value::List(xs)] | [Value::Set(xs)] => xs.clone(),
                [_] => return err(format!("{name} expects a collection")),
                _ => args.to_vec(),
            };
            if items.is_empty() {
                return err(format!("{name} of an empty collection"));
            }
            let mut best = items[0].clone();
            for item in &items[1..] {
                let take = if name == "min" {
                    item.compare(&best) == std::cmp::Ordering::Less
                } else {
                    item.compare(&best) == std::cmp::Ordering::Greater
                };
                if take {
                    best = item.clone();
                }
            }
            Ok(best)
        }
        "sum" => {
            arity(1)?;
            let items = match &args[0] {
                Value::List(xs) | Value::Set(xs) => xs,
                other => return err(format!("sum of non-collection {other}")),
            };
            let mut int_acc: Option<i64> = Some(0);
            let mut float_acc = 0.0;
            for item in items {
                match item {
                    Value::Int(i) => {
                        int_acc = int_acc.and_then(|a| a.checked_add(*i));
                        float_acc += *i as f64;
                    }
                    Value::Float(f) => {
                        int_acc = None;
                        float_acc += f;
                    }
                    other => return err(format!("sum over non-numeric element {other}")),
                }
            }
            match int_acc {
                Some(i) if items.iter().all(|v| matches!(v, Value::Int(_))) => Ok(Value::Int(i)),
                Some(_) | None
                    if items.iter().any(|v| matches!(v, Value::Float(_))) =>
                {
                    Ok(Value::Float(float_acc))
                }
                _ => err("integer overflow in sum"),
            }
        }
        "mean" => {
            arity(1)?;
            let xs = numeric_items("mean", &args[0])?;
            if xs.is_empty() {
                return err("mean of an empty collection");
            }
            Ok(Value::Float(xs.iter().sum::<f64>() / xs.len() as f64))
        }
        "quantile" => {
            arity(2)?;
            let mut xs = numeric_items("quantile", &args[0])?;
            let p = args[1]
                .as_f64()
                .ok_or(())
                .or_else(|_| err("quantile position must be numeric"))?;
            Ok(Value::Float(quantile(&mut xs, p)?))
        }
        "contains" => {
            arity(2)?;
            let found = match &args[0] {
                Value::List(xs) | Value::Set(xs) => xs.iter().any(|x| x.equals(&args[1])),
                Value::Map(entries) => entries.iter().any(|(k, _)| match (&args[1], k) {
                    (Value::Text(s), MapKey::Text(t)) => s == t,
                    (Value::Int(i), MapKey::Int(j)) => i == j,
                    _ => false,
                }),
                Value::Text(s) => match &args[1] {
                    Value::Text(needle) => s.contains(needle.as_str()),
                    _ => return err("contains on text expects a text needle"),
                },
                other => return err(format!("contains on non-collection {other}")),
            };
            Ok(Value::Bool(found))
        }
        "keys" => {
            arity(1)?;
            match &args[0] {
                Value::Map(entries) => Ok(Value::List(
                    entries
                        .iter()
                        .map(|(k, _)| match k {
                            MapKey::Int(i) => Value::Int(*i),
                            MapKey::Text(s) => Value::Text(s.clone()),
                        })
                        .collect(),
                )),
                other => err(format!("keys of non-map {other}")),
            }
        }
        "setof" => {
            arity(1)?;
            match &args[0] {
                Value::List(xs) => Ok(Value::set(xs.clone())),
                s @ Value::Set(_) => Ok(s.clone()),
                other => err(format!("setof of non-list {other}")),
            }
        }
        "str" => {
            arity(1)?;
            match &args[0] {
                Value::Text(s) => Ok(Value::Text(s.clone())),
                other => Ok(Value::Text(other.to_string())),
            }
        }
        "col" => {
            arity(2)?;
            let rows = match &args[0] {
                Value::List(xs) => xs,
                other => return err(format!("col expects a list of rows, got {other}")),
            };
            let mut out = Vec::with_capacity(rows.len());
            for r in rows {
                out.push(index_value(r, &args[1])?);
            }
            Ok(Value::List(out))
        }
        _ => err(format!("unknown builtin `{name}`")),
    }
}
