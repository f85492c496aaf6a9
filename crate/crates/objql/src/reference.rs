//! Reference interpreter: a direct, unoptimized transcription of the
//! operator rules, used as the ground-truth oracle for differential
//! testing of the optimized engine.
//!
//! No hashing anywhere in this module. Join is the literal nested-loop
//! comprehension, group_by and unique are the literal head/tail
//! partition recursions (quadratic), and order_by is an insertion sort
//! (stable, matching the engine's documented deviation from the
//! tie-reversing quicksort reading of the ordering rule).

use crate::engine::{
    join_appends, join_row, Database, EngineError, OperatorSpec, Program, ProfileEntry,
    ProfileReport, QueryPlan, Reduced, Statement, Udf,
};
use crate::value::{Table, Value};
use std::time::Instant;

fn call_row(
    f: &Udf,
    row: &Value,
    op_index: usize,
    op: &'static str,
    row_index: usize,
) -> Result<Value, EngineError> {
    match f {
        Udf::Row(f) => f(row).map_err(|message| EngineError::Udf {
            op_index,
            op,
            row_index,
            message,
        }),
        _ => Err(EngineError::Udf {
            op_index,
            op,
            row_index,
            message: "expected a row function".into(),
        }),
    }
}

/// Nested-loop join: every left row against every right row, keeping the
/// pairs whose key values agree. O(mn) by construction.
fn ref_join(
    db: &Database,
    left: &Table,
    right_name: &str,
    key: &Udf,
    fkey: &Udf,
    append: bool,
    op_index: usize,
) -> Result<Table, EngineError> {
    let right = db.get(right_name)?;
    let mut out = Vec::new();
    for (i, lrow) in left.rows.iter().enumerate() {
        let k = call_row(key, lrow, op_index, "join", i)?;
        for (j, rrow) in right.rows.iter().enumerate() {
            let fk = call_row(fkey, rrow, op_index, "join", j)?;
            if k.equals(&fk) {
                out.push(join_row(lrow, rrow, append));
            }
        }
    }
    Ok(Table::new(out))
}

fn ref_project(t: &Table, f: &Udf, op_index: usize) -> Result<Table, EngineError> {
    // Project1/Project2: head transformed, tail recursed.
    let mut out = Vec::with_capacity(t.len());
    for (i, row) in t.rows.iter().enumerate() {
        out.push(call_row(f, row, op_index, "project", i)?);
    }
    Ok(Table::new(out))
}

fn ref_filter(t: &Table, pred: &Udf, op_index: usize) -> Result<Table, EngineError> {
    let mut out = Vec::new();
    for (i, row) in t.rows.iter().enumerate() {
        match call_row(pred, row, op_index, "filter", i)? {
            Value::Bool(true) => out.push(row.clone()),
            Value::Bool(false) => {}
            _ => {
                return Err(EngineError::PredType {
                    op_index,
                    row_index: i,
                })
            }
        }
    }
    Ok(Table::new(out))
}

/// Stable insertion sort on precomputed keys. Deliberately independent of
/// the engine's sort routine.
fn ref_order_by(
    t: &Table,
    key: &Udf,
    reverse: bool,
    op_index: usize,
) -> Result<Table, EngineError> {
    let mut keyed: Vec<(Value, Value)> = Vec::with_capacity(t.len());
    for (i, row) in t.rows.iter().enumerate() {
        keyed.push((call_row(key, row, op_index, "order_by", i)?, row.clone()));
    }
    let mut sorted: Vec<(Value, Value)> = Vec::with_capacity(keyed.len());
    for item in keyed {
        let ord_after = |probe: &Value| {
            let ord = item.0.compare(probe);
            if reverse {
                ord.reverse()
            } else {
                ord
            }
        };
        // insert after the last element that is <= item (stability)
        let mut pos = sorted.len();
        while pos > 0 && ord_after(&sorted[pos - 1].0) == std::cmp::Ordering::Less {
            pos -= 1;
        }
        sorted.insert(pos, item);
    }
    Ok(sorted.into_iter().map(|(_, r)| r).collect())
}

/// Head/tail recursion of the grouping rule, run iteratively: take the
/// first remaining row, partition the rest into equal-key and
/// different-key parts, emit `(key, equals)`, continue on the rest.
/// Returns the table and the number of recursion steps.
pub(crate) fn ref_group_by_counted(
    t: &Table,
    key: &Udf,
    op_index: usize,
) -> Result<(Table, usize), EngineError> {
    let mut keyed: Vec<(Value, Value)> = Vec::with_capacity(t.len());
    for (i, row) in t.rows.iter().enumerate() {
        keyed.push((call_row(key, row, op_index, "group_by", i)?, row.clone()));
    }
    let mut out = Vec::new();
    let mut steps = 0usize;
    let mut rest = keyed;
    while !rest.is_empty() {
        steps += 1;
        let (head_key, head_row) = rest.remove(0);
        let mut equal = vec![head_row];
        let mut unequal = Vec::new();
        for (k, r) in rest {
            if k.equals(&head_key) {
                equal.push(r);
            } else {
                unequal.push((k, r));
            }
        }
        steps += equal.len() - 1; // rows consumed by the equal-key partition
        out.push(Value::List(vec![head_key, Value::List(equal)]));
        rest = unequal;
    }
    Ok((Table::new(out), steps))
}

fn ref_flatten(t: &Table) -> Table {
    let mut out = Vec::new();
    for row in &t.rows {
        match row {
            Value::List(xs) | Value::Set(xs) => out.extend(xs.iter().cloned()),
            other => out.push(other.clone()),
        }
    }
    Table::new(out)
}

/// Head/tail recursion of the dedup rule: keep the head, filter out every
/// later row equal to it, recurse on the remainder. Returns the table and
/// the number of recursion steps.
pub(crate) fn ref_unique_counted(t: &Table) -> (Table, usize) {
    let mut out = Vec::new();
    let mut steps = 0usize;
    let mut rest: Vec<Value> = t.rows.clone();
    while !rest.is_empty() {
        steps += 1;
        let head = rest.remove(0);
        let before = rest.len();
        rest.retain(|r| !r.equals(&head));
        steps += before - rest.len(); // duplicates dropped alongside the head
        out.push(head);
    }
    (Table::new(out), steps)
}

fn ref_reduce(t: &Table, f: &Udf, op_index: usize) -> Result<Table, EngineError> {
    match f {
        Udf::Table(f) => match f(t).map_err(|message| EngineError::Udf {
            op_index,
            op: "reduce",
            row_index: 0,
            message,
        })? {
            Reduced::Rows(rows) => Ok(Table::new(rows)),
            Reduced::One(v) => Ok(Table::new(vec![v])),
        },
        _ => Err(EngineError::Udf {
            op_index,
            op: "reduce",
            row_index: 0,
            message: "expected a table function".into(),
        }),
    }
}

fn ref_apply_op(
    db: &Database,
    t: &Table,
    op: &OperatorSpec,
    appends: bool,
    op_index: usize,
) -> Result<Table, EngineError> {
    match op {
        OperatorSpec::Join { right, key, fkey } => {
            ref_join(db, t, right, key, fkey, appends, op_index)
        }
        // batching is an engine optimization; the rules know only
        // pointwise projection
        OperatorSpec::Project { f, batch_size } => match (f, batch_size) {
            (Udf::Batch(bf), _) => {
                let mut out = Vec::with_capacity(t.len());
                for (i, row) in t.rows.iter().enumerate() {
                    let produced = bf(std::slice::from_ref(row)).map_err(|message| {
                        EngineError::Udf {
                            op_index,
                            op: "project",
                            row_index: i,
                            message,
                        }
                    })?;
                    if produced.len() != 1 {
                        return Err(EngineError::BatchArity {
                            op_index,
                            expected: 1,
                            got: produced.len(),
                        });
                    }
                    out.extend(produced);
                }
                Ok(Table::new(out))
            }
            _ => ref_project(t, f, op_index),
        },
        OperatorSpec::Filter { pred } => ref_filter(t, pred, op_index),
        OperatorSpec::OrderBy { key, reverse } => ref_order_by(t, key, *reverse, op_index),
        OperatorSpec::GroupBy { key } => ref_group_by_counted(t, key, op_index).map(|(t, _)| t),
        OperatorSpec::Flatten => Ok(ref_flatten(t)),
        OperatorSpec::Unique => Ok(ref_unique_counted(t).0),
        OperatorSpec::Reduce { f } => ref_reduce(t, f, op_index),
    }
}

/// Literal-rule evaluation of a query plan.
pub fn ref_eval_query(db: &Database, plan: &QueryPlan) -> Result<Table, EngineError> {
    let mut current = db.get(&plan.base)?.clone();
    for (i, op) in plan.ops.iter().enumerate() {
        let appends = join_appends(&plan.ops, i);
        current = ref_apply_op(db, &current, op, appends, i)?;
    }
    Ok(current)
}

/// Like [`ref_eval_query`] but records per-operator timings.
pub fn ref_eval_query_profiled(
    db: &Database,
    plan: &QueryPlan,
) -> Result<(Table, ProfileReport), EngineError> {
    let start = Instant::now();
    let mut current = db.get(&plan.base)?.clone();
    let mut report = ProfileReport::default();
    for (i, op) in plan.ops.iter().enumerate() {
        let appends = join_appends(&plan.ops, i);
        let in_rows = current.len();
        let op_start = Instant::now();
        current = ref_apply_op(db, &current, op, appends, i)?;
        report.entries.push(ProfileEntry {
            op: op.kind(),
            in_rows,
            out_rows: current.len(),
            seconds: op_start.elapsed().as_secs_f64(),
        });
    }
    report.total_seconds = start.elapsed().as_secs_f64();
    Ok((current, report))
}

/// Literal-rule evaluation of a program; mirrors the optimized
/// `eval_program` including its all-or-nothing behavior.
pub fn ref_eval_program(db: &Database, program: &Program) -> Result<Database, EngineError> {
    let mut db = db.clone();
    for stmt in program {
        match stmt {
            Statement::Register {
                name,
                table,
                overwrite,
            } => {
                db = db.register(name, table.clone(), *overwrite)?;
            }
            Statement::Query { name, plan } => {
                let t = ref_eval_query(&db, plan)?;
                db = db.register(name, t, true)?;
            }
        }
    }
    Ok(db)
}
