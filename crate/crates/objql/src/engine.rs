//! Optimized query executor.
//!
//! Queries are chains of the eight table operators over a named-table
//! database. Join, group_by and unique are hash-based over canonical key
//! encodings, so an equijoin over tables of m and n rows costs O(m+n)
//! instead of the naive O(mn). order_by is a stable sort. Projection can
//! optionally run in fixed-size batches.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use indexmap::IndexMap;

use crate::value::{CanonicalKey, Table, Value};

pub type UdfResult = Result<Value, String>;

type RowFn = Arc<dyn Fn(&Value) -> UdfResult + Send + Sync>;
type BatchFn = Arc<dyn Fn(&[Value]) -> Result<Vec<Value>, String> + Send + Sync>;
type TableFn = Arc<dyn Fn(&Table) -> Result<Reduced, String> + Send + Sync>;

/// Result of a reduce UDF: either a whole table, or a scalar that the
/// engine wraps into a single-row table.
pub enum Reduced {
    Rows(Vec<Value>),
    One(Value),
}

/// An opaque callable attached to an operator.
///
/// Row functions serve project/filter/order_by/group_by/join keys; batch
/// functions serve batched projection; table functions serve reduce. UDFs
/// must be pure with respect to the database.
#[derive(Clone)]
pub enum Udf {
    Row(RowFn),
    Batch(BatchFn),
    Table(TableFn),
}

impl Udf {
    pub fn row(f: impl Fn(&Value) -> UdfResult + Send + Sync + 'static) -> Udf {
        Udf::Row(Arc::new(f))
    }

    /// Row function from an infallible closure.
    pub fn pure_row(f: impl Fn(&Value) -> Value + Send + Sync + 'static) -> Udf {
        Udf::Row(Arc::new(move |v| Ok(f(v))))
    }

    /// Predicate from an infallible closure.
    pub fn pred(f: impl Fn(&Value) -> bool + Send + Sync + 'static) -> Udf {
        Udf::Row(Arc::new(move |v| Ok(Value::Bool(f(v)))))
    }

    pub fn batch(
        f: impl Fn(&[Value]) -> Result<Vec<Value>, String> + Send + Sync + 'static,
    ) -> Udf {
        Udf::Batch(Arc::new(f))
    }

    pub fn table(f: impl Fn(&Table) -> Result<Reduced, String> + Send + Sync + 'static) -> Udf {
        Udf::Table(Arc::new(f))
    }
}

impl fmt::Debug for Udf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self {
            Udf::Row(_) => "Row",
            Udf::Batch(_) => "Batch",
            Udf::Table(_) => "Table",
        };
        write!(f, "Udf::{kind}")
    }
}

/// One table operator with its attached UDFs.
#[derive(Clone, Debug)]
pub enum OperatorSpec {
    Join {
        right: String,
        key: Udf,
        fkey: Udf,
    },
    Project {
        f: Udf,
        batch_size: Option<usize>,
    },
    Filter {
        pred: Udf,
    },
    OrderBy {
        key: Udf,
        reverse: bool,
    },
    GroupBy {
        key: Udf,
    },
    Flatten,
    Unique,
    Reduce {
        f: Udf,
    },
}

impl OperatorSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            OperatorSpec::Join { .. } => "join",
            OperatorSpec::Project { .. } => "project",
            OperatorSpec::Filter { .. } => "filter",
            OperatorSpec::OrderBy { .. } => "order_by",
            OperatorSpec::GroupBy { .. } => "group_by",
            OperatorSpec::Flatten => "flatten",
            OperatorSpec::Unique => "unique",
            OperatorSpec::Reduce { .. } => "reduce",
        }
    }
}

/// A base-table name plus an ordered operator chain.
#[derive(Clone, Debug)]
pub struct QueryPlan {
    pub base: String,
    pub ops: Vec<OperatorSpec>,
}

impl QueryPlan {
    pub fn new(base: impl Into<String>) -> QueryPlan {
        QueryPlan {
            base: base.into(),
            ops: Vec::new(),
        }
    }

    pub fn join(mut self, right: impl Into<String>, key: Udf, fkey: Udf) -> Self {
        self.ops.push(OperatorSpec::Join {
            right: right.into(),
            key,
            fkey,
        });
        self
    }

    pub fn project(mut self, f: Udf) -> Self {
        self.ops.push(OperatorSpec::Project {
            f,
            batch_size: None,
        });
        self
    }

    pub fn project_batched(mut self, f: Udf, batch_size: usize) -> Self {
        self.ops.push(OperatorSpec::Project {
            f,
            batch_size: Some(batch_size),
        });
        self
    }

    pub fn filter(mut self, pred: Udf) -> Self {
        self.ops.push(OperatorSpec::Filter { pred });
        self
    }

    pub fn order_by(mut self, key: Udf, reverse: bool) -> Self {
        self.ops.push(OperatorSpec::OrderBy { key, reverse });
        self
    }

    pub fn group_by(mut self, key: Udf) -> Self {
        self.ops.push(OperatorSpec::GroupBy { key });
        self
    }

    pub fn flatten(mut self) -> Self {
        self.ops.push(OperatorSpec::Flatten);
        self
    }

    pub fn unique(mut self) -> Self {
        self.ops.push(OperatorSpec::Unique);
        self
    }

    pub fn reduce(mut self, f: Udf) -> Self {
        self.ops.push(OperatorSpec::Reduce { f });
        self
    }
}

/// Whether the join at `idx` appends onto an existing join tuple.
///
/// A join whose left input is itself a join product (flowing through only
/// row-preserving operators: filter, order_by, unique) appends the right
/// row to the flat tuple; otherwise it emits the two-element pair.
pub fn join_appends(ops: &[OperatorSpec], idx: usize) -> bool {
    let mut joined = false;
    for op in &ops[..idx] {
        joined = match op {
            OperatorSpec::Join { .. } => true,
            OperatorSpec::Filter { .. }
            | OperatorSpec::OrderBy { .. }
            | OperatorSpec::Unique => joined,
            _ => false,
        };
    }
    joined
}

/// A statement of a program: register a base table, or run a query and
/// store the result under a name.
#[derive(Clone, Debug)]
pub enum Statement {
    Register {
        name: String,
        table: Table,
        overwrite: bool,
    },
    Query {
        name: String,
        plan: QueryPlan,
    },
}

pub type Program = Vec<Statement>;

/// Named-table store. Tables are immutable once registered; statements
/// produce new bindings, never in-place edits.
#[derive(Clone, Debug, Default)]
pub struct Database {
    tables: IndexMap<String, Arc<Table>>,
}

impl Database {
    pub fn new() -> Database {
        Database::default()
    }

    pub fn get(&self, name: &str) -> Result<&Table, EngineError> {
        self.tables
            .get(name)
            .map(|t| t.as_ref())
            .ok_or_else(|| EngineError::UnknownTable(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tables.contains_key(name)
    }

    /// Names in registration order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(|s| s.as_str())
    }

    /// Returns a new database with `name` bound to `t`.
    pub fn register(
        &self,
        name: &str,
        t: Table,
        overwrite: bool,
    ) -> Result<Database, EngineError> {
        if !overwrite && self.tables.contains_key(name) {
            return Err(EngineError::DuplicateName(name.to_string()));
        }
        let mut db = self.clone();
        db.tables.insert(name.to_string(), Arc::new(t));
        Ok(db)
    }

    fn bind(&mut self, name: &str, t: Table) {
        self.tables.insert(name.to_string(), Arc::new(t));
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("table `{0}` is already registered")]
    DuplicateName(String),
    #[error("UDF error at operator {op_index} ({op}), row {row_index}: {message}")]
    Udf {
        op_index: usize,
        op: &'static str,
        row_index: usize,
        message: String,
    },
    #[error("filter predicate returned a non-boolean at operator {op_index}, row {row_index}")]
    PredType { op_index: usize, row_index: usize },
    #[error(
        "batch function returned {got} rows for a chunk of {expected} at operator {op_index}"
    )]
    BatchArity {
        op_index: usize,
        expected: usize,
        got: usize,
    },
}

/// Per-operator timing and row counts for one query.
#[derive(Debug, Clone)]
pub struct ProfileEntry {
    pub op: &'static str,
    pub in_rows: usize,
    pub out_rows: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ProfileReport {
    pub entries: Vec<ProfileEntry>,
    pub total_seconds: f64,
}

impl fmt::Display for ProfileReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>10} {:>10} {:>10}", "op", "in", "out", "sec")?;
        for e in &self.entries {
            writeln!(
                f,
                "{:<10} {:>10} {:>10} {:>10.3}",
                e.op, e.in_rows, e.out_rows, e.seconds
            )?;
        }
        write!(f, "{:<10} {:>10} {:>10} {:>10.3}", "total", "", "", self.total_seconds)
    }
}

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

/// Hash equijoin. Builds a key index over the right table, probes with the
/// left rows; output is left-major with right rows in registration order.
pub fn op_join(
    db: &Database,
    left: &Table,
    right_name: &str,
    key: &Udf,
    fkey: &Udf,
    append: bool,
    op_index: usize,
) -> Result<Table, EngineError> {
    let right = db.get(right_name)?;
    let mut index: HashMap<CanonicalKey, Vec<usize>> = HashMap::with_capacity(right.len());
    for (j, row) in right.rows.iter().enumerate() {
        let k = call_row(fkey, row, op_index, "join", j)?;
        index.entry(k.canonical_encode()).or_default().push(j);
    }
    let mut out = Vec::new();
    for (i, lrow) in left.rows.iter().enumerate() {
        let k = call_row(key, lrow, op_index, "join", i)?;
        if let Some(matches) = index.get(&k.canonical_encode()) {
            for &j in matches {
                out.push(join_row(lrow, &right.rows[j], append));
            }
        }
    }
    Ok(Table::new(out))
}

/// Output row shape shared by both engines: append onto an existing join
/// tuple, or start a fresh pair.
pub fn join_row(left: &Value, right: &Value, append: bool) -> Value {
    if append {
        if let Value::List(parts) = left {
            let mut tuple = parts.clone();
            tuple.push(right.clone());
            return Value::List(tuple);
        }
    }
    Value::List(vec![left.clone(), right.clone()])
}

pub fn op_project(t: &Table, f: &Udf, op_index: usize) -> Result<Table, EngineError> {
    let mut out = Vec::with_capacity(t.len());
    for (i, row) in t.rows.iter().enumerate() {
        out.push(call_row(f, row, op_index, "project", i)?);
    }
    Ok(Table::new(out))
}

pub fn op_project_batched(
    t: &Table,
    f: &Udf,
    batch_size: usize,
    op_index: usize,
) -> Result<Table, EngineError> {
    assert!(batch_size >= 1, "batch_size must be positive");
    let mut out = Vec::with_capacity(t.len());
    for (chunk_no, chunk) in t.rows.chunks(batch_size).enumerate() {
        let produced = match f {
            Udf::Batch(f) => f(chunk).map_err(|message| EngineError::Udf {
                op_index,
                op: "project",
                row_index: chunk_no * batch_size,
                message,
            })?,
            Udf::Row(_) => {
                let mut v = Vec::with_capacity(chunk.len());
                for (i, row) in chunk.iter().enumerate() {
                    v.push(call_row(f, row, op_index, "project", chunk_no * batch_size + i)?);
                }
                v
            }
            Udf::Table(_) => {
                return Err(EngineError::Udf {
                    op_index,
                    op: "project",
                    row_index: 0,
                    message: "table function passed to project".into(),
                })
            }
        };
        if produced.len() != chunk.len() {
            return Err(EngineError::BatchArity {
                op_index,
                expected: chunk.len(),
                got: produced.len(),
            });
        }
        out.extend(produced);
    }
    Ok(Table::new(out))
}

pub fn op_filter(t: &Table, pred: &Udf, op_index: usize) -> Result<Table, EngineError> {
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

/// Stable sort by UDF key; `reverse` flips the comparator but keeps
/// equal-key rows in their original relative order.
pub fn op_order_by(
    t: &Table,
    key: &Udf,
    reverse: bool,
    op_index: usize,
) -> Result<Table, EngineError> {
    let mut keyed: Vec<(Value, &Value)> = Vec::with_capacity(t.len());
    for (i, row) in t.rows.iter().enumerate() {
        keyed.push((call_row(key, row, op_index, "order_by", i)?, row));
    }
    keyed.sort_by(|a, b| {
        let ord = a.0.compare(&b.0);
        if reverse {
            ord.reverse()
        } else {
            ord
        }
    });
    Ok(keyed.into_iter().map(|(_, r)| r.clone()).collect())
}

/// Hash-based grouping. Output rows are `[key, subtable]` pairs in
/// first-occurrence order of the key; within-group order is preserved.
pub fn op_group_by(t: &Table, key: &Udf, op_index: usize) -> Result<Table, EngineError> {
    let mut slots: HashMap<CanonicalKey, usize> = HashMap::new();
    let mut groups: Vec<(Value, Vec<Value>)> = Vec::new();
    for (i, row) in t.rows.iter().enumerate() {
        let k = call_row(key, row, op_index, "group_by", i)?;
        let enc = k.canonical_encode();
        match slots.get(&enc) {
            Some(&slot) => groups[slot].1.push(row.clone()),
            None => {
                slots.insert(enc, groups.len());
                groups.push((k, vec![row.clone()]));
            }
        }
    }
    Ok(groups
        .into_iter()
        .map(|(k, rows)| Value::List(vec![k, Value::List(rows)]))
        .collect())
}

/// One-level flattening. Sets contribute their elements in comparison
/// order; non-collections pass through unchanged.
pub fn op_flatten(t: &Table) -> Table {
    let mut out = Vec::new();
    for row in &t.rows {
        match row {
            Value::List(xs) | Value::Set(xs) => out.extend(xs.iter().cloned()),
            other => out.push(other.clone()),
        }
    }
    Table::new(out)
}

/// Hash-set dedup: first occurrence of each distinct row kept, in order.
pub fn op_unique(t: &Table) -> Table {
    let mut seen: HashMap<CanonicalKey, ()> = HashMap::with_capacity(t.len());
    let mut out = Vec::new();
    for row in &t.rows {
        if seen.insert(row.canonical_encode(), ()).is_none() {
            out.push(row.clone());
        }
    }
    Table::new(out)
}

pub fn op_reduce(t: &Table, f: &Udf, op_index: usize) -> Result<Table, EngineError> {
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

fn apply_op(
    db: &Database,
    t: &Table,
    op: &OperatorSpec,
    appends: bool,
    op_index: usize,
) -> Result<Table, EngineError> {
    match op {
        OperatorSpec::Join { right, key, fkey } => {
            op_join(db, t, right, key, fkey, appends, op_index)
        }
        OperatorSpec::Project { f, batch_size } => match batch_size {
            Some(bs) => op_project_batched(t, f, *bs, op_index),
            None => op_project(t, f, op_index),
        },
        OperatorSpec::Filter { pred } => op_filter(t, pred, op_index),
        OperatorSpec::OrderBy { key, reverse } => op_order_by(t, key, *reverse, op_index),
        OperatorSpec::GroupBy { key } => op_group_by(t, key, op_index),
        OperatorSpec::Flatten => Ok(op_flatten(t)),
        OperatorSpec::Unique => Ok(op_unique(t)),
        OperatorSpec::Reduce { f } => op_reduce(t, f, op_index),
    }
}

/// Runs a query plan: `T0 = db[base]`, then each operator in order.
pub fn eval_query(
    db: &Database,
    plan: &QueryPlan,
    profile: bool,
) -> Result<(Table, Option<ProfileReport>), EngineError> {
    let start = Instant::now();
    let mut current = db.get(&plan.base)?.clone();
    let mut report = profile.then(ProfileReport::default);
    for (i, op) in plan.ops.iter().enumerate() {
        let appends = join_appends(&plan.ops, i);
        let in_rows = current.len();
        let op_start = Instant::now();
        current = apply_op(db, &current, op, appends, i)?;
        if let Some(r) = report.as_mut() {
            r.entries.push(ProfileEntry {
                op: op.kind(),
                in_rows,
                out_rows: current.len(),
                seconds: op_start.elapsed().as_secs_f64(),
            });
        }
    }
    if let Some(r) = report.as_mut() {
        r.total_seconds = start.elapsed().as_secs_f64();
    }
    Ok((current, report))
}

/// Runs a program: statements in order, each named result persisted for
/// later statements. All-or-nothing: on error the input database is
/// returned unchanged (callers keep their original value).
pub fn eval_program(db: &Database, program: &Program) -> Result<Database, EngineError> {
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
                let (t, _) = eval_query(&db, plan, false)?;
                db.bind(name, t);
            }
        }
    }
    Ok(db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::row;
    use crate::value::Value;

    fn ints(v: &[i64]) -> Table {
        v.iter().map(|&i| Value::Int(i)).collect()
    }

    fn field(name: &'static str) -> Udf {
        Udf::row(move |r| {
            r.field(name)
                .cloned()
                .ok_or_else(|| format!("missing field `{name}`"))
        })
    }

    #[test]
    fn register_then_lookup() {
        let db = Database::new();
        let t = ints(&[1, 2, 3]);
        let db = db.register("t", t.clone(), false).unwrap();
        assert_eq!(db.get("t").unwrap(), &t);
    }

    #[test]
    fn duplicate_register_rejected() {
        let db = Database::new().register("t", ints(&[1]), false).unwrap();
        assert!(matches!(
            db.register("t", ints(&[2]), false),
            Err(EngineError::DuplicateName(_))
        ));
        let db2 = db.register("t", ints(&[2]), true).unwrap();
        assert_eq!(db2.get("t").unwrap(), &ints(&[2]));
    }

    #[test]
    fn empty_ops_is_identity() {
        let db = Database::new()
            .register("a", ints(&[1]), false)
            .unwrap()
            .register("b", ints(&[7, 8]), false)
            .unwrap();
        let (t, _) = eval_query(&db, &QueryPlan::new("b"), false).unwrap();
        assert_eq!(t, ints(&[7, 8]));
    }

    #[test]
    fn join_example() {
        let left = Table::new(vec![row! {id: 1, x: "a"}, row! {id: 2, x: "b"}]);
        let right = Table::new(vec![row! {id: 1, y: 10}, row! {id: 3, y: 30}]);
        let db = Database::new()
            .register("l", left, false)
            .unwrap()
            .register("r", right, false)
            .unwrap();
        let plan = QueryPlan::new("l").join("r", field("id"), field("id"));
        let (t, _) = eval_query(&db, &plan, false).unwrap();
        assert_eq!(
            t,
            Table::new(vec![Value::List(vec![row! {id: 1, x: "a"}, row! {id: 1, y: 10}])])
        );
    }

    #[test]
    fn join_with_empty_right() {
        let db = Database::new()
            .register("l", ints(&[1, 2]), false)
            .unwrap()
            .register("r", Table::default(), false)
            .unwrap();
        let plan = QueryPlan::new("l").join(
            "r",
            Udf::pure_row(|v| v.clone()),
            Udf::pure_row(|v| v.clone()),
        );
        let (t, _) = eval_query(&db, &plan, false).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn join_duplicate_keys_left_major() {
        let left = Table::new(vec![row! {k: 1, n: "l0"}, row! {k: 1, n: "l1"}]);
        let right = Table::new(vec![row! {k: 1, n: "r0"}, row! {k: 1, n: "r1"}]);
        let db = Database::new()
            .register("l", left, false)
            .unwrap()
            .register("r", right, false)
            .unwrap();
        let plan = QueryPlan::new("l").join("r", field("k"), field("k"));
        let (t, _) = eval_query(&db, &plan, false).unwrap();
        assert_eq!(t.len(), 4);
        let names: Vec<String> = t
            .rows
            .iter()
            .map(|r| {
                let parts = r.as_list().unwrap();
                format!(
                    "{}{}",
                    match parts[0].field("n").unwrap() {
                        Value::Text(s) => s,
                        _ => unreachable!(),
                    },
                    match parts[1].field("n").unwrap() {
                        Value::Text(s) => s,
                        _ => unreachable!(),
                    }
                )
            })
            .collect();
        assert_eq!(names, vec!["l0r0", "l0r1", "l1r0", "l1r1"]);
    }

    #[test]
    fn chained_join_appends_flat_tuple() {
        let t = Table::new(vec![row! {k: 1}]);
        let db = Database::new().register("t", t, false).unwrap();
        let plan = QueryPlan::new("t")
            .join("t", field("k"), field("k"))
            .join("t", Udf::pure_row(|_| Value::Int(1)), field("k"));
        let (out, _) = eval_query(&db, &plan, false).unwrap();
        assert_eq!(out.rows[0].as_list().unwrap().len(), 3);
    }

    #[test]
    fn project_square() {
        let db = Database::new().register("t", ints(&[1, 2, 3]), false).unwrap();
        let plan = QueryPlan::new("t").project(Udf::pure_row(|v| match v {
            Value::Int(i) => Value::Int(i * i),
            other => other.clone(),
        }));
        let (t, _) = eval_query(&db, &plan, false).unwrap();
        assert_eq!(t, ints(&[1, 4, 9]));
    }

    #[test]
    fn filter_then_project_on_empty() {
        let db = Database::new().register("t", ints(&[1, 2]), false).unwrap();
        let plan = QueryPlan::new("t")
            .filter(Udf::pred(|_| false))
            .project(Udf::pure_row(|v| v.clone()));
        let (t, _) = eval_query(&db, &plan, false).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn filter_even() {
        let db = Database::new()
            .register("t", ints(&[1, 2, 3, 4]), false)
            .unwrap();
        let plan = QueryPlan::new("t").filter(Udf::pred(|v| matches!(v, Value::Int(i) if i % 2 == 0)));
        let (t, _) = eval_query(&db, &plan, false).unwrap();
        assert_eq!(t, ints(&[2, 4]));
    }

    #[test]
    fn filter_nonbool_is_type_error() {
        let db = Database::new().register("t", ints(&[1]), false).unwrap();
        let plan = QueryPlan::new("t").filter(Udf::pure_row(|_| Value::Int(1)));
        assert!(matches!(
            eval_query(&db, &plan, false),
            Err(EngineError::PredType { .. })
        ));
    }

    #[test]
    fn order_by_stable() {
        let t = Table::new(vec![
            row! {k: 3, p: "a"},
            row! {k: 1, p: "b"},
            row! {k: 3, p: "c"},
            row! {k: 2, p: "d"},
        ]);
        let db = Database::new().register("t", t, false).unwrap();
        let (out, _) = eval_query(
            &db,
            &QueryPlan::new("t").order_by(field("k"), false),
            false,
        )
        .unwrap();
        let order: Vec<&Value> = out.rows.iter().map(|r| r.field("p").unwrap()).collect();
        assert_eq!(
            order,
            vec![&Value::from("b"), &Value::from("d"), &Value::from("a"), &Value::from("c")]
        );
        // reverse keeps equal-key rows in original relative order
        let (rev, _) = eval_query(
            &db,
            &QueryPlan::new("t").order_by(field("k"), true),
            false,
        )
        .unwrap();
        let order: Vec<&Value> = rev.rows.iter().map(|r| r.field("p").unwrap()).collect();
        assert_eq!(
            order,
            vec![&Value::from("a"), &Value::from("c"), &Value::from("d"), &Value::from("b")]
        );
    }

    #[test]
    fn group_by_first_occurrence_order() {
        let db = Database::new()
            .register("t", ints(&[1, 2, 1, 3]), false)
            .unwrap();
        let plan = QueryPlan::new("t").group_by(Udf::pure_row(|v| v.clone()));
        let (t, _) = eval_query(&db, &plan, false).unwrap();
        let expect = Table::new(vec![
            Value::List(vec![Value::Int(1), Value::List(vec![Value::Int(1), Value::Int(1)])]),
            Value::List(vec![Value::Int(2), Value::List(vec![Value::Int(2)])]),
            Value::List(vec![Value::Int(3), Value::List(vec![Value::Int(3)])]),
        ]);
        assert_eq!(t, expect);
    }

    #[test]
    fn flatten_one_level() {
        let t = Table::new(vec![
            Value::List(vec![Value::Int(1), Value::Int(2)]),
            Value::Int(3),
            Value::List(vec![Value::Int(4)]),
        ]);
        assert_eq!(op_flatten(&t), ints(&[1, 2, 3, 4]));
        let nested = Table::new(vec![
            Value::List(vec![Value::List(vec![Value::Int(1), Value::Int(2)])]),
            Value::List(vec![Value::Int(3)]),
        ]);
        assert_eq!(
            op_flatten(&nested),
            Table::new(vec![
                Value::List(vec![Value::Int(1), Value::Int(2)]),
                Value::Int(3)
            ])
        );
        assert!(op_flatten(&Table::default()).is_empty());
    }

    #[test]
    fn unique_keeps_first_occurrences() {
        assert_eq!(op_unique(&ints(&[1, 2, 1, 3, 2])), ints(&[1, 2, 3]));
        assert_eq!(op_unique(&ints(&[4, 5])), ints(&[4, 5]));
        let nans = Table::new(vec![Value::Float(f64::NAN), Value::Float(f64::NAN)]);
        assert_eq!(op_unique(&nans).len(), 1);
    }

    #[test]
    fn reduce_sum_and_identity() {
        let db = Database::new().register("t", ints(&[1, 2, 3]), false).unwrap();
        let sum = Udf::table(|t: &Table| {
            let mut acc = 0i64;
            for r in &t.rows {
                if let Value::Int(i) = r {
                    acc += i;
                }
            }
            Ok(Reduced::One(Value::Int(acc)))
        });
        let (out, _) = eval_query(&db, &QueryPlan::new("t").reduce(sum), false).unwrap();
        assert_eq!(out, ints(&[6]));

        let count = Udf::table(|t: &Table| Ok(Reduced::One(Value::Int(t.len() as i64))));
        let db2 = Database::new().register("e", Table::default(), false).unwrap();
        let (out, _) = eval_query(&db2, &QueryPlan::new("e").reduce(count), false).unwrap();
        assert_eq!(out, ints(&[0]));

        let ident = Udf::table(|t: &Table| Ok(Reduced::Rows(t.rows.clone())));
        let (out, _) = eval_query(&db, &QueryPlan::new("t").reduce(ident), false).unwrap();
        assert_eq!(out, ints(&[1, 2, 3]));
    }

    #[test]
    fn batched_projection_chunking() {
        let t = ints(&[1, 2, 3, 4, 5, 6, 7]);
        let seen_chunks = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
        let sc = seen_chunks.clone();
        let f = Udf::batch(move |chunk| {
            sc.lock().unwrap().push(chunk.len());
            Ok(chunk.to_vec())
        });
        let out = op_project_batched(&t, &f, 3, 0).unwrap();
        assert_eq!(out, t);
        assert_eq!(*seen_chunks.lock().unwrap(), vec![3, 3, 1]);
    }

    #[test]
    fn batch_arity_violation() {
        let t = ints(&[1, 2]);
        let f = Udf::batch(|_| Ok(vec![Value::Int(0)]));
        assert!(matches!(
            op_project_batched(&t, &f, 2, 0),
            Err(EngineError::BatchArity { expected: 2, got: 1, .. })
        ));
    }

    #[test]
    fn program_persists_named_results() {
        let program = vec![
            Statement::Register {
                name: "a".into(),
                table: ints(&[1, 2]),
                overwrite: false,
            },
            Statement::Query {
                name: "b".into(),
                plan: QueryPlan::new("a").filter(Udf::pred(|_| true)),
            },
        ];
        let db = eval_program(&Database::new(), &program).unwrap();
        assert_eq!(db.get("a").unwrap(), db.get("b").unwrap());
    }

    #[test]
    fn empty_program_is_identity() {
        let db = Database::new().register("t", ints(&[9]), false).unwrap();
        let out = eval_program(&db, &Vec::new()).unwrap();
        assert_eq!(out.get("t").unwrap(), db.get("t").unwrap());
    }

    #[test]
    fn failing_program_leaves_caller_db_usable() {
        let db = Database::new().register("t", ints(&[1]), false).unwrap();
        let program = vec![
            Statement::Query {
                name: "x".into(),
                plan: QueryPlan::new("t").project(Udf::pure_row(|v| v.clone())),
            },
            Statement::Query {
                name: "y".into(),
                plan: QueryPlan::new("missing"),
            },
        ];
        assert!(eval_program(&db, &program).is_err());
        assert!(db.get("t").is_ok());
        assert!(!db.contains("x"));
    }

    #[test]
    fn udf_error_carries_position() {
        let db = Database::new().register("t", ints(&[1, 2, 3]), false).unwrap();
        let plan = QueryPlan::new("t").project(Udf::row(|v| match v {
            Value::Int(2) => Err("boom".to_string()),
            other => Ok(other.clone()),
        }));
        match eval_query(&db, &plan, false) {
            Err(EngineError::Udf {
                op_index, row_index, ..
            }) => {
                assert_eq!(op_index, 0);
                assert_eq!(row_index, 1);
            }
            other => panic!("expected UDF error, got {other:?}"),
        }
    }

    #[test]
    fn profile_covers_each_operator() {
        let db = Database::new()
            .register("t", ints(&[3, 1, 2, 1]), false)
            .unwrap();
        let plan = QueryPlan::new("t")
            .filter(Udf::pred(|_| true))
            .order_by(Udf::pure_row(|v| v.clone()), false)
            .unique();
        let (_, report) = eval_query(&db, &plan, true).unwrap();
        let report = report.unwrap();
        let kinds: Vec<&str> = report.entries.iter().map(|e| e.op).collect();
        assert_eq!(kinds, vec!["filter", "order_by", "unique"]);
        let sum: f64 = report.entries.iter().map(|e| e.seconds).sum();
        assert!(sum <= report.total_seconds);
    }
}
