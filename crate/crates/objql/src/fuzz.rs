//! Random databases and programs for differential testing of the
//! optimized executor against the reference interpreter.
//!
//! Generated UDFs are drawn from a fixed pool of twelve pure, total
//! functions, so the two executors can only disagree through the
//! operators themselves.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::engine::{eval_program, Database, Program, QueryPlan, Reduced, Statement, Udf};
use crate::reference::ref_eval_program;
use crate::value::{MapKey, Table, Value};

/// A pool of twelve pure value-to-value functions. Indices 0..=8 return
/// arbitrary values (usable as projection/key functions); 9..=11 return
/// booleans (usable as filter predicates).
pub fn udf_pool() -> Vec<(&'static str, Udf)> {
    fn length_of(v: &Value) -> i64 {
        match v {
            Value::List(xs) | Value::Set(xs) => xs.len() as i64,
            Value::Map(entries) => entries.len() as i64,
            Value::Text(s) => s.chars().count() as i64,
            _ => 0,
        }
    }
    vec![
        ("identity", Udf::pure_row(|v| v.clone())),
        ("const_one", Udf::pure_row(|_| Value::Int(1))),
        (
            "field_a_or_null",
            Udf::pure_row(|v| v.field("a").cloned().unwrap_or(Value::Null)),
        ),
        (
            "double_numeric",
            Udf::pure_row(|v| match v {
                Value::Int(i) => Value::Int(i.wrapping_mul(2)),
                Value::Float(x) => Value::Float(x * 2.0),
                other => other.clone(),
            }),
        ),
        ("stringify", Udf::pure_row(|v| Value::Text(v.to_string()))),
        ("length", Udf::pure_row(|v| Value::Int(length_of(v)))),
        (
            "head_or_self",
            Udf::pure_row(|v| match v.as_list() {
                Some([first, ..]) => first.clone(),
                _ => v.clone(),
            }),
        ),
        (
            "singleton_list",
            Udf::pure_row(|v| Value::List(vec![v.clone()])),
        ),
        (
            "bucket5",
            Udf::pure_row(|v| Value::Int((v.canonical_encode().0.len() % 5) as i64)),
        ),
        ("is_collection", Udf::pred(|v| {
            matches!(v, Value::List(_) | Value::Set(_) | Value::Map(_))
        })),
        ("even_length", Udf::pred(move |v| length_of(v) % 2 == 0)),
        (
            "truthy",
            Udf::pred(|v| match v {
                Value::Null => false,
                Value::Bool(b) => *b,
                Value::Int(i) => *i != 0,
                Value::Float(x) => *x != 0.0,
                Value::Text(s) => !s.is_empty(),
                Value::List(xs) | Value::Set(xs) => !xs.is_empty(),
                Value::Map(entries) => !entries.is_empty(),
            }),
        ),
    ]
}

fn any_udf(rng: &mut ChaCha8Rng, pool: &[(&'static str, Udf)]) -> Udf {
    pool[rng.gen_range(0..9)].1.clone()
}

fn pred_udf(rng: &mut ChaCha8Rng, pool: &[(&'static str, Udf)]) -> Udf {
    pool[rng.gen_range(9..12)].1.clone()
}

fn reduce_udf(rng: &mut ChaCha8Rng) -> Udf {
    match rng.gen_range(0..3) {
        0 => Udf::table(|t: &Table| Ok(Reduced::One(Value::Int(t.len() as i64)))),
        1 => Udf::table(|t: &Table| Ok(Reduced::Rows(t.rows.clone()))),
        _ => Udf::table(|t: &Table| {
            let mut rows = t.rows.clone();
            rows.reverse();
            Ok(Reduced::Rows(rows))
        }),
    }
}

pub fn random_value(rng: &mut ChaCha8Rng, depth: usize) -> Value {
    let pick = if depth == 0 {
        rng.gen_range(0..5)
    } else {
        rng.gen_range(0..8)
    };
    match pick {
        0 => Value::Null,
        1 => Value::Bool(rng.gen()),
        2 => Value::Int(rng.gen_range(-20..20)),
        3 => match rng.gen_range(0..3) {
            0 => Value::Float(rng.gen_range(-10.0..10.0)),
            1 => Value::Float(rng.gen_range(-5..5) as f64),
            _ => Value::Float(f64::NAN),
        },
        4 => {
            let n = rng.gen_range(0..4);
            Value::Text((0..n).map(|_| rng.gen_range('a'..='d')).collect())
        }
        5 => {
            let n = rng.gen_range(0..4);
            Value::List((0..n).map(|_| random_value(rng, depth - 1)).collect())
        }
        6 => {
            let n = rng.gen_range(0..4);
            Value::set((0..n).map(|_| random_value(rng, depth - 1)).collect())
        }
        _ => {
            let n = rng.gen_range(0..3);
            Value::map(
                ["a", "b", "c"]
                    .iter()
                    .take(n + 1)
                    .map(|k| (MapKey::Text(k.to_string()), random_value(rng, depth - 1)))
                    .collect(),
            )
        }
    }
}

pub fn random_table(rng: &mut ChaCha8Rng, max_rows: usize) -> Table {
    let n = rng.gen_range(0..=max_rows);
    (0..n).map(|_| random_value(rng, 2)).collect()
}

/// A random database of three tables plus a program of one to three
/// query statements, each a chain of at most `max_ops` operators.
pub fn gen_case(
    rng: &mut ChaCha8Rng,
    max_rows: usize,
    max_ops: usize,
) -> (Database, Program) {
    let pool = udf_pool();
    let mut db = Database::new();
    let mut names = Vec::new();
    for i in 0..3 {
        let name = format!("t{i}");
        db = db
            .register(&name, random_table(rng, max_rows), false)
            .expect("fresh name");
        names.push(name);
    }
    let n_stmts = rng.gen_range(1..=3);
    let mut program = Vec::new();
    for s in 0..n_stmts {
        let base = names[rng.gen_range(0..names.len())].clone();
        let mut plan = QueryPlan::new(base);
        for _ in 0..rng.gen_range(0..=max_ops) {
            plan = match rng.gen_range(0..9) {
                0 => {
                    let right = names[rng.gen_range(0..names.len())].clone();
                    plan.join(right, any_udf(rng, &pool), any_udf(rng, &pool))
                }
                1 => plan.project(any_udf(rng, &pool)),
                2 => {
                    let bs = [1usize, 3, 10][rng.gen_range(0..3)];
                    let f = any_udf(rng, &pool);
                    let batched = match f {
                        Udf::Row(inner) => Udf::batch(move |chunk| {
                            chunk.iter().map(|row| inner(row)).collect()
                        }),
                        other => other,
                    };
                    plan.project_batched(batched, bs)
                }
                3 => plan.filter(pred_udf(rng, &pool)),
                4 => plan.order_by(any_udf(rng, &pool), rng.gen()),
                5 => plan.group_by(any_udf(rng, &pool)),
                6 => plan.flatten(),
                7 => plan.unique(),
                _ => plan.reduce(reduce_udf(rng)),
            };
        }
        let name = format!("q{s}");
        program.push(Statement::Query { name: name.clone(), plan });
        names.push(name);
    }
    (db, program)
}

/// Runs one case through both executors and checks they agree: same
/// success/failure outcome, and on success every binding is equal.
pub fn run_case(db: &Database, program: &Program) -> Result<(), String> {
    let fast = eval_program(db, program);
    let slow = ref_eval_program(db, program);
    match (fast, slow) {
        (Ok(a), Ok(b)) => {
            let names_a: Vec<&str> = a.names().collect();
            let names_b: Vec<&str> = b.names().collect();
            if names_a != names_b {
                return Err(format!(
                    "binding sets differ: {names_a:?} vs {names_b:?}"
                ));
            }
            for name in names_a {
                let (ta, tb) = (a.get(name).unwrap(), b.get(name).unwrap());
                if ta != tb {
                    return Err(format!(
                        "table `{name}` differs: optimized {} rows, reference {} rows",
                        ta.len(),
                        tb.len()
                    ));
                }
            }
            Ok(())
        }
        (Err(_), Err(_)) => Ok(()),
        (Ok(_), Err(e)) => Err(format!("only the reference failed: {e}")),
        (Err(e), Ok(_)) => Err(format!("only the optimized engine failed: {e}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_has_twelve_udfs() {
        let pool = udf_pool();
        assert_eq!(pool.len(), 12);
        for (name, udf) in pool.iter().take(9) {
            assert!(matches!(udf, Udf::Row(_)), "{name} should be a row fn");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let (db1, p1) = gen_case(&mut ChaCha8Rng::seed_from_u64(11), 30, 5);
        let (db2, p2) = gen_case(&mut ChaCha8Rng::seed_from_u64(11), 30, 5);
        for name in ["t0", "t1", "t2"] {
            assert_eq!(db1.get(name).unwrap(), db2.get(name).unwrap());
        }
        assert_eq!(p1.len(), p2.len());
        run_case(&db1, &p1).unwrap();
        run_case(&db2, &p2).unwrap();
    }

    #[test]
    fn hundred_quick_cases_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..100 {
            let (db, program) = gen_case(&mut rng, 12, 4);
            if let Err(e) = run_case(&db, &program) {
                panic!("case {case} diverged: {e}");
            }
        }
    }
}
