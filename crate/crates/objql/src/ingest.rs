//! Dataset loading and saving.
//!
//! JSONL maps one line to one row. JSON has no set or non-finite-float
//! syntax, so two wrapper objects extend it: `{"$set": [...]}` decodes to
//! a set, and `{"$f": "nan" | "+inf" | "-inf"}` decodes to the matching
//! float. `save_jsonl` emits the same wrappers, so save/load round-trips
//! up to value equality.
//!
//! CSV (RFC 4180) is loaded with typed cells: an empty cell is null, a
//! cell that parses as an integer is an integer, a digit-bearing cell
//! that parses as a finite float is a float, anything else is text. With
//! a header row each record becomes a map keyed by column name; without
//! one each record becomes a list.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::value::{MapKey, Table, Value};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{0}")]
    Csv(String),
    #[error("row {row} is not representable as JSONL: {message}")]
    Unrepresentable { row: usize, message: String },
}

pub fn json_to_value(j: &serde_json::Value) -> Result<Value, String> {
    Ok(match j {
        serde_json::Value::Null => Value::Null,
        serde_json::Value::Bool(b) => Value::Bool(*b),
        serde_json::Value::Number(n) => match n.as_i64() {
            Some(i) => Value::Int(i),
            None => Value::Float(
                n.as_f64()
                    .ok_or_else(|| format!("number `{n}` out of range"))?,
            ),
        },
        serde_json::Value::String(s) => Value::Text(s.clone()),
        serde_json::Value::Array(xs) => Value::List(
            xs.iter()
                .map(json_to_value)
                .collect::<Result<Vec<_>, _>>()?,
        ),
        serde_json::Value::Object(obj) => {
            if obj.len() == 1 {
                match (obj.get("$set"), obj.get("$f")) {
                    (Some(serde_json::Value::Array(xs)), _) => {
                        return Ok(Value::set(
                            xs.iter()
                                .map(json_to_value)
                                .collect::<Result<Vec<_>, _>>()?,
                        ));
                    }
                    (_, Some(serde_json::Value::String(tag))) => {
                        return Ok(Value::Float(match tag.as_str() {
                            "nan" => f64::NAN,
                            "+inf" => f64::INFINITY,
                            "-inf" => f64::NEG_INFINITY,
                            other => return Err(format!("unknown float tag `{other}`")),
                        }));
                    }
                    _ => {}
                }
            }
            Value::map(
                obj.iter()
                    .map(|(k, v)| Ok((MapKey::Text(k.clone()), json_to_value(v)?)))
                    .collect::<Result<Vec<_>, String>>()?,
            )
        }
    })
}

pub fn value_to_json(v: &Value) -> Result<serde_json::Value, String> {
    Ok(match v {
        Value::Null => serde_json::Value::Null,
        Value::Bool(b) => serde_json::Value::Bool(*b),
        Value::Int(i) => serde_json::Value::Number((*i).into()),
        Value::Float(x) => {
            if x.is_nan() {
                serde_json::json!({"$f": "nan"})
            } else if x.is_infinite() {
                serde_json::json!({"$f": if *x > 0.0 { "+inf" } else { "-inf" }})
            } else {
                serde_json::Value::Number(
                    serde_json::Number::from_f64(*x).expect("finite float"),
                )
            }
        }
        Value::Text(s) => serde_json::Value::String(s.clone()),
        Value::List(xs) => serde_json::Value::Array(
            xs.iter()
                .map(value_to_json)
                .collect::<Result<Vec<_>, _>>()?,
        ),
        Value::Set(xs) => {
            serde_json::json!({"$set": xs
                .iter()
                .map(value_to_json)
                .collect::<Result<Vec<_>, String>>()?})
        }
        Value::Map(entries) => {
            if entries.len() == 1 {
                if let MapKey::Text(k) = &entries[0].0 {
                    if k == "$set" || k == "$f" {
                        return Err(format!(
                            "single-entry map with reserved key `{k}` collides with a wrapper"
                        ));
                    }
                }
            }
            let mut obj = serde_json::Map::with_capacity(entries.len());
            for (k, val) in entries {
                let key = match k {
                    MapKey::Text(s) => s.clone(),
                    MapKey::Int(i) => {
                        return Err(format!("integer map key `{i}` has no JSON form"))
                    }
                };
                obj.insert(key, value_to_json(val)?);
            }
            serde_json::Value::Object(obj)
        }
    })
}

pub fn load_jsonl(path: &Path) -> Result<Table, IngestError> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let j: serde_json::Value =
            serde_json::from_str(line).map_err(|e| IngestError::Json {
                line: i + 1,
                message: e.to_string(),
            })?;
        rows.push(json_to_value(&j).map_err(|message| IngestError::Json {
            line: i + 1,
            message,
        })?);
    }
    Ok(Table::new(rows))
}

/// Writes one compact JSON object per row. Output is deterministic for a
/// given table (maps iterate in key order), so identical tables save to
/// identical bytes.
pub fn save_jsonl(path: &Path, t: &Table) -> Result<(), IngestError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (i, row) in t.rows.iter().enumerate() {
        let j = value_to_json(row).map_err(|message| IngestError::Unrepresentable {
            row: i,
            message,
        })?;
        serde_json::to_writer(&mut w, &j).map_err(|e| IngestError::Io(e.into()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn type_cell(cell: &str) -> Value {
    if cell.is_empty() {
        return Value::Null;
    }
    if let Ok(i) = cell.parse::<i64>() {
        return Value::Int(i);
    }
    // only digit-bearing cells may become floats, so "nan"/"inf" stay text
    if cell.bytes().any(|b| b.is_ascii_digit()) {
        if let Ok(f) = cell.parse::<f64>() {
            if f.is_finite() {
                return Value::Float(f);
            }
        }
    }
    Value::Text(cell.to_string())
}

pub fn load_csv(path: &Path, has_header: bool) -> Result<Table, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => match e.into_kind() {
                csv::ErrorKind::Io(io) => IngestError::Io(io),
                _ => unreachable!(),
            },
            _ => IngestError::Csv(e.to_string()),
        })?;
    let header: Vec<String> = if has_header {
        reader
            .headers()
            .map_err(|e| IngestError::Csv(e.to_string()))?
            .iter()
            .map(|s| s.to_string())
            .collect()
    } else {
        Vec::new()
    };
    let mut width = if has_header { Some(header.len()) } else { None };
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| IngestError::Csv(e.to_string()))?;
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(IngestError::Ragged {
                row: i + 1,
                expected,
                found: record.len(),
            });
        }
        let cells = record.iter().map(type_cell);
        if has_header {
            rows.push(Value::map(
                header
                    .iter()
                    .cloned()
                    .map(MapKey::Text)
                    .zip(cells)
                    .collect::<Vec<_>>(),
            ));
        } else {
            rows.push(Value::List(cells.collect()));
        }
    }
    Ok(Table::new(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::row;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn write_file(dir: &Path, name: &str, contents: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, contents).unwrap();
        p
    }

    #[test]
    fn jsonl_basic_types() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "t.jsonl",
            "{\"a\": 1, \"b\": [1.5, null, true], \"c\": \"x\"}\n\n{\"a\": 2}\n",
        );
        let t = load_jsonl(&p).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.rows[0].field("a").unwrap(), &Value::Int(1));
        assert_eq!(
            t.rows[0].field("b").unwrap(),
            &Value::List(vec![Value::Float(1.5), Value::Null, Value::Bool(true)])
        );
    }

    #[test]
    fn jsonl_wrappers() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "t.jsonl",
            "{\"$set\": [3, 1, 2, 1]}\n{\"$f\": \"nan\"}\n{\"$f\": \"+inf\"}\n{\"$f\": \"-inf\"}\n",
        );
        let t = load_jsonl(&p).unwrap();
        assert_eq!(
            t.rows[0],
            Value::set(vec![Value::Int(1), Value::Int(2), Value::Int(3)])
        );
        assert!(matches!(t.rows[1], Value::Float(f) if f.is_nan()));
        assert_eq!(t.rows[2], Value::Float(f64::INFINITY));
        assert_eq!(t.rows[3], Value::Float(f64::NEG_INFINITY));
    }

    #[test]
    fn jsonl_error_carries_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(dir.path(), "t.jsonl", "{\"a\": 1}\nnot json\n");
        match load_jsonl(&p) {
            Err(IngestError::Json { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected JSON error, got {other:?}"),
        }
    }

    #[test]
    fn save_is_deterministic_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let t = Table::new(vec![
            row! {b: 2, a: 1},
            Value::set(vec![Value::Int(2), Value::Int(1)]),
            Value::Float(f64::NAN),
            Value::Float(2.0),
        ]);
        let p1 = dir.path().join("a.jsonl");
        let p2 = dir.path().join("b.jsonl");
        save_jsonl(&p1, &t).unwrap();
        save_jsonl(&p2, &t).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        assert_eq!(load_jsonl(&p1).unwrap(), t);
    }

    #[test]
    fn reserved_wrapper_key_refused_on_save() {
        let dir = tempfile::tempdir().unwrap();
        let t = Table::new(vec![Value::map(vec![(
            MapKey::Text("$set".into()),
            Value::Int(1),
        )])]);
        assert!(matches!(
            save_jsonl(&dir.path().join("x.jsonl"), &t),
            Err(IngestError::Unrepresentable { .. })
        ));
    }

    #[test]
    fn int_map_keys_refused_on_save() {
        let dir = tempfile::tempdir().unwrap();
        let t = Table::new(vec![Value::map(vec![(MapKey::Int(3), Value::Int(1))])]);
        assert!(matches!(
            save_jsonl(&dir.path().join("x.jsonl"), &t),
            Err(IngestError::Unrepresentable { .. })
        ));
    }

    #[test]
    fn csv_typing_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "t.csv",
            "id,score,name,note\n1,3.5,alice,\n2,4,\"b,ob\",nan\n",
        );
        let t = load_csv(&p, true).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.rows[0].field("id").unwrap(), &Value::Int(1));
        assert_eq!(t.rows[0].field("score").unwrap(), &Value::Float(3.5));
        assert_eq!(t.rows[0].field("note").unwrap(), &Value::Null);
        assert_eq!(t.rows[1].field("score").unwrap(), &Value::Int(4));
        assert_eq!(t.rows[1].field("name").unwrap(), &Value::from("b,ob"));
        // "nan" has no digit so it stays text
        assert_eq!(t.rows[1].field("note").unwrap(), &Value::from("nan"));
    }

    #[test]
    fn csv_headerless_rows_are_lists() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(dir.path(), "t.csv", "1,x\n2,y\n");
        let t = load_csv(&p, false).unwrap();
        assert_eq!(
            t.rows[0],
            Value::List(vec![Value::Int(1), Value::from("x")])
        );
    }

    #[test]
    fn csv_ragged_row_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(dir.path(), "t.csv", "a,b\n1,2\n3\n");
        match load_csv(&p, true) {
            Err(IngestError::Ragged { row, expected, found }) => {
                assert_eq!((row, expected, found), (2, 2, 1));
            }
            other => panic!("expected ragged error, got {other:?}"),
        }
    }

    fn random_value(rng: &mut ChaCha8Rng, depth: usize) -> Value {
        let pick = if depth == 0 {
            rng.gen_range(0..5)
        } else {
            rng.gen_range(0..8)
        };
        match pick {
            0 => Value::Null,
            1 => Value::Bool(rng.gen()),
            2 => Value::Int(rng.gen_range(-1_000_000..1_000_000)),
            3 => {
                // mix of ordinary, integral, and non-finite floats
                match rng.gen_range(0..4) {
                    0 => Value::Float(rng.gen_range(-1e6..1e6)),
                    1 => Value::Float(rng.gen_range(-100..100) as f64),
                    2 => Value::Float(f64::NAN),
                    _ => Value::Float(f64::INFINITY * if rng.gen() { 1.0 } else { -1.0 }),
                }
            }
            4 => {
                let n = rng.gen_range(0..8);
                Value::Text((0..n).map(|_| rng.gen_range('a'..='z')).collect())
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
                let n = rng.gen_range(0..4);
                Value::map(
                    (0..n)
                        .map(|i| {
                            (
                                MapKey::Text(format!("k{i}")),
                                random_value(rng, depth - 1),
                            )
                        })
                        .collect::<Vec<_>>(),
                )
            }
        }
    }

    #[test]
    fn random_tables_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rt.jsonl");
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let n = rng.gen_range(0..6);
            let t: Table = (0..n).map(|_| random_value(&mut rng, 2)).collect();
            save_jsonl(&p, &t).unwrap();
            let back = load_jsonl(&p).unwrap();
            assert_eq!(back, t, "round trip changed the table");
        }
    }
}
