//! Compiles a script AST into an engine program. Each expression is
//! closed into a UDF over the row; register statements load their
//! datasets eagerly via the ingest module.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::ast::{Expr, ExprNode, OpAst, ProgramAst, SourceFormat, StmtAst};
use super::eval::{eval_expr, BUILTINS};
use crate::engine::{OperatorSpec, Program, QueryPlan, Reduced, Statement, Udf};
use crate::ingest::{self, IngestError};
use crate::value::Value;

#[derive(Debug, thiserror::Error)]
pub enum CompileError {
    #[error("line {line}, col {col}: unknown builtin `{name}`")]
    UnknownBuiltin { name: String, line: u32, col: u32 },
    #[error("line {line}, col {col}: failed to load `{path}`: {source}")]
    Load {
        path: PathBuf,
        line: u32,
        col: u32,
        source: IngestError,
    },
}

fn check_builtins(e: &Expr) -> Result<(), CompileError> {
    match &e.node {
        ExprNode::Call(name, args) => {
            if !BUILTINS.contains(&name.as_str()) {
                return Err(CompileError::UnknownBuiltin {
                    name: name.clone(),
                    line: e.line,
                    col: e.col,
                });
            }
            args.iter().try_for_each(check_builtins)
        }
        ExprNode::Field(inner, _) => check_builtins(inner),
        ExprNode::Index(a, b) | ExprNode::Binary(_, a, b) => {
            check_builtins(a)?;
            check_builtins(b)
        }
        ExprNode::Unary(_, inner) => check_builtins(inner),
        ExprNode::Cond(a, b, c) => {
            check_builtins(a)?;
            check_builtins(b)?;
            check_builtins(c)
        }
        ExprNode::ListLit(items) => items.iter().try_for_each(check_builtins),
        ExprNode::MapLit(entries) => entries.iter().try_for_each(|(_, v)| check_builtins(v)),
        _ => Ok(()),
    }
}

/// Row UDF evaluating `expr` with `it` bound to the row.
pub fn compile_expr(expr: &Expr) -> Result<Udf, CompileError> {
    check_builtins(expr)?;
    let e = Arc::new(expr.clone());
    Ok(Udf::row(move |row| {
        eval_expr(&e, row).map_err(|err| err.message)
    }))
}

fn compile_reduce(expr: &Expr) -> Result<Udf, CompileError> {
    check_builtins(expr)?;
    let e = Arc::new(expr.clone());
    Ok(Udf::table(move |t| {
        let whole = Value::List(t.rows.clone());
        match eval_expr(&e, &whole).map_err(|err| err.message)? {
            Value::List(rows) => Ok(Reduced::Rows(rows)),
            other => Ok(Reduced::One(other)),
        }
    }))
}

fn compile_batched(expr: &Expr) -> Result<Udf, CompileError> {
    check_builtins(expr)?;
    let e = Arc::new(expr.clone());
    Ok(Udf::batch(move |chunk| {
        chunk
            .iter()
            .map(|row| eval_expr(&e, row).map_err(|err| err.message))
            .collect()
    }))
}

pub fn compile_op(op: &OpAst) -> Result<OperatorSpec, CompileError> {
    Ok(match op {
        OpAst::Join { right, key, fkey } => OperatorSpec::Join {
            right: right.clone(),
            key: compile_expr(key)?,
            fkey: compile_expr(fkey)?,
        },
        OpAst::Project { f, batch_size } => match batch_size {
            Some(bs) => OperatorSpec::Project {
                f: compile_batched(f)?,
                batch_size: Some(*bs),
            },
            None => OperatorSpec::Project {
                f: compile_expr(f)?,
                batch_size: None,
            },
        },
        OpAst::Filter(e) => OperatorSpec::Filter {
            pred: compile_expr(e)?,
        },
        OpAst::OrderBy { key, reverse } => OperatorSpec::OrderBy {
            key: compile_expr(key)?,
            reverse: *reverse,
        },
        OpAst::GroupBy(e) => OperatorSpec::GroupBy {
            key: compile_expr(e)?,
        },
        OpAst::Flatten => OperatorSpec::Flatten,
        OpAst::Unique => OperatorSpec::Unique,
        OpAst::Reduce(e) => OperatorSpec::Reduce {
            f: compile_reduce(e)?,
        },
    })
}

/// Compiles a whole script; dataset paths resolve under `data_dir`.
pub fn compile_program(ast: &ProgramAst, data_dir: &Path) -> Result<Program, CompileError> {
    let mut program = Vec::with_capacity(ast.statements.len());
    for stmt in &ast.statements {
        match stmt {
            StmtAst::Register {
                name,
                path,
                format,
                line,
                col,
            } => {
                let full = data_dir.join(path);
                let table = match format {
                    SourceFormat::Jsonl => ingest::load_jsonl(&full),
                    SourceFormat::Csv => ingest::load_csv(&full, true),
                }
                .map_err(|source| CompileError::Load {
                    path: full.clone(),
                    line: *line,
                    col: *col,
                    source,
                })?;
                program.push(Statement::Register {
                    name: name.clone(),
                    table,
                    overwrite: false,
                });
            }
            StmtAst::Query { name, base, ops, .. } => {
                let mut plan = QueryPlan::new(base.clone());
                for op in ops {
                    plan.ops.push(compile_op(op)?);
                }
                program.push(Statement::Query {
                    name: name.clone(),
                    plan,
                });
            }
        }
    }
    Ok(program)
}
