//! Script AST. Every node carries its source position; equality ignores
//! positions so pretty-print/reparse round trips can be compared.

use crate::value::Value;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Mul,
    Div,
    Mod,
    Add,
    Sub,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub node: ExprNode,
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprNode {
    Lit(Value),
    /// `it`, the whole current row.
    It,
    /// `_0`..`_9`, a join-tuple position.
    Pos(usize),
    Field(Box<Expr>, String),
    Index(Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
    ListLit(Vec<Expr>),
    MapLit(Vec<(String, Expr)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone)]
pub enum OpAst {
    Join { right: String, key: Expr, fkey: Expr },
    Project { f: Expr, batch_size: Option<usize> },
    Filter(Expr),
    OrderBy { key: Expr, reverse: bool },
    GroupBy(Expr),
    Flatten,
    Unique,
    Reduce(Expr),
}

impl PartialEq for OpAst {
    fn eq(&self, other: &Self) -> bool {
        use OpAst::*;
        match (self, other) {
            (
                Join { right: r1, key: k1, fkey: f1 },
                Join { right: r2, key: k2, fkey: f2 },
            ) => r1 == r2 && k1 == k2 && f1 == f2,
            (
                Project { f: f1, batch_size: b1 },
                Project { f: f2, batch_size: b2 },
            ) => f1 == f2 && b1 == b2,
            (Filter(a), Filter(b)) => a == b,
            (
                OrderBy { key: k1, reverse: r1 },
                OrderBy { key: k2, reverse: r2 },
            ) => k1 == k2 && r1 == r2,
            (GroupBy(a), GroupBy(b)) => a == b,
            (Flatten, Flatten) | (Unique, Unique) => true,
            (Reduce(a), Reduce(b)) => a == b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub enum StmtAst {
    Register {
        name: String,
        path: String,
        format: SourceFormat,
        line: u32,
        col: u32,
    },
    Query {
        name: String,
        base: String,
        ops: Vec<OpAst>,
        line: u32,
        col: u32,
    },
}

impl PartialEq for StmtAst {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                StmtAst::Register {
                    name: n1,
                    path: p1,
                    format: f1,
                    ..
                },
                StmtAst::Register {
                    name: n2,
                    path: p2,
                    format: f2,
                    ..
                },
            ) => n1 == n2 && p1 == p2 && f1 == f2,
            (
                StmtAst::Query {
                    name: n1,
                    base: b1,
                    ops: o1,
                    ..
                },
                StmtAst::Query {
                    name: n2,
                    base: b2,
                    ops: o2,
                    ..
                },
            ) => n1 == n2 && b1 == b2 && o1 == o2,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProgramAst {
    pub statements: Vec<StmtAst>,
}

fn write_str_lit(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    write!(f, "\"")?;
    for c in s.chars() {
        match c {
            '"' => write!(f, "\\\"")?,
            '\\' => write!(f, "\\\\")?,
            '\n' => write!(f, "\\n")?,
            '\t' => write!(f, "\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    write!(f, "\"")
}

impl fmt::Display for Expr {
    /// Fully parenthesized so the output reparses to an equal AST.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_inner(f)
    }
}

impl Expr {
    fn fmt_inner(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            ExprNode::Lit(Value::Text(s)) => write_str_lit(f, s),
            ExprNode::Lit(Value::Float(x)) => {
                let s = format!("{x}");
                if s.contains(['.', 'e', 'E']) {
                    write!(f, "{s}")
                } else {
                    write!(f, "{s}.0")
                }
            }
            ExprNode::Lit(v) => write!(f, "{v}"),
            ExprNode::It => write!(f, "it"),
            ExprNode::Pos(i) => write!(f, "_{i}"),
            ExprNode::Field(e, name) => write!(f, "{e}.{name}"),
            ExprNode::Index(e, i) => write!(f, "{e}[{i}]"),
            ExprNode::Unary(op, e) => {
                write!(f, "({}{e})", if *op == UnOp::Neg { "-" } else { "!" })
            }
            ExprNode::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            ExprNode::Cond(c, t, e) => write!(f, "({c} ? {t} : {e})"),
            ExprNode::Call(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            ExprNode::ListLit(xs) => {
                write!(f, "[")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
            ExprNode::MapLit(entries) => {
                write!(f, "{{")?;
                for (i, (k, v)) in entries.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

impl fmt::Display for OpAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpAst::Join { right, key, fkey } => {
                write!(f, "join({right}, key={key}, fkey={fkey})")
            }
            OpAst::Project { f: e, batch_size } => match batch_size {
                Some(bs) => write!(f, "project({e}, bs={bs})"),
                None => write!(f, "project({e})"),
            },
            OpAst::Filter(e) => write!(f, "filter({e})"),
            OpAst::OrderBy { key, reverse } => {
                if *reverse {
                    write!(f, "order_by({key}, reverse=true)")
                } else {
                    write!(f, "order_by({key})")
                }
            }
            OpAst::GroupBy(e) => write!(f, "group_by({e})"),
            OpAst::Flatten => write!(f, "flatten()"),
            OpAst::Unique => write!(f, "unique()"),
            OpAst::Reduce(e) => write!(f, "reduce({e})"),
        }
    }
}

impl fmt::Display for StmtAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StmtAst::Register {
                name, path, format, ..
            } => {
                write!(f, "register {name} ")?;
                write_str_lit(f, path)?;
                match format {
                    SourceFormat::Jsonl => write!(f, " as jsonl;"),
                    SourceFormat::Csv => write!(f, " as csv;"),
                }
            }
            StmtAst::Query {
                name, base, ops, ..
            } => {
                write!(f, "{name} <- {base}")?;
                for op in ops {
                    write!(f, ".{op}")?;
                }
                write!(f, ";")
            }
        }
    }
}

impl fmt::Display for ProgramAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for stmt in &self.statements {
            writeln!(f, "{stmt}")?;
        }
        Ok(())
    }
}
