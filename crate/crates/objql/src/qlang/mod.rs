//! Text front end for the query language.
//!
//! Scripts (`.tql`) are lexed, parsed by recursive descent into an AST,
//! and compiled into engine programs. Operator UDFs are written in a
//! small pure expression sublanguage: `it` binds the current row,
//! `_0`..`_9` bind join-tuple positions.

mod ast;
mod compile;
mod eval;
mod lexer;
mod parser;

pub use ast::{BinOp, Expr, ExprNode, OpAst, ProgramAst, SourceFormat, StmtAst, UnOp};
pub use compile::{compile_program, CompileError};
pub use eval::{eval_expr, quantile, EvalError};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::{parse_program, parse_statement, ParseError};

/// Lex and parse a script in one step.
pub fn parse_source(src: &str) -> Result<ProgramAst, ParseError> {
    parse_program(&tokenize(src)?)
}
