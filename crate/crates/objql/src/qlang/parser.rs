//! Recursive-descent parser for scripts and the expression sublanguage.
//!
//! Precedence, loosest to tightest: `?:`, `||`, `&&`, comparisons,
//! `+ -`, `* / %`, unary, postfix (`.field`, `[index]`). Binary
//! operators are left-associative.

use super::ast::*;
use super::lexer::{Token, TokenKind};
use crate::value::Value;

#[derive(Debug, Clone, thiserror::Error)]
#[error("line {line}, col {col}: {message}")]
pub struct ParseError {
    pub message: String,
    pub line: u32,
    pub col: u32,
    pub expected: Vec<String>,
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn bump(&mut self) -> &Token {
        let t = &self.tokens[self.pos.min(self.tokens.len() - 1)];
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, tok: &Token, expected: &[&str]) -> ParseError {
        let found = if tok.kind == TokenKind::Eof {
            "end of input".to_string()
        } else {
            format!("`{}`", tok.lexeme)
        };
        ParseError {
            message: format!(
                "unexpected {found}, expected {}",
                expected.join(" or ")
            ),
            line: tok.line,
            col: tok.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expect_punct(&mut self, p: &'static str) -> Result<(), ParseError> {
        if self.peek().kind == TokenKind::Punct(p) {
            self.bump();
            Ok(())
        } else {
            Err(self.error_at(self.peek(), &[p]))
        }
    }

    fn eat_punct(&mut self, p: &'static str) -> bool {
        if self.peek().kind == TokenKind::Punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_ident(&mut self, what: &'static str) -> Result<String, ParseError> {
        match &self.peek().kind {
            TokenKind::Ident => Ok(self.bump().lexeme.clone()),
            _ => Err(self.error_at(self.peek(), &[what])),
        }
    }

    /// Matches a specific contextual word (stored as a plain ident).
    fn expect_word(&mut self, word: &'static str) -> Result<(), ParseError> {
        let tok = self.peek();
        let matches = matches!(tok.kind, TokenKind::Ident | TokenKind::Keyword)
            && tok.lexeme == word;
        if matches {
            self.bump();
            Ok(())
        } else {
            Err(self.error_at(self.peek(), &[word]))
        }
    }
}

pub fn parse_program(tokens: &[Token]) -> Result<ProgramAst, ParseError> {
    let mut p = Parser { tokens, pos: 0 };
    let mut statements = Vec::new();
    while p.peek().kind != TokenKind::Eof {
        statements.push(parse_stmt(&mut p)?);
    }
    Ok(ProgramAst { statements })
}

/// Parses exactly one statement (REPL entry point); the trailing
/// semicolon is optional there.
pub fn parse_statement(tokens: &[Token]) -> Result<StmtAst, ParseError> {
    let mut p = Parser { tokens, pos: 0 };
    let stmt = parse_stmt_body(&mut p)?;
    p.eat_punct(";");
    if p.peek().kind != TokenKind::Eof {
        return Err(p.error_at(p.peek(), &["end of statement"]));
    }
    Ok(stmt)
}

fn parse_stmt(p: &mut Parser) -> Result<StmtAst, ParseError> {
    let stmt = parse_stmt_body(p)?;
    p.expect_punct(";")?;
    Ok(stmt)
}

fn parse_stmt_body(p: &mut Parser) -> Result<StmtAst, ParseError> {
    let tok = p.peek().clone();
    if tok.kind == TokenKind::Keyword && tok.lexeme == "register" {
        p.bump();
        let name = p.expect_ident("table name")?;
        let path = match &p.peek().kind {
            TokenKind::Str(s) => {
                let s = s.clone();
                p.bump();
                s
            }
            _ => return Err(p.error_at(p.peek(), &["dataset path string"])),
        };
        let format = if p.peek().kind == TokenKind::Keyword && p.peek().lexeme == "as" {
            p.bump();
            let fmt_tok = p.peek().clone();
            match fmt_tok.lexeme.as_str() {
                "jsonl" => {
                    p.bump();
                    SourceFormat::Jsonl
                }
                "csv" => {
                    p.bump();
                    SourceFormat::Csv
                }
                _ => return Err(p.error_at(&fmt_tok, &["jsonl", "csv"])),
            }
        } else {
            SourceFormat::Jsonl
        };
        Ok(StmtAst::Register {
            name,
            path,
            format,
            line: tok.line,
            col: tok.col,
        })
    } else if tok.kind == TokenKind::Ident {
        let name = p.bump().lexeme.clone();
        p.expect_punct("<-")?;
        let base = p.expect_ident("base table name")?;
        let mut ops = Vec::new();
        while p.eat_punct(".") {
            ops.push(parse_op(p)?);
        }
        Ok(StmtAst::Query {
            name,
            base,
            ops,
            line: tok.line,
            col: tok.col,
        })
    } else {
        Err(p.error_at(&tok, &["register", "query name"]))
    }
}

fn parse_op(p: &mut Parser) -> Result<OpAst, ParseError> {
    let tok = p.peek().clone();
    let op_name = match tok.kind {
        TokenKind::Ident => tok.lexeme.clone(),
        _ => {
            return Err(p.error_at(
                &tok,
                &["join", "project", "filter", "order_by", "group_by", "flatten", "unique", "reduce"],
            ))
        }
    };
    p.bump();
    p.expect_punct("(")?;
    let op = match op_name.as_str() {
        "join" => {
            let right = p.expect_ident("table name")?;
            p.expect_punct(",")?;
            p.expect_word("key")?;
            p.expect_punct("=")?;
            let key = parse_expr(p)?;
            p.expect_punct(",")?;
            p.expect_word("fkey")?;
            p.expect_punct("=")?;
            let fkey = parse_expr(p)?;
            OpAst::Join { right, key, fkey }
        }
        "project" => {
            let f = parse_expr(p)?;
            let batch_size = if p.eat_punct(",") {
                p.expect_word("bs")?;
                p.expect_punct("=")?;
                match p.peek().kind {
                    TokenKind::Int(i) if i >= 1 => {
                        p.bump();
                        Some(i as usize)
                    }
                    _ => return Err(p.error_at(p.peek(), &["positive batch size"])),
                }
            } else {
                None
            };
            OpAst::Project { f, batch_size }
        }
        "filter" => OpAst::Filter(parse_expr(p)?),
        "order_by" => {
            let key = parse_expr(p)?;
            let reverse = if p.eat_punct(",") {
                p.expect_word("reverse")?;
                p.expect_punct("=")?;
                let tok = p.peek().clone();
                match tok.lexeme.as_str() {
                    "true" => {
                        p.bump();
                        true
                    }
                    "false" => {
                        p.bump();
                        false
                    }
                    _ => return Err(p.error_at(&tok, &["true", "false"])),
                }
            } else {
                false
            };
            OpAst::OrderBy { key, reverse }
        }
        "group_by" => OpAst::GroupBy(parse_expr(p)?),
        "flatten" => OpAst::Flatten,
        "unique" => OpAst::Unique,
        "reduce" => OpAst::Reduce(parse_expr(p)?),
        _ => {
            return Err(p.error_at(
                &tok,
                &["join", "project", "filter", "order_by", "group_by", "flatten", "unique", "reduce"],
            ))
        }
    };
    p.expect_punct(")")?;
    Ok(op)
}

fn expr(node: ExprNode, tok: &Token) -> Expr {
    Expr {
        node,
        line: tok.line,
        col: tok.col,
    }
}

fn parse_expr(p: &mut Parser) -> Result<Expr, ParseError> {
    parse_cond(p)
}

fn parse_cond(p: &mut Parser) -> Result<Expr, ParseError> {
    let c = parse_or(p)?;
    if p.peek().kind == TokenKind::Punct("?") {
        let tok = p.bump().clone();
        let t = parse_expr(p)?;
        p.expect_punct(":")?;
        let e = parse_expr(p)?;
        Ok(expr(ExprNode::Cond(Box::new(c), Box::new(t), Box::new(e)), &tok))
    } else {
        Ok(c)
    }
}

fn parse_or(p: &mut Parser) -> Result<Expr, ParseError> {
    let mut lhs = parse_and(p)?;
    while p.peek().kind == TokenKind::Punct("||") {
        let tok = p.bump().clone();
        let rhs = parse_and(p)?;
        lhs = expr(ExprNode::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs)), &tok);
    }
    Ok(lhs)
}

fn parse_and(p: &mut Parser) -> Result<Expr, ParseError> {
    let mut lhs = parse_cmp(p)?;
    while p.peek().kind == TokenKind::Punct("&&") {
        let tok = p.bump().clone();
        let rhs = parse_cmp(p)?;
        lhs = expr(ExprNode::Binary(BinOp::And, Box::new(lhs), Box::new(rhs)), &tok);
    }
    Ok(lhs)
}

fn cmp_op(kind: &TokenKind) -> Option<BinOp> {
    match kind {
        TokenKind::Punct("==") => Some(BinOp::Eq),
        TokenKind::Punct("!=") => Some(BinOp::Ne),
        TokenKind::Punct("<") => Some(BinOp::Lt),
        TokenKind::Punct("<=") => Some(BinOp::Le),
        TokenKind::Punct(">") => Some(BinOp::Gt),
        TokenKind::Punct(">=") => Some(BinOp::Ge),
        _ => None,
    }
}

fn parse_cmp(p: &mut Parser) -> Result<Expr, ParseError> {
    let mut lhs = parse_add(p)?;
    while let Some(op) = cmp_op(&p.peek().kind) {
        let tok = p.bump().clone();
        let rhs = parse_add(p)?;
        lhs = expr(ExprNode::Binary(op, Box::new(lhs), Box::new(rhs)), &tok);
    }
    Ok(lhs)
}

fn parse_add(p: &mut Parser) -> Result<Expr, ParseError> {
    let mut lhs = parse_mul(p)?;
    loop {
        let op = match p.peek().kind {
            TokenKind::Punct("+") => BinOp::Add,
            TokenKind::Punct("-") => BinOp::Sub,
            _ => break,
        };
        let tok = p.bump().clone();
        let rhs = parse_mul(p)?;
        lhs = expr(ExprNode::Binary(op, Box::new(lhs), Box::new(rhs)), &tok);
    }
    Ok(lhs)
}

fn parse_mul(p: &mut Parser) -> Result<Expr, ParseError> {
    let mut lhs = parse_unary(p)?;
    loop {
        let op = match p.peek().kind {
            TokenKind::Punct("*") => BinOp::Mul,
            TokenKind::Punct("/") => BinOp::Div,
            TokenKind::Punct("%") => BinOp::Mod,
            _ => break,
        };
        let tok = p.bump().clone();
        let rhs = parse_unary(p)?;
        lhs = expr(ExprNode::Binary(op, Box::new(lhs), Box::new(rhs)), &tok);
    }
    Ok(lhs)
}

fn parse_unary(p: &mut Parser) -> Result<Expr, ParseError> {
    let op = match p.peek().kind {
        TokenKind::Punct("-") => Some(UnOp::Neg),
        TokenKind::Punct("!") => Some(UnOp::Not),
        _ => None,
    };
    if let Some(op) = op {
        let tok = p.bump().clone();
        let inner = parse_unary(p)?;
        Ok(expr(ExprNode::Unary(op, Box::new(inner)), &tok))
    } else {
        parse_postfix(p)
    }
}

fn parse_postfix(p: &mut Parser) -> Result<Expr, ParseError> {
    let mut e = parse_primary(p)?;
    loop {
        if p.peek().kind == TokenKind::Punct(".") {
            let tok = p.bump().clone();
            let name = p.expect_ident("field name")?;
            e = expr(ExprNode::Field(Box::new(e), name), &tok);
        } else if p.peek().kind == TokenKind::Punct("[") {
            let tok = p.bump().clone();
            let idx = parse_expr(p)?;
            p.expect_punct("]")?;
            e = expr(ExprNode::Index(Box::new(e), Box::new(idx)), &tok);
        } else {
            break;
        }
    }
    Ok(e)
}

fn parse_primary(p: &mut Parser) -> Result<Expr, ParseError> {
    let tok = p.peek().clone();
    match &tok.kind {
        TokenKind::Int(i) => {
            let i = *i;
            p.bump();
            Ok(expr(ExprNode::Lit(Value::Int(i)), &tok))
        }
        TokenKind::Float(x) => {
            let x = *x;
            p.bump();
            Ok(expr(ExprNode::Lit(Value::Float(x)), &tok))
        }
        TokenKind::Str(s) => {
            let s = s.clone();
            p.bump();
            Ok(expr(ExprNode::Lit(Value::Text(s)), &tok))
        }
        TokenKind::Keyword => match tok.lexeme.as_str() {
            "it" => {
                p.bump();
                Ok(expr(ExprNode::It, &tok))
            }
            "true" => {
                p.bump();
                Ok(expr(ExprNode::Lit(Value::Bool(true)), &tok))
            }
            "false" => {
                p.bump();
                Ok(expr(ExprNode::Lit(Value::Bool(false)), &tok))
            }
            "null" => {
                p.bump();
                Ok(expr(ExprNode::Lit(Value::Null), &tok))
            }
            _ => Err(p.error_at(&tok, &["expression"])),
        },
        TokenKind::Ident => {
            let name = tok.lexeme.clone();
            if let Some(pos) = parse_pos_ref(&name) {
                p.bump();
                return Ok(expr(ExprNode::Pos(pos), &tok));
            }
            p.bump();
            p.expect_punct("(")?;
            let mut args = Vec::new();
            if p.peek().kind != TokenKind::Punct(")") {
                loop {
                    args.push(parse_expr(p)?);
                    if !p.eat_punct(",") {
                        break;
                    }
                }
            }
            p.expect_punct(")")?;
            Ok(expr(ExprNode::Call(name, args), &tok))
        }
        TokenKind::Punct("(") => {
            p.bump();
            let e = parse_expr(p)?;
            p.expect_punct(")")?;
            Ok(e)
        }
        TokenKind::Punct("[") => {
            p.bump();
            let mut items = Vec::new();
            if p.peek().kind != TokenKind::Punct("]") {
                loop {
                    items.push(parse_expr(p)?);
                    if !p.eat_punct(",") {
                        break;
                    }
                }
            }
            p.expect_punct("]")?;
            Ok(expr(ExprNode::ListLit(items), &tok))
        }
        TokenKind::Punct("{") => {
            p.bump();
            let mut entries = Vec::new();
            if p.peek().kind != TokenKind::Punct("}") {
                loop {
                    let key = match &p.peek().kind {
                        TokenKind::Ident => p.bump().lexeme.clone(),
                        TokenKind::Str(s) => {
                            let s = s.clone();
                            p.bump();
                            s
                        }
                        _ => return Err(p.error_at(p.peek(), &["map key"])),
                    };
                    p.expect_punct(":")?;
                    let v = parse_expr(p)?;
                    entries.push((key, v));
                    if !p.eat_punct(",") {
                        break;
                    }
                }
            }
            p.expect_punct("}")?;
            Ok(expr(ExprNode::MapLit(entries), &tok))
        }
        _ => Err(p.error_at(&tok, &["expression"])),
    }
}

/// `_`, `_0`..`_9`: join-tuple position references (`_` alone is `_0`).
fn parse_pos_ref(name: &str) -> Option<usize> {
    let rest = name.strip_prefix('_')?;
    if rest.is_empty() {
        return Some(0);
    }
    if rest.len() == 1 && rest.as_bytes()[0].is_ascii_digit() {
        return Some((rest.as_bytes()[0] - b'0') as usize);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::super::lexer::tokenize;
    use super::super::parse_source;
    use super::*;

    #[test]
    fn two_statement_script() {
        let ast = parse_source(
            "register t \"data.jsonl\" as jsonl;\nv <- t.filter(it.a == 1);",
        )
        .unwrap();
        assert_eq!(ast.statements.len(), 2);
    }

    #[test]
    fn chained_ops_in_order() {
        let ast = parse_source("q <- t.filter(true).group_by(it).project(it);").unwrap();
        match &ast.statements[0] {
            StmtAst::Query { ops, .. } => {
                assert_eq!(ops.len(), 3);
                assert!(matches!(ops[0], OpAst::Filter(_)));
                assert!(matches!(ops[1], OpAst::GroupBy(_)));
                assert!(matches!(ops[2], OpAst::Project { .. }));
            }
            _ => panic!("expected query"),
        }
    }

    #[test]
    fn missing_close_paren() {
        let err = parse_source("q <- t.filter(it.a == 1;").unwrap_err();
        assert!(err.expected.contains(&")".to_string()), "{err:?}");
        assert_eq!(err.line, 1);
        assert_eq!(err.col, 24);
    }

    #[test]
    fn join_named_arguments() {
        let ast = parse_source("j <- t.join(u, key=it.f+1, fkey=it.f);").unwrap();
        match &ast.statements[0] {
            StmtAst::Query { ops, .. } => match &ops[0] {
                OpAst::Join { right, .. } => assert_eq!(right, "u"),
                _ => panic!("expected join"),
            },
            _ => panic!("expected query"),
        }
    }

    #[test]
    fn order_by_reverse_and_project_bs() {
        let ast =
            parse_source("q <- t.order_by(it.k, reverse=true).project(it, bs=10);").unwrap();
        match &ast.statements[0] {
            StmtAst::Query { ops, .. } => {
                assert!(matches!(ops[0], OpAst::OrderBy { reverse: true, .. }));
                assert!(matches!(
                    ops[1],
                    OpAst::Project {
                        batch_size: Some(10),
                        ..
                    }
                ));
            }
            _ => panic!("expected query"),
        }
    }

    #[test]
    fn precedence_and_associativity() {
        let src = "q <- t.filter(1 + 2 * 3 == 7 && !false || it.a < 2 ? true : false);";
        let ast = parse_source(src).unwrap();
        // reparse of the pretty-printed form must agree
        let printed = ast.to_string();
        let again = parse_source(&printed).unwrap();
        assert_eq!(ast, again);
    }

    #[test]
    fn repl_statement_without_semicolon() {
        let toks = tokenize("v <- t.unique()").unwrap();
        assert!(parse_statement(&toks).is_ok());
    }

    #[test]
    fn pos_refs() {
        let ast = parse_source("q <- t.filter(_0 == _1);").unwrap();
        match &ast.statements[0] {
            StmtAst::Query { ops, .. } => match &ops[0] {
                OpAst::Filter(e) => match &e.node {
                    ExprNode::Binary(BinOp::Eq, l, r) => {
                        assert_eq!(l.node, ExprNode::Pos(0));
                        assert_eq!(r.node, ExprNode::Pos(1));
                    }
                    _ => panic!("expected comparison"),
                },
                _ => panic!("expected filter"),
            },
            _ => panic!("expected query"),
        }
    }
}
