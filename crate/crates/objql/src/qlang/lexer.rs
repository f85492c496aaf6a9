//! Longest-match lexer. Comments run from `#` to end of line. Positions
//! are 1-based.

use super::parser::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident,
    Keyword,
    Int(i64),
    Float(f64),
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub line: u32,
    pub col: u32,
}

const KEYWORDS: &[&str] = &["register", "as", "it", "true", "false", "null"];

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            message: message.into(),
            line: self.line,
            col: self.col,
            expected: Vec::new(),
        }
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer {
        src: src.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut tokens = Vec::new();
    loop {
        // skip whitespace and comments
        loop {
            match lx.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    lx.bump();
                }
                Some(b'#') => {
                    while let Some(c) = lx.peek() {
                        if c == b'\n' {
                            break;
                        }
                        lx.bump();
                    }
                }
                _ => break,
            }
        }
        let (line, col) = (lx.line, lx.col);
        let Some(c) = lx.peek() else {
            tokens.push(Token {
                kind: TokenKind::Eof,
                lexeme: String::new(),
                line,
                col,
            });
            return Ok(tokens);
        };
        let token = if c.is_ascii_digit() {
            lex_number(&mut lx, line, col)?
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let mut lexeme = String::new();
            while let Some(c) = lx.peek() {
                if c.is_ascii_alphanumeric() || c == b'_' {
                    lexeme.push(c as char);
                    lx.bump();
                } else {
                    break;
                }
            }
            let kind = if KEYWORDS.contains(&lexeme.as_str()) {
                TokenKind::Keyword
            } else {
                TokenKind::Ident
            };
            Token {
                kind,
                lexeme,
                line,
                col,
            }
        } else if c == b'"' {
            lex_string(&mut lx, line, col)?
        } else {
            lex_punct(&mut lx, line, col)?
        };
        tokens.push(token);
    }
}

fn lex_number(lx: &mut Lexer, line: u32, col: u32) -> Result<Token, ParseError> {
    let mut lexeme = String::new();
    let mut is_float = false;
    while let Some(c) = lx.peek() {
        if c.is_ascii_digit() {
            lexeme.push(c as char);
            lx.bump();
        } else if c == b'.' && !is_float {
            // `1.` lexes as the float 1.0; a second dot ends the number
            is_float = true;
            lexeme.push('.');
            lx.bump();
        } else if (c == b'e' || c == b'E') && !lexeme.contains(['e', 'E']) {
            is_float = true;
            lexeme.push(c as char);
            lx.bump();
            if matches!(lx.peek(), Some(b'+') | Some(b'-')) {
                lexeme.push(lx.bump().unwrap() as char);
            }
        } else {
            break;
        }
    }
    let kind = if is_float {
        let f: f64 = lexeme
            .trim_end_matches('.')
            .parse()
            .map_err(|_| lx.error(format!("malformed number `{lexeme}`")))?;
        TokenKind::Float(f)
    } else {
        let i: i64 = lexeme
            .parse()
            .map_err(|_| lx.error(format!("integer literal `{lexeme}` out of range")))?;
        TokenKind::Int(i)
    };
    Ok(Token {
        kind,
        lexeme,
        line,
        col,
    })
}

fn lex_string(lx: &mut Lexer, line: u32, col: u32) -> Result<Token, ParseError> {
    let mut lexeme = String::from("\"");
    let mut text = String::new();
    lx.bump(); // opening quote
    loop {
        match lx.bump() {
            None | Some(b'\n') => {
                return Err(ParseError {
                    message: "unterminated string".into(),
                    line,
                    col,
                    expected: vec!["\"".into()],
                })
            }
            Some(b'"') => {
                lexeme.push('"');
                return Ok(Token {
                    kind: TokenKind::Str(text),
                    lexeme,
                    line,
                    col,
                });
            }
            Some(b'\\') => {
                let esc = lx
                    .bump()
                    .ok_or_else(|| lx.error("unterminated string escape"))?;
                lexeme.push('\\');
                lexeme.push(esc as char);
                text.push(match esc {
                    b'"' => '"',
                    b'\\' => '\\',
                    b'n' => '\n',
                    b't' => '\t',
                    other => {
                        return Err(lx.error(format!("unknown escape `\\{}`", other as char)))
                    }
                });
            }
            Some(c) => {
                // copy raw UTF-8 bytes through unchanged
                lexeme.push(c as char);
                text.push(c as char);
                if c >= 0x80 {
                    // multi-byte sequences: recover the full char from the source
                    let start = lx.pos - 1;
                    let rest = &lx.src[start..];
                    let ch_len = utf8_len(c);
                    let s = std::str::from_utf8(&rest[..ch_len.min(rest.len())])
                        .map_err(|_| lx.error("invalid UTF-8 in string"))?;
                    let ch = s.chars().next().unwrap();
                    lexeme.pop();
                    text.pop();
                    lexeme.push(ch);
                    text.push(ch);
                    for _ in 1..ch_len {
                        lx.bump();
                    }
                }
            }
        }
    }
}

fn utf8_len(first: u8) -> usize {
    match first {
        0xf0..=0xf7 => 4,
        0xe0..=0xef => 3,
        0xc0..=0xdf => 2,
        _ => 1,
    }
}

const PUNCTS: &[&str] = &[
    "<-", "==", "!=", "<=", ">=", "&&", "||", "(", ")", "[", "]", "{", "}", ",", ";", ".", "+",
    "-", "*", "/", "%", "<", ">", "!", "?", ":", "=",
];

fn lex_punct(lx: &mut Lexer, line: u32, col: u32) -> Result<Token, ParseError> {
    let c = lx.peek().unwrap();
    let two: Option<&'static str> = lx.peek2().and_then(|c2| {
        let pair = [c, c2];
        PUNCTS
            .iter()
            .find(|p| p.as_bytes() == pair)
            .copied()
    });
    if let Some(p) = two {
        lx.bump();
        lx.bump();
        return Ok(Token {
            kind: TokenKind::Punct(p),
            lexeme: p.to_string(),
            line,
            col,
        });
    }
    let one = PUNCTS
        .iter()
        .find(|p| p.len() == 1 && p.as_bytes()[0] == c)
        .copied();
    match one {
        Some(p) => {
            lx.bump();
            Ok(Token {
                kind: TokenKind::Punct(p),
                lexeme: p.to_string(),
                line,
                col,
            })
        }
        None => Err(ParseError {
            message: format!("illegal character `{}`", c as char),
            line,
            col,
            expected: Vec::new(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn statement_tokens() {
        let toks = tokenize("x <- t.filter(it.a == 1)").unwrap();
        let lexemes: Vec<&str> = toks.iter().map(|t| t.lexeme.as_str()).collect();
        assert_eq!(
            lexemes,
            vec!["x", "<-", "t", ".", "filter", "(", "it", ".", "a", "==", "1", ")", ""]
        );
        assert_eq!(toks[6].kind, TokenKind::Keyword); // `it`
        assert_eq!(toks[0].line, 1);
        assert_eq!(toks[0].col, 1);
        assert_eq!(toks[1].col, 3);
    }

    #[test]
    fn string_escapes_decode() {
        let toks = tokenize(r#""a\nb""#).unwrap();
        assert_eq!(toks[0].kind, TokenKind::Str("a\nb".into()));
        assert_eq!(toks.len(), 2); // string + eof
    }

    #[test]
    fn trailing_dot_is_float() {
        assert_eq!(kinds("1.")[0], TokenKind::Float(1.0));
        assert_eq!(kinds("1.5e2")[0], TokenKind::Float(150.0));
        assert_eq!(kinds("42")[0], TokenKind::Int(42));
    }

    #[test]
    fn method_chain_dots_are_separate() {
        // `t.filter` must not swallow the dot into a number
        assert_eq!(
            kinds("x1.unique()"),
            vec![
                TokenKind::Ident,
                TokenKind::Punct("."),
                TokenKind::Ident,
                TokenKind::Punct("("),
                TokenKind::Punct(")"),
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn unterminated_string_position() {
        let err = tokenize("a <- t.filter(\"oops").unwrap_err();
        assert_eq!(err.line, 1);
        assert_eq!(err.col, 15);
    }

    #[test]
    fn comments_skipped() {
        assert_eq!(
            kinds("# a comment\nx"),
            vec![TokenKind::Ident, TokenKind::Eof]
        );
    }

    #[test]
    fn illegal_character() {
        let err = tokenize("a @ b").unwrap_err();
        assert_eq!(err.col, 3);
    }
}
