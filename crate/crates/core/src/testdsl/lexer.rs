use super::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const PUNCT: &[&str] = &[
    "::", "==", "!=", "<=", ">=", "&&", "||", "(", ")", "{", "}", ";", ",", ".", ":", "=", "<",
    ">", "+", "-", "*", "/", "!",
];

struct Cursor<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl Cursor<'_> {
    fn peek(&self, off: usize) -> Option<u8> {
        self.src.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek(0)?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn at_line_start(&self) -> bool {
        self.src[..self.pos]
            .iter()
            .rev()
            .take_while(|&&c| c != b'\n')
            .all(|c| c.is_ascii_whitespace())
    }
}

/// Tokenizes DSL source. Preprocessor lines (`#include ...`) and comments are
/// dropped.
pub fn tokenize(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut c = Cursor {
        src: text.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    while let Some(ch) = c.peek(0) {
        let (line, col) = (c.line, c.col);
        let error = |msg: &str| SyntaxError {
            line,
            col,
            message: msg.to_string(),
        };
        match ch {
            _ if ch.is_ascii_whitespace() => {
                c.bump();
            }
            b'#' if c.at_line_start() => {
                while c.peek(0).is_some_and(|x| x != b'\n') {
                    c.bump();
                }
            }
            b'/' if c.peek(1) == Some(b'/') => {
                while c.peek(0).is_some_and(|x| x != b'\n') {
                    c.bump();
                }
            }
            b'/' if c.peek(1) == Some(b'*') => {
                c.bump();
                c.bump();
                loop {
                    match c.peek(0) {
                        None => return Err(error("unterminated comment")),
                        Some(b'*') if c.peek(1) == Some(b'/') => {
                            c.bump();
                            c.bump();
                            break;
                        }
                        Some(_) => {
                            c.bump();
                        }
                    }
                }
            }
            b'"' => {
                c.bump();
                let mut bytes = Vec::new();
                loop {
                    match c.bump() {
                        None | Some(b'\n') => return Err(error("unterminated string literal")),
                        Some(b'"') => break,
                        Some(b'\\') => match c.bump() {
                            Some(b'n') => bytes.push(b'\n'),
                            Some(b't') => bytes.push(b'\t'),
                            Some(b'"') => bytes.push(b'"'),
                            Some(b'\\') => bytes.push(b'\\'),
                            _ => return Err(error("invalid escape in string literal")),
                        },
                        Some(b) => bytes.push(b),
                    }
                }
                let s = String::from_utf8(bytes).map_err(|_| error("invalid UTF-8 in string"))?;
                out.push(Token { tok: Tok::Str(s), line, col });
            }
            b'0'..=b'9' => {
                let start = c.pos;
                let mut is_float = false;
                while c.peek(0).is_some_and(|x| x.is_ascii_digit()) {
                    c.bump();
                }
                if c.peek(0) == Some(b'.') && c.peek(1).is_some_and(|x| x.is_ascii_digit()) {
                    is_float = true;
                    c.bump();
                    while c.peek(0).is_some_and(|x| x.is_ascii_digit()) {
                        c.bump();
                    }
                }
                if matches!(c.peek(0), Some(b'e' | b'E')) {
                    let sign = usize::from(matches!(c.peek(1), Some(b'+' | b'-')));
                    if c.peek(1 + sign).is_some_and(|x| x.is_ascii_digit()) {
                        is_float = true;
                        for _ in 0..=sign {
                            c.bump();
                        }
                        while c.peek(0).is_some_and(|x| x.is_ascii_digit()) {
                            c.bump();
                        }
                    }
                }
                let lit = &text[start..c.pos];
                let tok = if is_float {
                    Tok::Float(lit.parse().map_err(|_| error("invalid number"))?)
                } else {
                    Tok::Int(lit.parse().map_err(|_| error("integer literal out of range"))?)
                };
                if c.peek(0).is_some_and(|x| x.is_ascii_alphanumeric() || x == b'_') {
                    return Err(error("invalid numeric literal"));
                }
                out.push(Token { tok, line, col });
            }
            _ if ch.is_ascii_alphabetic() || ch == b'_' => {
                let start = c.pos;
                while c.peek(0).is_some_and(|x| x.is_ascii_alphanumeric() || x == b'_') {
                    c.bump();
                }
                out.push(Token {
                    tok: Tok::Ident(text[start..c.pos].to_string()),
                    line,
                    col,
                });
            }
            _ => {
                let rest = &text[c.pos..];
                let p = PUNCT
                    .iter()
                    .find(|p| rest.starts_with(**p))
                    .ok_or_else(|| error(&format!("unexpected character `{}`", rest.chars().next().unwrap_or('?'))))?;
                for _ in 0..p.len() {
                    c.bump();
                }
                out.push(Token { tok: Tok::Punct(p), line, col });
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line: c.line,
        col: c.col,
    });
    Ok(out)
}
