use super::ast::{BinOp, Expr, Stmt, StmtKind, SuiteDecl, TestMethod, TypeName, UnOp};
use super::lexer::{tokenize, Tok, Token};
use super::SyntaxError;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, off: usize) -> &Tok {
        let i = (self.pos + off).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, t: &Token, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            line: t.line,
            col: t.col,
            message: message.into(),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(&self.peek().tok, Tok::Punct(q) if *q == p)
    }

    fn is_ident(&self, name: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == name)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Token> {
        if self.is_punct(p) {
            Ok(self.next())
        } else {
            let t = self.peek().clone();
            Err(self.error_at(&t, format!("expected `{p}`, found {}", describe(&t.tok))))
        }
    }

    fn expect_ident(&mut self) -> PResult<(String, Token)> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t.clone())),
            other => Err(self.error_at(&t, format!("expected identifier, found {}", describe(other)))),
        }
    }

    fn file(&mut self) -> PResult<Vec<SuiteDecl>> {
        let mut suites = Vec::new();
        loop {
            match &self.peek().tok {
                Tok::Eof => return Ok(suites),
                Tok::Ident(k) if k == "class" || k == "struct" => {
                    if let Some(s) = self.class()? {
                        suites.push(s);
                    }
                }
                _ => self.skip_declaration()?,
            }
        }
    }

    /// Skips a top-level construct: up to a `;` at depth 0, or a balanced
    /// brace group plus an optional trailing `;`.
    fn skip_declaration(&mut self) -> PResult<()> {
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Eof => return Ok(()),
                Tok::Punct(";") => {
                    self.next();
                    return Ok(());
                }
                Tok::Punct("{") => {
                    self.skip_braces()?;
                    self.eat_punct(";");
                    return Ok(());
                }
                Tok::Punct("}") => return Err(self.error_at(&t, "unmatched `}`")),
                _ => {
                    self.next();
                }
            }
        }
    }

    fn skip_braces(&mut self) -> PResult<()> {
        let open = self.expect_punct("{")?;
        let mut depth = 1usize;
        while depth > 0 {
            let t = self.next();
            match t.tok {
                Tok::Punct("{") => depth += 1,
                Tok::Punct("}") => depth -= 1,
                Tok::Eof => return Err(self.error_at(&open, "unclosed `{`")),
                _ => {}
            }
        }
        Ok(())
    }

    fn class(&mut self) -> PResult<Option<SuiteDecl>> {
        self.next();
        let (name, name_tok) = self.expect_ident()?;
        let mut is_suite = false;
        if self.eat_punct(":") {
            loop {
                if let Tok::Ident(a) = &self.peek().tok {
                    if matches!(a.as_str(), "public" | "private" | "protected" | "virtual") {
                        self.next();
                    }
                }
                let mut path = vec![self.expect_ident()?.0];
                while self.eat_punct("::") {
                    path.push(self.expect_ident()?.0);
                }
                let base = path.join("::");
                if base == "TestSuite" || base == "CxxTest::TestSuite" {
                    is_suite = true;
                }
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        if self.eat_punct(";") {
            return Ok(None);
        }
        if !is_suite {
            self.skip_braces()?;
            self.expect_punct(";")?;
            return Ok(None);
        }
        self.expect_punct("{")?;
        let mut methods: Vec<TestMethod> = Vec::new();
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Punct("}") => {
                    self.next();
                    break;
                }
                Tok::Ident(a) if matches!(a.as_str(), "public" | "private" | "protected") => {
                    self.next();
                    self.expect_punct(":")?;
                }
                Tok::Ident(v) if v == "void" => {
                    let m = self.method()?;
                    if methods.iter().any(|x| x.name == m.name) {
                        return Err(self.error_at(&t, format!("duplicate method `{}`", m.name)));
                    }
                    methods.push(m);
                }
                Tok::Eof => return Err(self.error_at(&name_tok, format!("unclosed class `{name}`"))),
                other => {
                    return Err(self.error_at(
                        &t,
                        format!("expected `void` method declaration, found {}", describe(other)),
                    ))
                }
            }
        }
        self.expect_punct(";")?;
        Ok(Some(SuiteDecl {
            name,
            source_file: String::new(),
            line: name_tok.line,
            methods,
        }))
    }

    fn method(&mut self) -> PResult<TestMethod> {
        self.next();
        let (name, tok) = self.expect_ident()?;
        self.expect_punct("(")?;
        if self.is_ident("void") {
            self.next();
        }
        self.expect_punct(")")?;
        self.expect_punct("{")?;
        let mut body = Vec::new();
        while !self.is_punct("}") {
            if self.peek().tok == Tok::Eof {
                return Err(self.error_at(&tok, format!("unclosed method `{name}`")));
            }
            body.push(self.stmt()?);
        }
        self.next();
        Ok(TestMethod {
            name,
            line: tok.line,
            body,
        })
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                args.push(self.expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let t = self.peek().clone();
        let line = t.line;
        let kind = match &t.tok {
            Tok::Ident(k) if TypeName::from_keyword(k).is_some() && matches!(self.peek_at(1), Tok::Ident(_)) => {
                let ty = TypeName::from_keyword(k).expect("checked");
                self.next();
                let (name, _) = self.expect_ident()?;
                self.expect_punct("=")?;
                let init = self.expr()?;
                StmtKind::Decl { ty, name, init }
            }
            Tok::Ident(m) if m.starts_with("TS_") => {
                let macro_name = m.clone();
                self.next();
                let mut args = self.args()?;
                let want = match macro_name.as_str() {
                    "TS_ASSERT" | "TS_FAIL" => 1,
                    "TS_ASSERT_EQUALS" => 2,
                    "TS_ASSERT_DELTA" => 3,
                    _ => return Err(self.error_at(&t, format!("unknown assertion `{macro_name}`"))),
                };
                if args.len() != want {
                    return Err(self.error_at(
                        &t,
                        format!("`{macro_name}` takes {want} argument(s), found {}", args.len()),
                    ));
                }
                let mut take = || args.remove(0);
                match macro_name.as_str() {
                    "TS_ASSERT" => StmtKind::Assert(take()),
                    "TS_FAIL" => StmtKind::Fail(take()),
                    "TS_ASSERT_EQUALS" => StmtKind::AssertEquals(take(), take()),
                    _ => StmtKind::AssertDelta(take(), take(), take()),
                }
            }
            _ => StmtKind::Expr(self.expr()?),
        };
        self.expect_punct(";")?;
        Ok(Stmt { line, kind })
    }

    pub(super) fn expr(&mut self) -> PResult<Expr> {
        self.or()
    }

    fn or(&mut self) -> PResult<Expr> {
        let mut l = self.and()?;
        while self.eat_punct("||") {
            l = Expr::binary(BinOp::Or, l, self.and()?);
        }
        Ok(l)
    }

    fn and(&mut self) -> PResult<Expr> {
        let mut l = self.not()?;
        while self.eat_punct("&&") {
            l = Expr::binary(BinOp::And, l, self.not()?);
        }
        Ok(l)
    }

    fn not(&mut self) -> PResult<Expr> {
        if self.eat_punct("!") {
            return Ok(Expr::unary(UnOp::Not, self.not()?));
        }
        self.cmp()
    }

    fn cmp(&mut self) -> PResult<Expr> {
        let mut l = self.add()?;
        loop {
            let op = match &self.peek().tok {
                Tok::Punct("==") => BinOp::Eq,
                Tok::Punct("!=") => BinOp::Ne,
                Tok::Punct("<") => BinOp::Lt,
                Tok::Punct("<=") => BinOp::Le,
                Tok::Punct(">") => BinOp::Gt,
                Tok::Punct(">=") => BinOp::Ge,
                _ => return Ok(l),
            };
            self.next();
            l = Expr::binary(op, l, self.add()?);
        }
    }

    fn add(&mut self) -> PResult<Expr> {
        let mut l = self.mul()?;
        loop {
            let op = match &self.peek().tok {
                Tok::Punct("+") => BinOp::Add,
                Tok::Punct("-") => BinOp::Sub,
                _ => return Ok(l),
            };
            self.next();
            l = Expr::binary(op, l, self.mul()?);
        }
    }

    fn mul(&mut self) -> PResult<Expr> {
        let mut l = self.unary()?;
        loop {
            let op = match &self.peek().tok {
                Tok::Punct("*") => BinOp::Mul,
                Tok::Punct("/") => BinOp::Div,
                _ => return Ok(l),
            };
            self.next();
            l = Expr::binary(op, l, self.unary()?);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_punct("-") {
            return Ok(Expr::unary(UnOp::Neg, self.unary()?));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        while self.eat_punct(".") {
            let (field, _) = self.expect_ident()?;
            e = Expr::Field(Box::new(e), field);
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let t = self.next();
        Ok(match t.tok {
            Tok::Int(i) => Expr::Int(i),
            Tok::Float(f) => Expr::Float(f),
            Tok::Str(s) => Expr::Str(s),
            Tok::Ident(ref s) if s == "true" => Expr::Bool(true),
            Tok::Ident(ref s) if s == "false" => Expr::Bool(false),
            Tok::Ident(name) => {
                if self.is_punct("(") {
                    Expr::Call(name, self.args()?)
                } else {
                    Expr::Var(name)
                }
            }
            Tok::Punct("(") => {
                let e = self.expr()?;
                self.expect_punct(")")?;
                e
            }
            ref other => return Err(self.error_at(&t, format!("expected expression, found {}", describe(other)))),
        })
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(i) => format!("`{i}`"),
        Tok::Float(f) => format!("`{f:?}`"),
        Tok::Str(_) => "string literal".into(),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Eof => "end of file".into(),
    }
}

/// Parses a DSL source file into its `TestSuite`-derived declarations.
/// Other declarations are skipped.
pub fn parse_suite_file(text: &str) -> Result<Vec<SuiteDecl>, SyntaxError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };
    p.file()
}

/// Parses a single expression, requiring all input to be consumed.
pub fn parse_expr(text: &str) -> Result<Expr, SyntaxError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };
    let e = p.expr()?;
    let t = p.peek().clone();
    if t.tok != Tok::Eof {
        return Err(p.error_at(&t, format!("unexpected {} after expression", describe(&t.tok))));
    }
    Ok(e)
}
