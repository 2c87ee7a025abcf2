//! Source rendering for the DSL AST. Output re-parses to an equal AST.

use std::fmt::{self, Write};

use super::ast::{Expr, Stmt, StmtKind, SuiteDecl, TestMethod, UnOp};

const NOT: u8 = 3;
const NEG: u8 = 7;
const POSTFIX: u8 = 8;
const ATOM: u8 = 9;

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => op.precedence(),
        Expr::Unary(UnOp::Not, _) => NOT,
        Expr::Unary(UnOp::Neg, _) => NEG,
        Expr::Field(..) | Expr::Call(..) => POSTFIX,
        _ => ATOM,
    }
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn write_expr(f: &mut impl Write, e: &Expr, min: u8) -> fmt::Result {
    let wrap = level(e) < min;
    if wrap {
        f.write_char('(')?;
    }
    match e {
        Expr::Int(i) => write!(f, "{i}")?,
        Expr::Float(x) => write!(f, "{x:?}")?,
        Expr::Bool(b) => write!(f, "{b}")?,
        Expr::Str(s) => f.write_str(&quote(s))?,
        Expr::Var(v) => f.write_str(v)?,
        Expr::Unary(UnOp::Not, x) => {
            f.write_char('!')?;
            write_expr(f, x, NOT)?;
        }
        Expr::Unary(UnOp::Neg, x) => {
            f.write_char('-')?;
            write_expr(f, x, NEG)?;
        }
        Expr::Binary(op, l, r) => {
            let p = op.precedence();
            write_expr(f, l, p)?;
            write!(f, " {} ", op.symbol())?;
            write_expr(f, r, p + 1)?;
        }
        Expr::Call(name, args) => {
            write!(f, "{name}(")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_expr(f, a, 0)?;
            }
            f.write_char(')')?;
        }
        Expr::Field(base, field) => {
            write_expr(f, base, POSTFIX)?;
            write!(f, ".{field}")?;
        }
    }
    if wrap {
        f.write_char(')')?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self, 0)
    }
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            StmtKind::Decl { ty, name, init } => write!(f, "{} {name} = {init};", ty.keyword()),
            StmtKind::Assert(e) => write!(f, "TS_ASSERT({e});"),
            StmtKind::AssertEquals(a, b) => write!(f, "TS_ASSERT_EQUALS({a}, {b});"),
            StmtKind::AssertDelta(a, b, t) => write!(f, "TS_ASSERT_DELTA({a}, {b}, {t});"),
            StmtKind::Fail(e) => write!(f, "TS_FAIL({e});"),
            StmtKind::Expr(e) => write!(f, "{e};"),
        }
    }
}

impl fmt::Display for TestMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "    void {}()", self.name)?;
        writeln!(f, "    {{")?;
        for s in &self.body {
            writeln!(f, "        {s}")?;
        }
        writeln!(f, "    }}")
    }
}

impl fmt::Display for SuiteDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "class {} : public CxxTest::TestSuite", self.name)?;
        writeln!(f, "{{")?;
        writeln!(f, "public:")?;
        for (i, m) in self.methods.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{m}")?;
        }
        writeln!(f, "}};")
    }
}
