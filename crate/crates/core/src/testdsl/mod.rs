//! C-family test DSL: `TestSuite`-derived classes with `test*` methods,
//! `TS_*` assertion statements and a small expression language, plus the
//! `slunit_run` bridge into the model engine.

mod ast;
mod eval;
mod exec;
mod lexer;
mod parser;
mod printer;

use std::path::Path;

use thiserror::Error;

pub use ast::{BinOp, Expr, Stmt, StmtKind, SuiteDecl, TestMethod, TypeName, UnOp};
pub use eval::{eval_expr, truthy, values_equal, Env, Host, RuntimeError, Value};
pub use exec::{exec_test, ModelEngine, Runtime, SlunitRecord};
pub use parser::{parse_expr, parse_suite_file};

/// File extension of DSL suite sources.
pub const EXTENSION: &str = "tsuite";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

/// Parses `text` and tags every suite with `file`.
pub fn parse_suite_source(text: &str, file: &Path) -> Result<Vec<SuiteDecl>, SyntaxError> {
    let mut suites = parse_suite_file(text)?;
    for s in &mut suites {
        s.source_file = file.display().to_string();
    }
    Ok(suites)
}
