//! The mini test language: subject units (`.sub`) hold functions, test
//! suites (`.tst`) hold tests. Assertions are first-class statements.

mod ast;
pub mod builtins;
mod lexer;
mod parser;
mod printer;

pub use ast::*;
pub use parser::{parse_unit, parse_unit_with, ParseOptions};
pub use printer::{expr_to_string, pretty_print};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: u32, col: u32, message: String },
    #[error("structure error at line {line}: {message}")]
    Structure { line: u32, message: String },
}
