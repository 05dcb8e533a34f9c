//! FORTRAN 77 front end: lexing, parsing, printing and program linking.

pub mod ast;
pub mod lexer;
pub mod link;
pub mod parser;
pub mod printer;

use thiserror::Error;

pub use ast::*;
pub use lexer::SourceForm;
pub use link::{link, CallGraph, LinkError, ProgramAst};
pub use parser::{parse_expr, parse_free_source, parse_source, parse_with};
pub use printer::{expr_to_string, print_fixed, print_free, print_unit_free};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{line}: unsupported feature: {feature}")]
    Unsupported { feature: String, line: usize },
}

impl ParseError {
    pub fn syntax(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError::Syntax { line, col, message: message.into() }
    }

    pub fn line(&self) -> usize {
        match self {
            ParseError::Syntax { line, .. } | ParseError::Unsupported { line, .. } => *line,
        }
    }

    /// `path:line:col: message`, the usual compiler diagnostic shape.
    pub fn diagnostic(&self, path: &str) -> String {
        match self {
            ParseError::Syntax { line, col, message } => format!("{path}:{line}:{col}: error: {message}"),
            ParseError::Unsupported { feature, line } => {
                format!("{path}:{line}:1: error: unsupported feature: {feature}")
            }
        }
    }
}

/// Picks the source form from a file extension (`.f`/`.for` fixed,
/// anything else free).
pub fn form_for_path(path: &str) -> SourceForm {
    let lower = path.to_ascii_lowercase();
    if lower.ends_with(".f") || lower.ends_with(".for") || lower.ends_with(".f77") {
        SourceForm::Fixed
    } else {
        SourceForm::Free
    }
}
