//! Lexer, parser and pretty-printer for `.kae` scripts.

pub mod ast;
mod format;
mod lexer;
mod parser;

use std::fmt;

pub use format::format_ast;
pub use lexer::{tokenize, Keyword, Token, TokenKind, TokenStream};
pub use parser::{parse, parse_with, ParseOptions, DEFAULT_MAX_MULTIPLICITY};

/// A lexical or grammatical error at a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub line: u32,
    pub column: u32,
    pub message: String,
    /// Token descriptions that would have been accepted here, if known.
    pub expected: Vec<String>,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for SyntaxError {}

/// Tokenizes and parses with default options.
pub fn parse_source(source: &str) -> Result<ast::Program, SyntaxError> {
    parse(&tokenize(source)?)
}
