//! Lossless lexer, statement-level parser and pretty-printer for C-like
//! function bodies.

mod ast;
mod lexer;
mod parser;
mod render;

pub use ast::{
    is_directive_text, Decl, Declarator, Expr, NodePath, Span, Stmt, StmtKind, StmtTree, ASSIGN_OPS,
};
pub use lexer::{is_keyword, lex, LexError, Token, TokenKind, KEYWORDS};
pub use parser::{parse_function, parse_tokens, ParseError};
pub use render::{join_tokens, render, render_expr, render_stmt_text};
