//! SQL subset: lexing, parsing and a canonical renderer.

pub mod ast;
mod lexer;
mod parser;

pub use ast::Query;
pub use parser::parse;

/// Renders a parsed query back to canonical SQL text.
pub fn render_sql(q: &Query) -> String {
    q.to_string()
}
