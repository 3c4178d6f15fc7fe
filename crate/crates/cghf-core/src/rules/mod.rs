//! The rule language: event-condition-action rules, fact definitions, and
//! context model declarations, all in one file format (`.rules`).
//!
//! A file is a sequence of `entity`, `factdef`, and `rule` blocks. `#`
//! starts a line comment. Strings are double-quoted, variables are
//! `$name`, numbers are IEEE doubles, and durations are a number followed
//! by `ms`, `s`, or `min` (normalized to milliseconds).

pub mod ast;
pub mod eval;
mod lexer;
mod parser;
mod printer;
mod validate;

pub use ast::{RuleSet, Span};
pub use parser::{parse, ParseError};
pub use printer::pretty_print;
pub use validate::{validate, ContextModel, ValidationError};
