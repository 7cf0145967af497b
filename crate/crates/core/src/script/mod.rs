//! Tokenizing, tolerant parsing, lowering and context detection for scripts.

mod ast;
mod detect;
mod lower;
mod print;
mod rules;
mod split;
mod token;

use thiserror::Error;

pub use ast::{parse_partial, Arg, Node, NodeKind, Stmt};
pub use detect::{classify_complete, detect_code_context, detect_with, CodeContext, ColumnRef, Mode, SlotMap};
pub use lower::{is_module, parse_op, parse_statement, Statement, MODULE_ALIASES};
pub use print::{render_expr, render_op, render_predicate, render_source};
pub use rules::{OpClass, OperatorDecl, ParamDecl, PatternRule, ReceiverKind, RuleSet, Shape, Signature, SlotDecl, SlotKind};
pub use split::{char_to_byte, join_cells, split_at_cursor, split_statements, Cursor, SplitResult};
pub use token::{tokenize, Token, TokenKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScriptError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("invalid rule file: {0}")]
    Rules(String),
}

impl ScriptError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            ScriptError::Syntax { offset, .. } => Some(*offset),
            _ => None,
        }
    }
}
