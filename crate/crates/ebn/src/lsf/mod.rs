//! The limit-state expression language: parsing, evaluation, numerical
//! differentiation, and cut-set event domains.

pub mod domain;
pub mod expr;

pub use domain::{CompiledDomain, DomainSpec};
pub use expr::{eval_expr, grad_expr, parse_expr, BinOp, CompiledExpr, Expr, Func};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("parse error at position {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("domain error: {0}")]
    Domain(String),
}
