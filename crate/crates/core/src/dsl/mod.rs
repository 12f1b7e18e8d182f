//! Typed grammar, architectures with holes, and differentiable semantics.

mod arch;
mod eval;
mod grammar;
mod parser;
mod printer;
mod types;

use thiserror::Error;

pub use arch::{Architecture, NeuralKind, NeuralSpec, Node, Op, RuleRef};
pub use eval::{evaluate, smooth_if, Compiled, OutVars, Output, WINDOW};
pub use grammar::{
    default_grammar, Grammar, GrammarConfig, Production, Rule, RuleId, RuleSpec, Selector,
    DEFAULT_PENALTY, STATE_SELECTOR,
};
pub use parser::parse_program;
pub use printer::pretty_print;
pub use types::{SemType, Signature, Task};

#[derive(Debug, Error)]
pub enum DslError {
    #[error("grammar: {0}")]
    Grammar(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("no hole with id {0}")]
    UnknownHole(usize),
    #[error("architecture has unfilled holes")]
    Incomplete,
    #[error("parameters: {0}")]
    Params(String),
    #[error("non-finite {0} values")]
    NonFinite(String),
    #[error("input: {0}")]
    Input(String),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}
