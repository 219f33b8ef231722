//! A small language of recursive operators over simulation trajectories.
//!
//! Operators are defined as `name(params) = expr ;` and analysed with one
//! `eval` command, for example
//! `obsAtStep(t,obs) = if (s.eval("steps") == t) then s.eval(obs) else next(obsAtStep(t,obs)) fi ;`.

pub mod ast;
pub mod bind;
pub mod check;
pub mod eval;
pub mod lexer;
pub mod parser;
pub mod pretty;

use thiserror::Error;

pub use ast::{CommandKind, Pos, Query};
pub use bind::{bind_query, DerivedTargets, QueryAnalysis, QueryCells, SteadyCommand};
pub use check::{SemanticError, SemanticErrorKind};
pub use eval::{Evaluator, Program, Value, DEFAULT_UNFOLD_BUDGET};

use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{}", render_semantic(.0))]
    Semantic(Vec<SemanticError>),
    #[error("cannot bind query: {0}")]
    Bind(String),
    #[error("operator `{operator}` exceeded the unfolding budget of {budget} after {steps} simulation steps")]
    Budget { operator: String, budget: u64, steps: u64 },
    #[error("evaluation error at {pos}: {message}")]
    Runtime { pos: Pos, message: String },
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn render_semantic(errs: &[SemanticError]) -> String {
    let lines: Vec<String> = errs.iter().map(|e| format!("semantic error at {e}")).collect();
    lines.join("\n")
}

/// Parses query text and checks every static rule, reporting all violations.
pub fn parse_query(src: &str) -> Result<Query, QueryError> {
    let q = parser::parse_syntax(src)?;
    let errs = check::check(&q);
    if errs.is_empty() {
        Ok(q)
    } else {
        Err(QueryError::Semantic(errs))
    }
}

#[cfg(test)]
mod tests;
