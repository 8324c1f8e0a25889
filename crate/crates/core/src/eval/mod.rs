//! Strict interpreter. Evaluating a program emits species, reactions,
//! reports and protocol steps into an [`EmissionContext`] and runs every
//! `equilibrate` as it is reached.

mod context;
mod interp;
mod value;

use std::fmt;

pub use context::{capture_timecourse, EmissionContext, EmitError, ExecutionTrace, Export};
pub use value::{Builtin, Closure, Dataset, Env, Stat, Value};

use crate::lang::ast::{Program, Span};
use crate::protocol::CELSIUS_ZERO;
use crate::sim::Tolerances;

pub const DEFAULT_MAX_DEPTH: usize = 10_000;
pub const DEFAULT_MAX_REACTIONS: usize = 1_000_000;

const STACK_SIZE: usize = 1 << 30;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub lna: bool,
    pub tolerances: Tolerances,
    /// Log equilibrations without simulating them.
    pub check_only: bool,
    pub max_depth: usize,
    pub max_reactions: usize,
    pub vessel_volume_ul: f64,
    pub vessel_temperature_k: f64,
    pub binomial_split: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            lna: false,
            tolerances: Tolerances::default(),
            check_only: false,
            max_depth: DEFAULT_MAX_DEPTH,
            max_reactions: DEFAULT_MAX_REACTIONS,
            vessel_volume_ul: 1000.0,
            vessel_temperature_k: CELSIUS_ZERO + 20.0,
            binomial_split: false,
        }
    }
}

/// A runtime error at a source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl EvalError {
    pub fn at(span: Span, message: impl Into<String>) -> Self {
        Self { line: span.line, column: span.column, message: message.into() }
    }
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for EvalError {}

/// Evaluates a whole program on a dedicated large-stack thread.
pub fn eval_program(program: &Program, config: &EvalConfig) -> Result<ExecutionTrace, EvalError> {
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .name("kaemsim-eval".into())
            .stack_size(STACK_SIZE)
            .spawn_scoped(scope, || interp::run(program, config))
            .map_err(|e| EvalError { line: 1, column: 1, message: format!("cannot start evaluator thread: {e}") })?
            .join()
            .unwrap_or_else(|panic| std::panic::resume_unwind(panic))
    })
}
