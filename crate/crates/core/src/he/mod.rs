//! Holomorphic embedding engine: stage assembly, series recursion, evaluation and continuation.

mod continuation;
mod eval;
mod monolithic;
mod pade;
mod series;
mod stage;

pub use continuation::{run_continuation, ContinuationReport, StageEngine, StageResult, StageStatus};
pub use eval::{evaluate_truncated, EvalMode, SeriesApproximant};
pub use monolithic::{multi_stage_solve, multi_stage_solve_from, BaseStage, MonolithicEngine, SolveReport};
pub use pade::PadeApproximant;
pub use series::{convolve, HeSeries};
pub use stage::{EmbeddedBlock, ExtVoltages, StageState0, StageSystem};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeError {
    #[error("embedding Jacobian singular")]
    SingularJacobian,
    #[error("linear solve failed: {0}")]
    Solver(String),
    #[error("order {requested} requested but series holds orders through {available}")]
    MissingOrder { requested: usize, available: usize },
    #[error("invalid stage state: {0}")]
    InvalidState(String),
    #[error("Padé construction failed: {0}")]
    Pade(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("protocol failure: {0}")]
    Protocol(String),
}

impl HeError {
    /// Numerical failures that end a continuation as collapse rather than as an error.
    pub fn is_numerical(&self) -> bool {
        matches!(self, HeError::SingularJacobian | HeError::Solver(_))
    }
}

/// Solver settings shared by HE, PHE and P2HE.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeConfig {
    /// Series order per stage.
    pub order: usize,
    /// Mismatch bound for accepting an intermediate step.
    pub tol_step: f64,
    /// Mismatch bound for a converged end state.
    pub tol_converge: f64,
    /// Target of the final polishing stages at alpha = 1.
    pub tol_polish: f64,
    pub max_polish_stages: usize,
    /// Minimum stage progress; two consecutive smaller steps mean collapse.
    pub delta_min: f64,
    pub max_stages: usize,
    pub use_pade: bool,
    /// Subtract the stage-start residual along the embedding path.
    pub residual_correction: bool,
    pub bisection_steps: usize,
}

impl Default for HeConfig {
    fn default() -> Self {
        Self {
            order: 10,
            tol_step: 1e-6,
            tol_converge: 1e-8,
            tol_polish: 1e-11,
            max_polish_stages: 2,
            delta_min: 1e-3,
            max_stages: 50,
            use_pade: true,
            residual_correction: true,
            bisection_steps: 24,
        }
    }
}
