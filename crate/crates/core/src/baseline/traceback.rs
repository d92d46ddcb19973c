use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::he::{multi_stage_solve_from, HeConfig, HeError};
use crate::network::{ContingencySpec, EffectiveY, PfState, PowerFlowModel};

/// Endpoint tolerance between the traceback result and the known base state (pu).
pub const TRACEBACK_MATCH_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Practicality {
    Practical,
    NonPractical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracebackReport {
    pub verdict: Practicality,
    pub reached_alpha: f64,
    /// Largest bus voltage difference to the base state; `None` if the traceback did not complete.
    pub endpoint_diff: Option<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TracebackError {
    #[error("candidate fails substitution check: mismatch {0:.3e}")]
    InvalidCandidate(f64),
    #[error(transparent)]
    He(#[from] HeError),
}

/// Continues `candidate` back to the pre-contingency network and compares with `base`.
pub fn traceback_verify(
    model: &PowerFlowModel,
    base: &PfState,
    spec: &ContingencySpec,
    candidate: &PfState,
    cfg: &HeConfig,
) -> Result<TracebackReport, TracebackError> {
    let post = EffectiveY::new(&model.y, &spec.delta_y, 1.0);
    let mis = model.mismatch(&post, candidate);
    if !(mis <= cfg.tol_step) {
        return Err(TracebackError::InvalidCandidate(mis));
    }
    let mut post_model = model.clone();
    post_model.y = post.materialize();
    let reverse: Vec<(usize, usize, Complex64)> = spec.delta_y.iter().map(|&(i, j, d)| (i, j, -d)).collect();
    let report = multi_stage_solve_from(&post_model, candidate.clone(), &reverse, cfg)?;
    let endpoint_diff = report.state.as_ref().map(|s| s.max_voltage_diff(base));
    let practical = report.converged() && endpoint_diff.is_some_and(|d| d <= TRACEBACK_MATCH_TOL);
    Ok(TracebackReport {
        verdict: if practical { Practicality::Practical } else { Practicality::NonPractical },
        reached_alpha: report.continuation.reached_alpha,
        endpoint_diff,
    })
}
