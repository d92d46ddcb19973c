use serde::{Deserialize, Serialize};

use super::eval::EvalMode;
use super::{HeConfig, HeError};

/// One embedding stage as seen by the continuation driver.
pub trait StageEngine {
    /// Builds the stage at cumulative `alpha_done` and computes all orders.
    /// Returns the mismatch of the stage-start state.
    fn begin_stage(&mut self, alpha_done: f64) -> Result<f64, HeError>;
    /// Mismatch of the state evaluated at local step `t` in `(0, 1]`.
    fn probe(&mut self, t: f64, mode: EvalMode) -> Result<f64, HeError>;
    /// Moves the current state to local step `t`.
    fn advance(&mut self, t: f64, mode: EvalMode) -> Result<(), HeError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageStatus {
    Advanced,
    Stalled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    pub reached_alpha: f64,
    pub step: f64,
    pub mismatch: f64,
    pub mode: Option<EvalMode>,
    pub status: StageStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationReport {
    pub converged: bool,
    pub reached_alpha: f64,
    pub final_mismatch: f64,
    pub stages: Vec<StageResult>,
    pub reason: Option<String>,
}

fn admissible<E: StageEngine>(e: &mut E, t: f64, tol: f64, cfg: &HeConfig) -> Result<Option<(EvalMode, f64)>, HeError> {
    let m = e.probe(t, EvalMode::Truncated)?;
    if m <= tol {
        return Ok(Some((EvalMode::Truncated, m)));
    }
    if cfg.use_pade {
        let m = e.probe(t, EvalMode::Pade)?;
        if m <= tol {
            return Ok(Some((EvalMode::Pade, m)));
        }
    }
    Ok(None)
}

fn best_at_one<E: StageEngine>(e: &mut E, cfg: &HeConfig) -> Result<(EvalMode, f64), HeError> {
    let mt = e.probe(1.0, EvalMode::Truncated)?;
    if cfg.use_pade && mt > cfg.tol_polish {
        let mp = e.probe(1.0, EvalMode::Pade)?;
        if mp < mt {
            return Ok((EvalMode::Pade, mp));
        }
    }
    Ok((EvalMode::Truncated, mt))
}

/// Largest admissible local step: full step first, then bisection.
fn select_step<E: StageEngine>(e: &mut E, cfg: &HeConfig) -> Result<Option<(f64, EvalMode, f64)>, HeError> {
    if let Some((mode, m)) = admissible(e, 1.0, cfg.tol_step, cfg)? {
        return Ok(Some((1.0, mode, m)));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best = None;
    for _ in 0..cfg.bisection_steps {
        let mid = 0.5 * (lo + hi);
        match admissible(e, mid, cfg.tol_step, cfg)? {
            Some((mode, m)) => {
                lo = mid;
                best = Some((mid, mode, m));
            }
            None => hi = mid,
        }
    }
    Ok(best)
}

fn collapse(stages: Vec<StageResult>, alpha: f64, mismatch: f64, reason: String) -> ContinuationReport {
    ContinuationReport { converged: false, reached_alpha: alpha, final_mismatch: mismatch, stages, reason: Some(reason) }
}

/// Multi-stage continuation from alpha = 0 to alpha = 1.
///
/// Numerical breakdown (singular stage matrix, failed solve) ends in collapse; any other
/// engine error is returned.
pub fn run_continuation<E: StageEngine>(engine: &mut E, cfg: &HeConfig) -> Result<ContinuationReport, HeError> {
    let mut stages: Vec<StageResult> = Vec::new();
    let mut alpha = 0.0f64;
    let mut current = f64::INFINITY;
    let mut small_steps = 0;
    let mut polish = 0;
    for stage in 0..cfg.max_stages {
        let start = match engine.begin_stage(alpha) {
            Ok(m) => m,
            Err(e) if e.is_numerical() => return Ok(collapse(stages, alpha, current, e.to_string())),
            Err(e) => return Err(e),
        };
        if stage == 0 {
            if !(start <= cfg.tol_step) {
                return Err(HeError::InvalidInput(format!("start state mismatch {start:e} exceeds step tolerance")));
            }
            current = start;
        }
        if alpha == 1.0 {
            let (mode, m) = best_at_one(engine, cfg)?;
            polish += 1;
            let improved = m < current;
            if improved {
                engine.advance(1.0, mode)?;
                current = m;
            }
            stages.push(StageResult {
                reached_alpha: 1.0,
                step: 0.0,
                mismatch: current,
                mode: improved.then_some(mode),
                status: if improved { StageStatus::Advanced } else { StageStatus::Stalled },
            });
            if current <= cfg.tol_polish || !improved || polish >= cfg.max_polish_stages {
                break;
            }
            continue;
        }
        let remaining = 1.0 - alpha;
        let step = match select_step(engine, cfg) {
            Ok(s) => s,
            Err(e) if e.is_numerical() => return Ok(collapse(stages, alpha, current, e.to_string())),
            Err(e) => return Err(e),
        };
        let Some((t, mode, m)) = step else {
            stages.push(StageResult { reached_alpha: alpha, step: 0.0, mismatch: current, mode: None, status: StageStatus::Stalled });
            return Ok(collapse(stages, alpha, current, "no admissible step".into()));
        };
        engine.advance(t, mode)?;
        let prev = alpha;
        alpha = if t == 1.0 { 1.0 } else { alpha + t * remaining };
        current = m;
        stages.push(StageResult { reached_alpha: alpha, step: alpha - prev, mismatch: m, mode: Some(mode), status: StageStatus::Advanced });
        if alpha < 1.0 && alpha - prev < cfg.delta_min {
            small_steps += 1;
            if small_steps >= 2 {
                return Ok(collapse(stages, alpha, current, "stage progress below minimum".into()));
            }
        } else {
            small_steps = 0;
        }
        if alpha == 1.0 && current <= cfg.tol_polish {
            break;
        }
    }
    if alpha == 1.0 && current <= cfg.tol_converge {
        Ok(ContinuationReport { converged: true, reached_alpha: 1.0, final_mismatch: current, stages, reason: None })
    } else if alpha == 1.0 {
        Ok(collapse(stages, alpha, current, "end state above convergence tolerance".into()))
    } else {
        Ok(collapse(stages, alpha, current, "stage limit reached".into()))
    }
}
