use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::he::{EvalMode, HeError};

/// Stage-level instructions from the coordinator to one subsystem worker.
#[derive(Clone, Debug, PartialEq)]
pub enum StageControl {
    /// Start a stage at cumulative `alpha_done` with the given boundary voltages.
    Begin { alpha_done: f64, v_b0: Vec<Complex64>, order: usize },
    /// Report the internal mismatch and boundary currents at local step `t`.
    Probe { t: f64, mode: EvalMode, alpha: f64, v_b: Vec<Complex64> },
    /// Move the internal state to local step `t`.
    Advance { t: f64, mode: EvalMode },
    /// Drop the current stage.
    Abort,
    Finish,
}

/// Every message exchanged between the coordinator and subsystem workers.
///
/// Payloads are boundary-sized: no variant carries internal states or internal topology.
#[derive(Clone, Debug, PartialEq)]
pub enum CoordinatorMessage {
    StageControl { sub: usize, control: StageControl },
    /// Schur complement, stage-start boundary currents and stage-start internal mismatch.
    SchurBlock { sub: usize, l_s: DenseMatrix, i_b0: Vec<Complex64>, start_mismatch: f64 },
    ReducedRhs { sub: usize, order: usize, r_s: Vec<f64> },
    BoundaryCoeffs { sub: usize, order: usize, c_sb: Vec<f64>, d_sb: Vec<f64> },
    MismatchReport { sub: usize, mismatch: f64, currents: Vec<Complex64> },
    Failure { sub: usize, error: HeError },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MessageKind {
    Begin,
    Probe,
    Advance,
    Abort,
    Finish,
    SchurBlock,
    ReducedRhs,
    BoundaryCoeffs,
    MismatchReport,
    Failure,
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl CoordinatorMessage {
    pub fn sub(&self) -> usize {
        match self {
            Self::StageControl { sub, .. }
            | Self::SchurBlock { sub, .. }
            | Self::ReducedRhs { sub, .. }
            | Self::BoundaryCoeffs { sub, .. }
            | Self::MismatchReport { sub, .. }
            | Self::Failure { sub, .. } => *sub,
        }
    }

    pub fn kind(&self) -> MessageKind {
        match self {
            Self::StageControl { control, .. } => match control {
                StageControl::Begin { .. } => MessageKind::Begin,
                StageControl::Probe { .. } => MessageKind::Probe,
                StageControl::Advance { .. } => MessageKind::Advance,
                StageControl::Abort => MessageKind::Abort,
                StageControl::Finish => MessageKind::Finish,
            },
            Self::SchurBlock { .. } => MessageKind::SchurBlock,
            Self::ReducedRhs { .. } => MessageKind::ReducedRhs,
            Self::BoundaryCoeffs { .. } => MessageKind::BoundaryCoeffs,
            Self::MismatchReport { .. } => MessageKind::MismatchReport,
            Self::Failure { .. } => MessageKind::Failure,
        }
    }

    pub fn order(&self) -> Option<usize> {
        match self {
            Self::ReducedRhs { order, .. } | Self::BoundaryCoeffs { order, .. } => Some(*order),
            _ => None,
        }
    }

    /// Number of real scalars carried, excluding the routing header.
    pub fn payload_reals(&self) -> usize {
        match self {
            Self::StageControl { control, .. } => match control {
                StageControl::Begin { v_b0, .. } => 2 + 2 * v_b0.len(),
                StageControl::Probe { v_b, .. } => 3 + 2 * v_b.len(),
                StageControl::Advance { .. } => 2,
                StageControl::Abort | StageControl::Finish => 0,
            },
            Self::SchurBlock { l_s, i_b0, .. } => l_s.data.len() + 2 * i_b0.len() + 1,
            Self::ReducedRhs { r_s, .. } => r_s.len(),
            Self::BoundaryCoeffs { c_sb, d_sb, .. } => c_sb.len() + d_sb.len(),
            Self::MismatchReport { currents, .. } => 1 + 2 * currents.len(),
            Self::Failure { .. } => 0,
        }
    }

    pub fn payload_bytes(&self) -> usize {
        8 * self.payload_reals()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_payloads() {
        let m = CoordinatorMessage::BoundaryCoeffs { sub: 0, order: 3, c_sb: vec![1.0], d_sb: vec![0.0] };
        assert_eq!((m.payload_reals(), m.order(), m.kind()), (2, Some(3), MessageKind::BoundaryCoeffs));
        let s = CoordinatorMessage::SchurBlock { sub: 1, l_s: DenseMatrix::zeros(4, 4), i_b0: vec![Complex64::new(0.0, 0.0); 2], start_mismatch: 0.0 };
        assert_eq!((s.sub(), s.payload_reals()), (1, 21));
    }
}
