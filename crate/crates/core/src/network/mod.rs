//! Case data, admittance construction, contingency deltas and connectivity.

mod admittance;
mod case;
mod connectivity;
mod contingency;
mod matpower;
mod model;

pub use admittance::{branch_stamp, build_admittance, AdmittanceMatrix, BusOrdering, EffectiveY};
pub use case::{scale_loading, Branch, BranchStatus, Bus, BusKind, GridCase, ZipLoad};
pub use connectivity::{check_connectivity, islands};
pub use contingency::{
    build_contingency_delta, parse_contingency_csv, read_contingency_csv, write_contingency_csv, BranchRef,
    ContingencyEntry, ContingencySpec,
};
pub use matpower::{parse_case, parse_case_str, write_matpower};
pub use model::{PfState, PowerFlowModel};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("duplicate bus id {0}")]
    DuplicateBus(usize),
    #[error("branch {index} references unknown bus {bus}")]
    UnknownEndpoint { index: usize, bus: usize },
    #[error("island containing bus {0} has no slack bus")]
    NoSlack(usize),
    #[error("island containing bus {0} has more than one slack bus")]
    MultipleSlack(usize),
    #[error("bus {0}: invalid voltage setpoint")]
    InvalidSetpoint(usize),
    #[error("bus {0}: ZIP fractions must sum to 1")]
    InvalidZip(usize),
    #[error("branch {0} has zero series impedance")]
    ZeroImpedance(usize),
    #[error("branch {0} has zero tap ratio")]
    ZeroTap(usize),
    #[error("unknown branch {0}")]
    UnknownBranch(String),
    #[error("branch {0} is already out of service")]
    BranchAlreadyOut(String),
    #[error("scale factor must be positive, got {0}")]
    InvalidScale(f64),
    #[error("{0}")]
    Invalid(String),
}
