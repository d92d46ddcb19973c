//! Damped Newton-Raphson reference solver, traceback verification and outcome classification.

mod nr;
mod outcome;
mod traceback;

pub use nr::{damped_newton, nr_solve, nr_solve_from, solve_base_state, NewtonOutcome, NewtonSystem, NrConfig, NrResult, NrStart, PolarPowerFlow};
pub use outcome::{classify, classify_result, Classification, ContingencyOutcome, Diagnostics, Method};
pub use traceback::{traceback_verify, Practicality, TracebackError, TracebackReport};
