//! Contingency screening by holomorphic embedding.
//!
//! The crate is organised bottom-up:
//!
//! * [`network`] reads cases, builds admittance matrices and contingency deltas.
//! * [`he`] is the monolithic embedding engine with multi-stage continuation.
//! * [`phe`] partitions a case and eliminates subsystem internals through boundary Schur complements.
//! * [`parallel`] runs the partitioned solve as a coordinator talking to subsystem workers.
//! * [`baseline`] holds the damped Newton-Raphson reference and traceback verification.
//! * [`screening`] drives methods over contingency lists and writes reports.
//! * [`synthetic`] builds the small analytic cases and the multi-area test systems.

pub mod baseline;
pub mod dense;
pub mod he;
pub mod network;
pub mod parallel;
pub mod phe;
pub mod screening;
pub mod sparse;
pub mod synthetic;

pub use num_complex::Complex64;
