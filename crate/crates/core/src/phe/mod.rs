//! Partitioned holomorphic embedding: subsystem elimination through boundary Schur complements.

mod complexity;
mod main_stage;
mod partition;
mod subsystem;

pub use complexity::{estimate_complexity, ComplexityConstants, ComplexityEstimate, ComplexityInput};
pub use main_stage::{fold_triplets, main_state0, MainStage};
pub use partition::{
    parse_partition, partition_case, read_partition, write_partition, BoundaryLink, MainView, Owner, PartitionSpec,
    PartitionedCase, SplitDelta, SubsystemSpec, SubsystemView,
};
pub use subsystem::{assemble_subsystem_stage, back_solve_internal, boundary_currents, reduce_subsystem_rhs, SubsystemStage};

use thiserror::Error;

use crate::network::NetworkError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("partition file: {0}")]
    Parse(String),
    #[error("bus {0} is not in the case")]
    UnknownBus(usize),
    #[error("bus {0} is not assigned to any part")]
    Unassigned(usize),
    #[error("bus {0} is assigned more than once")]
    Overlap(usize),
    #[error("slack bus {bus} lies inside subsystem `{sub}`")]
    SlackInSubsystem { sub: String, bus: usize },
    #[error("branch {from}-{to} ties subsystems `{a}` and `{b}` directly")]
    SubsystemTie { a: String, b: String, from: usize, to: usize },
    #[error("branch {from}-{to} connects subsystem `{sub}` to main bus {to} which is not one of its boundary buses")]
    OutsideBoundary { sub: String, from: usize, to: usize },
    #[error("boundary bus {bus} of subsystem `{sub}` is not a main-system bus")]
    BoundaryNotMain { sub: String, bus: usize },
    #[error("boundary bus {bus} of subsystem `{sub}` has no tie into the subsystem")]
    BoundaryWithoutTie { sub: String, bus: usize },
    #[error("subsystem `{0}` has no internal buses")]
    EmptySubsystem(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}
