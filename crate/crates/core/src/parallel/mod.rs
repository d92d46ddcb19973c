//! Coordinator/worker execution of the partitioned solve and contingency-level parallelism.

mod agent;
mod comm;
mod coordinator;
mod message;
mod plan;
mod transport;

pub use agent::{SubsystemAgent, SubsystemBase};
pub use comm::{measure_comm, write_trace, CommReport, CommTrace, CommVolume, Direction, TraceEvent};
pub use coordinator::{
    assemble_series, run_p2he_single, run_phe_single, Coordinator, CoordinatorOutput, PartitionedBase, PartitionedSolve,
    SolveOptions,
};
pub use plan::{
    evaluate_contingency, run_method, run_screening, ContingencyResult, MethodRecord, PlanSettings, RunStatus, ScreeningBase, ThreadBudget,
    WorkPlan,
};
pub use message::{CoordinatorMessage, MessageKind, StageControl};
pub use transport::{worker_loop, InlineTransport, ThreadedTransport, Transport};
