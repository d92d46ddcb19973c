//! Screening drivers: run configuration, contingency sampling, reports and benchmarks.

mod bench;
mod config;
mod report;
mod sample;
mod state;

pub use bench::{benchmark, BenchmarkReport, BenchmarkRow};
pub use config::{parse_methods, RunConfig, ENV_PREFIX};
pub use report::{
    CrossTab, Disagreement, ReportHeader, ScreeningRecord, ScreeningReport, Status, TimingRecord, REPORT_FORMAT, REPORT_VERSION,
};
pub use sample::{n_minus_1, sample_contingencies, SampleRequest, DEFAULT_LOAD_SCALE};
pub use state::{parse_state_csv, verify_state, write_state_csv};

use std::path::Path;

use thiserror::Error;

use crate::baseline::Method;
use crate::network::{parse_case, read_contingency_csv, ContingencyEntry, GridCase};
use crate::parallel::{run_screening, ContingencyResult, PlanSettings, ThreadBudget, WorkPlan};
use crate::phe::{read_partition, PartitionSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScreeningError {
    /// Bad configuration or arguments.
    #[error("{0}")]
    Usage(String),
    /// Unreadable or invalid input data.
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("report: {0}")]
    Report(String),
    #[error("{0}")]
    Io(String),
}

impl ScreeningError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScreeningError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Case, partition and contingency list named by a run configuration.
#[derive(Clone, Debug)]
pub struct Inputs {
    pub case: GridCase,
    pub partition: Option<PartitionSpec>,
    pub contingencies: Vec<ContingencyEntry>,
}

impl Inputs {
    pub fn load(cfg: &RunConfig) -> Result<Self, ScreeningError> {
        cfg.validate()?;
        let input = |e: String| ScreeningError::Input(e);
        let case = parse_case(cfg.case.as_ref().expect("validated")).map_err(|e| input(e.to_string()))?;
        let partition = match &cfg.partition {
            Some(p) => Some(read_partition(p).map_err(|e| input(e.to_string()))?),
            None => None,
        };
        let contingencies = read_contingency_csv(cfg.contingencies.as_ref().expect("validated")).map_err(|e| input(e.to_string()))?;
        Ok(Self { case, partition, contingencies })
    }

    /// Work plan with the configured thread budget split between contingencies and subsystems.
    pub fn plan(&self, cfg: &RunConfig) -> Result<WorkPlan, ScreeningError> {
        let subsystems = self.partition.as_ref().map_or(0, |p| p.subsystems.len());
        let budget = ThreadBudget::split(cfg.workers, subsystems, cfg.methods.contains(&Method::P2he));
        let settings = PlanSettings { he: cfg.solver.clone(), nr: cfg.nr.clone(), budget, verify: cfg.verify, timeout: cfg.timeout() };
        let partition = if cfg.needs_partition() { self.partition.as_ref() } else { None };
        WorkPlan::new(&self.case, partition, self.contingencies.clone(), cfg.methods.clone(), settings).map_err(ScreeningError::Input)
    }
}

/// Loads the inputs of `cfg`, screens every contingency and returns the per-contingency results.
pub fn run_screen(cfg: &RunConfig) -> Result<(WorkPlan, Vec<ContingencyResult>, ScreeningReport), ScreeningError> {
    let inputs = Inputs::load(cfg)?;
    let plan = inputs.plan(cfg)?;
    let results = run_screening(&plan);
    let report = ScreeningReport::from_results(&inputs.case.name, &cfg.methods, &results);
    Ok((plan, results, report))
}

/// Writes `report.jsonl`, `timings.jsonl`, `crosstab.csv` and `summary.txt` into `dir`.
pub fn write_report(report: &ScreeningReport, dir: &Path) -> Result<(), ScreeningError> {
    let io = |e: std::io::Error| ScreeningError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    std::fs::write(dir.join("report.jsonl"), report.to_jsonl()).map_err(io)?;
    std::fs::write(dir.join("timings.jsonl"), report.timings_jsonl()).map_err(io)?;
    std::fs::write(dir.join("crosstab.csv"), report.cross_tab_csv()).map_err(io)?;
    std::fs::write(dir.join("summary.txt"), report.summary()).map_err(io)?;
    Ok(())
}
