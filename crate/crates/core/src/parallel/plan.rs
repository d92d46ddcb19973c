use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::coordinator::{run_p2he_single, run_phe_single, PartitionedBase, SolveOptions};
use crate::baseline::{
    classify_result, nr_solve, solve_base_state, traceback_verify, Classification, ContingencyOutcome, Diagnostics, Method,
    NrConfig,
};
use crate::he::{multi_stage_solve, BaseStage, HeConfig, SolveReport};
use crate::network::{
    build_contingency_delta, check_connectivity, scale_loading, BranchRef, ContingencyEntry, ContingencySpec, EffectiveY,
    GridCase, PfState, PowerFlowModel,
};
use crate::phe::{partition_case, PartitionSpec};

/// Pre-contingency artifacts of one loading level, shared read-only by every contingency task.
#[derive(Debug)]
pub struct ScreeningBase {
    pub case: GridCase,
    pub model: PowerFlowModel,
    pub state: PfState,
    pub he: BaseStage,
    pub partitioned: Option<PartitionedBase>,
}

impl ScreeningBase {
    /// Solves the base state and builds the monolithic and (when a partition is given) partitioned base stages.
    pub fn new(case: GridCase, partition: Option<&PartitionSpec>) -> Result<Self, String> {
        let model = PowerFlowModel::new(&case).map_err(|e| e.to_string())?;
        let state = solve_base_state(&model)?;
        let he = BaseStage::new(&model, state.clone()).map_err(|e| e.to_string())?;
        let partitioned = match partition {
            Some(p) => {
                let pc = partition_case(&case, p).map_err(|e| e.to_string())?;
                Some(PartitionedBase::new(pc, state.clone()).map_err(|e| e.to_string())?)
            }
            None => None,
        };
        Ok(Self { case, model, state, he, partitioned })
    }
}

/// Thread budget split between contingency tasks and subsystem workers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadBudget {
    pub contingency_workers: usize,
    pub subsystem_workers: usize,
}

impl ThreadBudget {
    /// Splits `total` threads: subsystem workers first (up to `subsystems`) when P2HE runs,
    /// the rest across contingencies.
    pub fn split(total: usize, subsystems: usize, p2he: bool) -> Self {
        let total = total.max(1);
        if p2he && subsystems > 0 {
            let sub = subsystems.min(total);
            Self { contingency_workers: (total / sub).max(1), subsystem_workers: sub }
        } else {
            Self { contingency_workers: total, subsystem_workers: 1 }
        }
    }
}

/// Solver and pool settings of a screening run.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanSettings {
    pub he: HeConfig,
    pub nr: NrConfig,
    pub budget: ThreadBudget,
    /// Classify solved states by traceback; when off, runs end as `Unverified`.
    pub verify: bool,
    /// Longest wait for a subsystem worker reply.
    pub timeout: Duration,
}

impl Default for PlanSettings {
    fn default() -> Self {
        Self {
            he: HeConfig::default(),
            nr: NrConfig::default(),
            budget: ThreadBudget { contingency_workers: 1, subsystem_workers: 1 },
            verify: true,
            timeout: Duration::from_secs(60),
        }
    }
}

/// Everything a screening run needs; bases are computed once per loading level.
#[derive(Clone, Debug)]
pub struct WorkPlan {
    pub contingencies: Vec<ContingencyEntry>,
    pub methods: Vec<Method>,
    pub settings: PlanSettings,
    /// Base artifacts by load-scale bit pattern; `None` when the scaled base case has no solution.
    pub bases: BTreeMap<u64, Result<Arc<ScreeningBase>, String>>,
}

fn scale_key(s: Option<f64>) -> u64 {
    s.unwrap_or(1.0).to_bits()
}

impl WorkPlan {
    /// Builds the base artifacts for every loading level appearing in `contingencies`.
    pub fn new(
        case: &GridCase,
        partition: Option<&PartitionSpec>,
        contingencies: Vec<ContingencyEntry>,
        methods: Vec<Method>,
        settings: PlanSettings,
    ) -> Result<Self, String> {
        let needs_partition = methods.iter().any(|m| matches!(m, Method::Phe | Method::P2he));
        if needs_partition && partition.is_none() {
            return Err("PHE and P2HE require a partition".into());
        }
        let partition = if needs_partition { partition } else { None };
        let mut bases = BTreeMap::new();
        let nominal = Arc::new(ScreeningBase::new(case.clone(), partition)?);
        bases.insert(scale_key(None), Ok(nominal));
        for e in &contingencies {
            let key = scale_key(e.load_scale);
            if bases.contains_key(&key) {
                continue;
            }
            let built = scale_loading(case, e.load_scale.unwrap_or(1.0))
                .map_err(|e| e.to_string())
                .and_then(|c| ScreeningBase::new(c, partition))
                .map(Arc::new);
            bases.insert(key, built);
        }
        Ok(Self { contingencies, methods, settings, bases })
    }

    pub fn nominal(&self) -> &ScreeningBase {
        self.bases[&scale_key(None)].as_ref().expect("nominal base exists")
    }

    /// Base artifacts at a loading level of the contingency list.
    pub fn base(&self, load_scale: Option<f64>) -> Result<&ScreeningBase, String> {
        match self.bases.get(&scale_key(load_scale)) {
            Some(Ok(b)) => Ok(b),
            Some(Err(msg)) => Err(msg.clone()),
            None => Err(format!("no base at load scale {}", load_scale.unwrap_or(1.0))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RunStatus {
    Classified(Classification),
    /// Islanding outage; excluded from the study.
    SkippedIslanding { islands: usize },
    /// Solver finished without traceback classification.
    Unverified { solved: bool },
    /// Infrastructure failure of this run (not a collapse finding).
    Failed(String),
}

/// One method applied to one contingency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: Method,
    pub status: RunStatus,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub state: Option<PfState>,
    /// Solver wall time, factorization included.
    pub solve_seconds: f64,
    pub traceback_seconds: f64,
}

impl MethodRecord {
    pub fn classification(&self) -> Option<Classification> {
        match self.status {
            RunStatus::Classified(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContingencyResult {
    pub id: String,
    pub outages: Vec<BranchRef>,
    pub load_scale: f64,
    pub runs: Vec<MethodRecord>,
}

fn he_diagnostics(r: &SolveReport) -> Diagnostics {
    Diagnostics {
        iterations: r.continuation.stages.len(),
        final_mismatch: r.continuation.final_mismatch,
        reached_alpha: r.continuation.reached_alpha,
        traceback_alpha: None,
        reason: r.continuation.reason.clone(),
    }
}

fn record(method: Method, outcome: ContingencyOutcome, solve_seconds: f64, traceback_seconds: f64) -> MethodRecord {
    MethodRecord {
        method,
        status: RunStatus::Classified(outcome.classification),
        diagnostics: outcome.diagnostics,
        state: outcome.state,
        solve_seconds,
        traceback_seconds,
    }
}

fn failed(method: Method, msg: String, solve_seconds: f64) -> MethodRecord {
    MethodRecord { method, status: RunStatus::Failed(msg), diagnostics: Diagnostics::default(), state: None, solve_seconds, traceback_seconds: 0.0 }
}

/// Runs one method on one contingency and classifies the result by traceback.
pub fn run_method(base: &ScreeningBase, spec: &ContingencySpec, method: Method, plan: &WorkPlan) -> MethodRecord {
    let t0 = Instant::now();
    let solved: Result<(Option<PfState>, Diagnostics), String> = match method {
        Method::He => multi_stage_solve(&base.he, spec, &plan.settings.he, false).map(|r| (r.state.clone(), he_diagnostics(&r))).map_err(|e| e.to_string()),
        Method::Phe | Method::P2he => match base.partitioned.as_ref() {
            None => Err("no partition for partitioned method".into()),
            Some(pb) => {
                let opts = SolveOptions { workers: plan.settings.budget.subsystem_workers, timeout: plan.settings.timeout, ..SolveOptions::default() };
                let r = if method == Method::Phe { run_phe_single(pb, spec, &plan.settings.he, &opts) } else { run_p2he_single(pb, spec, &plan.settings.he, &opts) };
                r.map(|s| (s.report.state.clone(), he_diagnostics(&s.report))).map_err(|e| e.to_string())
            }
        },
        Method::Nr { mu } => {
            let cfg = NrConfig { mu, ..plan.settings.nr.clone() };
            let r = nr_solve(&base.model, &EffectiveY::new(&base.model.y, &spec.delta_y, 1.0), &cfg, Some(&base.state));
            let reached_alpha = if r.converged() { 1.0 } else { 0.0 };
            let d = Diagnostics { iterations: r.iterations, final_mismatch: r.mismatch, reached_alpha, traceback_alpha: None, reason: r.failure.clone() };
            Ok((r.state, d))
        }
    };
    let solve_seconds = t0.elapsed().as_secs_f64();
    let (state, mut diag) = match solved {
        Ok(x) => x,
        Err(msg) => return failed(method, msg, solve_seconds),
    };
    if !plan.settings.verify {
        let status = RunStatus::Unverified { solved: state.is_some() };
        return MethodRecord { method, status, diagnostics: diag, state, solve_seconds, traceback_seconds: 0.0 };
    }
    let t1 = Instant::now();
    let verdict = match state.as_ref() {
        Some(s) => match traceback_verify(&base.model, &base.state, spec, s, &plan.settings.he) {
            Ok(t) => {
                diag.traceback_alpha = Some(t.reached_alpha);
                Some(t.verdict)
            }
            Err(e) => {
                diag.reason = Some(format!("traceback: {e}"));
                None
            }
        },
        None => None,
    };
    let traceback_seconds = t1.elapsed().as_secs_f64();
    record(method, classify_result(method, state, verdict, diag), solve_seconds, traceback_seconds)
}

/// Runs every requested method on one contingency entry.
pub fn evaluate_contingency(plan: &WorkPlan, entry: &ContingencyEntry) -> ContingencyResult {
    let load_scale = entry.load_scale.unwrap_or(1.0);
    let mut out = ContingencyResult { id: entry.id.clone(), outages: entry.outages.clone(), load_scale, runs: Vec::with_capacity(plan.methods.len()) };
    let base = match plan.base(entry.load_scale) {
        Ok(b) => b,
        Err(msg) => {
            out.runs = plan.methods.iter().map(|&m| failed(m, format!("base state: {msg}"), 0.0)).collect();
            return out;
        }
    };
    let spec = match build_contingency_delta(&base.case, &entry.id, &entry.outages) {
        Ok(s) => s,
        Err(e) => {
            out.runs = plan.methods.iter().map(|&m| failed(m, e.to_string(), 0.0)).collect();
            return out;
        }
    };
    let islands = check_connectivity(&base.case, &spec).len();
    for &m in &plan.methods {
        if islands > 1 {
            out.runs.push(MethodRecord {
                method: m,
                status: RunStatus::SkippedIslanding { islands },
                diagnostics: Diagnostics { reason: Some(format!("outage splits the network into {islands} islands")), ..Default::default() },
                state: None,
                solve_seconds: 0.0,
                traceback_seconds: 0.0,
            });
        } else {
            out.runs.push(run_method(base, &spec, m, plan));
        }
    }
    out
}

/// Screens every contingency over a pool of `budget.contingency_workers` threads.
///
/// Results come back in input order regardless of the pool size.
pub fn run_screening(plan: &WorkPlan) -> Vec<ContingencyResult> {
    let n = plan.contingencies.len();
    let workers = plan.settings.budget.contingency_workers.clamp(1, n.max(1));
    if workers == 1 {
        return plan.contingencies.iter().map(|e| evaluate_contingency(plan, e)).collect();
    }
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<ContingencyResult>> = vec![None; n];
    thread::scope(|sc| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                sc.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let k = next.fetch_add(1, Ordering::Relaxed);
                        if k >= n {
                            break done;
                        }
                        done.push((k, evaluate_contingency(plan, &plan.contingencies[k])));
                    }
                })
            })
            .collect();
        for h in handles {
            for (k, r) in h.join().expect("screening worker panicked") {
                slots[k] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every contingency evaluated")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::three_bus_pv_case;
    use num_complex::Complex64;

    fn plan(entries: Vec<ContingencyEntry>, methods: Vec<Method>, workers: usize) -> WorkPlan {
        let case = three_bus_pv_case(0.6, Complex64::new(1.4, 0.5));
        let settings = PlanSettings { budget: ThreadBudget::split(workers, 0, false), ..PlanSettings::default() };
        WorkPlan::new(&case, None, entries, methods, settings).unwrap()
    }

    fn entry(id: &str, from: usize, to: usize, scale: Option<f64>) -> ContingencyEntry {
        ContingencyEntry { id: id.into(), outages: vec![BranchRef { from, to, circuit: 1 }], load_scale: scale }
    }

    #[test]
    fn budget_split() {
        assert_eq!(ThreadBudget::split(8, 8, true), ThreadBudget { contingency_workers: 1, subsystem_workers: 8 });
        assert_eq!(ThreadBudget::split(16, 7, true), ThreadBudget { contingency_workers: 2, subsystem_workers: 7 });
        assert_eq!(ThreadBudget::split(2, 8, true), ThreadBudget { contingency_workers: 1, subsystem_workers: 2 });
        assert_eq!(ThreadBudget::split(4, 8, false), ThreadBudget { contingency_workers: 4, subsystem_workers: 1 });
        assert_eq!(ThreadBudget::split(0, 0, false).contingency_workers, 1);
    }

    #[test]
    fn empty_list_gives_empty_result() {
        assert!(run_screening(&plan(vec![], vec![Method::He], 4)).is_empty());
    }

    #[test]
    fn partitioned_methods_need_partition() {
        let case = three_bus_pv_case(0.6, Complex64::new(1.4, 0.5));
        assert!(WorkPlan::new(&case, None, vec![], vec![Method::P2he], PlanSettings::default()).is_err());
    }

    #[test]
    fn order_and_scales() {
        let entries: Vec<_> = (0..6).map(|k| entry(&format!("c{k}"), 1, 2, Some(1.0 + 0.01 * k as f64))).collect();
        let p = plan(entries, vec![Method::He, Method::Nr { mu: 1.0 }], 3);
        assert_eq!(p.bases.len(), 6);
        let r = run_screening(&p);
        let ids: Vec<_> = r.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, ["c0", "c1", "c2", "c3", "c4", "c5"]);
        assert!(r.iter().all(|c| c.runs.len() == 2));
        let serial = WorkPlan { settings: PlanSettings { budget: ThreadBudget::split(1, 0, false), ..p.settings.clone() }, ..p.clone() };
        let one = run_screening(&serial);
        assert_eq!(untimed(one), untimed(r));
    }

    fn untimed(mut r: Vec<ContingencyResult>) -> Vec<ContingencyResult> {
        for run in r.iter_mut().flat_map(|c| c.runs.iter_mut()) {
            run.solve_seconds = 0.0;
            run.traceback_seconds = 0.0;
        }
        r
    }

    #[test]
    fn unknown_branch_is_recorded_not_fatal() {
        let r = run_screening(&plan(vec![entry("x", 7, 9, None)], vec![Method::He], 1));
        assert!(matches!(r[0].runs[0].status, RunStatus::Failed(_)));
    }
}
