use std::fmt::Write as _;
use std::time::Instant;

use crate::baseline::Method;
use super::report::Status;
use crate::parallel::{evaluate_contingency, run_screening, ThreadBudget, WorkPlan};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkRow {
    pub method: Method,
    pub runs: usize,
    /// Wall time of the whole batch.
    pub wall_seconds: f64,
    /// Sum of per-contingency solve times.
    pub solve_seconds: f64,
    pub budget: ThreadBudget,
    /// Outcome of each contingency, in input order.
    pub statuses: Vec<Status>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub warmup: usize,
}

impl BenchmarkReport {
    pub fn wall(&self, m: Method) -> Option<f64> {
        self.rows.iter().find(|r| r.method == m).map(|r| r.wall_seconds)
    }

    /// Whether HE > PHE > P2HE in wall time, when all three were run.
    pub fn ordering_holds(&self) -> Option<bool> {
        let (he, phe, p2) = (self.wall(Method::He)?, self.wall(Method::Phe)?, self.wall(Method::P2he)?);
        Some(he > phe && phe > p2)
    }

    /// HE wall time over PHE wall time.
    pub fn phe_speedup(&self) -> Option<f64> {
        Some(self.wall(Method::He)? / self.wall(Method::Phe)?)
    }

    /// Contingencies whose outcome differs from the first row's.
    pub fn disagreements(&self) -> usize {
        let Some(first) = self.rows.first() else { return 0 };
        (0..first.statuses.len()).filter(|&i| self.rows.iter().any(|r| r.statuses[i] != first.statuses[i])).count()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<12} {:>6} {:>8} {:>12} {:>12} {:>10}", "method", "runs", "threads", "wall [s]", "solve [s]", "vs first");
        let first = self.rows.first().map_or(1.0, |r| r.wall_seconds);
        for r in &self.rows {
            let threads = r.budget.contingency_workers * r.budget.subsystem_workers;
            let _ = writeln!(
                s,
                "{:<12} {:>6} {:>8} {:>12.3} {:>12.3} {:>10.3}",
                r.method.to_string(),
                r.runs,
                threads,
                r.wall_seconds,
                r.solve_seconds,
                r.wall_seconds / first
            );
        }
        let _ = writeln!(s, "warmup runs excluded: {}", self.warmup);
        if self.rows.len() > 1 {
            let _ = writeln!(s, "contingencies with differing outcomes: {}", self.disagreements());
        }
        if let Some(ok) = self.ordering_holds() {
            let _ = writeln!(s, "ordering HE > PHE > P2HE: {}", if ok { "holds" } else { "violated" });
        }
        if let Some(x) = self.phe_speedup() {
            let _ = writeln!(s, "PHE speedup over HE: {x:.3}");
        }
        s
    }
}

/// Times each method of `plan` over its contingency list, one method at a time.
///
/// HE, PHE and NR run on one thread; P2HE gets up to `workers` subsystem workers.
/// The first `warmup` contingencies are solved once per method before timing starts.
pub fn benchmark(plan: &WorkPlan, workers: usize, warmup: usize) -> BenchmarkReport {
    let subsystems = plan.nominal().partitioned.as_ref().map_or(0, |p| p.n_subsystems());
    let mut rows = Vec::with_capacity(plan.methods.len());
    for &m in &plan.methods {
        let mut p = plan.clone();
        p.methods = vec![m];
        p.settings.budget = if m == Method::P2he {
            ThreadBudget { contingency_workers: 1, subsystem_workers: workers.clamp(1, subsystems.max(1)) }
        } else {
            ThreadBudget { contingency_workers: 1, subsystem_workers: 1 }
        };
        for e in p.contingencies.iter().take(warmup) {
            evaluate_contingency(&p, e);
        }
        let t0 = Instant::now();
        let results = run_screening(&p);
        let wall_seconds = t0.elapsed().as_secs_f64();
        let solve_seconds = results.iter().flat_map(|r| &r.runs).map(|r| r.solve_seconds).sum();
        let statuses = results.iter().map(|r| Status::from_run(&r.runs[0].status)).collect();
        rows.push(BenchmarkRow { method: m, runs: results.len(), wall_seconds, solve_seconds, budget: p.settings.budget, statuses });
    }
    BenchmarkReport { rows, warmup }
}
