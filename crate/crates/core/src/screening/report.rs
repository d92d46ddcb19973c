use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ScreeningError;
use crate::baseline::{Classification, Method};
use crate::network::BranchRef;
use crate::parallel::{ContingencyResult, MethodRecord, RunStatus};

pub const REPORT_FORMAT: &str = "gridhe-screening";
pub const REPORT_VERSION: u32 = 1;

/// Outcome of one method on one contingency as it appears in a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Status {
    Normal,
    NonPractical,
    Collapse,
    /// Solution returned, traceback not run.
    Solved,
    /// No solution returned, traceback not run.
    NoSolution,
    SkippedIslanding,
    Failed,
}

impl Status {
    pub fn from_run(status: &RunStatus) -> Self {
        match status {
            RunStatus::Classified(Classification::Normal) => Status::Normal,
            RunStatus::Classified(Classification::NonPractical) => Status::NonPractical,
            RunStatus::Classified(Classification::Collapse) => Status::Collapse,
            RunStatus::Unverified { solved: true } => Status::Solved,
            RunStatus::Unverified { solved: false } => Status::NoSolution,
            RunStatus::SkippedIslanding { .. } => Status::SkippedIslanding,
            RunStatus::Failed(_) => Status::Failed,
        }
    }

    pub fn classification(self) -> Option<Classification> {
        match self {
            Status::Normal => Some(Classification::Normal),
            Status::NonPractical => Some(Classification::NonPractical),
            Status::Collapse => Some(Classification::Collapse),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub format: String,
    pub version: u32,
    pub case: String,
    pub methods: Vec<Method>,
    pub contingencies: usize,
}

/// One (contingency, method) line of the structured report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningRecord {
    pub id: String,
    pub outages: Vec<BranchRef>,
    pub load_scale: f64,
    pub method: Method,
    pub status: Status,
    /// NR iterations or HE stages.
    pub iterations: usize,
    pub reached_alpha: f64,
    pub final_mismatch: Option<f64>,
    pub traceback_alpha: Option<f64>,
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub id: String,
    pub method: Method,
    pub solve_seconds: f64,
    pub traceback_seconds: f64,
}

/// Screening outcomes with their wall times kept apart, so the structured part is reproducible.
#[derive(Clone, Debug, PartialEq)]
pub struct ScreeningReport {
    pub header: ReportHeader,
    pub records: Vec<ScreeningRecord>,
    pub timings: Vec<TimingRecord>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn record(c: &ContingencyResult, r: &MethodRecord) -> ScreeningRecord {
    let reason = match &r.status {
        RunStatus::Failed(msg) => Some(msg.clone()),
        _ => r.diagnostics.reason.clone(),
    };
    ScreeningRecord {
        id: c.id.clone(),
        outages: c.outages.clone(),
        load_scale: c.load_scale,
        method: r.method,
        status: Status::from_run(&r.status),
        iterations: r.diagnostics.iterations,
        reached_alpha: r.diagnostics.reached_alpha,
        final_mismatch: finite(r.diagnostics.final_mismatch),
        traceback_alpha: r.diagnostics.traceback_alpha,
        reason,
    }
}

impl ScreeningReport {
    pub fn from_results(case: &str, methods: &[Method], results: &[ContingencyResult]) -> Self {
        let mut records = Vec::with_capacity(results.len() * methods.len());
        let mut timings = Vec::with_capacity(records.capacity());
        for c in results {
            for r in &c.runs {
                records.push(record(c, r));
                timings.push(TimingRecord {
                    id: c.id.clone(),
                    method: r.method,
                    solve_seconds: r.solve_seconds,
                    traceback_seconds: r.traceback_seconds,
                });
            }
        }
        let header = ReportHeader {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            case: case.into(),
            methods: methods.to_vec(),
            contingencies: results.len(),
        };
        Self { header, records, timings }
    }

    /// Header line followed by one JSON record per line.
    pub fn to_jsonl(&self) -> String {
        let mut s = serde_json::to_string(&self.header).expect("header serializes");
        s.push('\n');
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("record serializes"));
            s.push('\n');
        }
        s
    }

    pub fn timings_jsonl(&self) -> String {
        let mut s = String::new();
        for t in &self.timings {
            s.push_str(&serde_json::to_string(t).expect("timing serializes"));
            s.push('\n');
        }
        s
    }

    /// Parses the output of [`ScreeningReport::to_jsonl`]; timings are left empty.
    pub fn parse_jsonl(text: &str) -> Result<Self, ScreeningError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let bad = |line: usize, e: serde_json::Error| ScreeningError::Report(format!("line {}: {e}", line + 1));
        let (k, first) = lines.next().ok_or_else(|| ScreeningError::Report("empty report".into()))?;
        let header: ReportHeader = serde_json::from_str(first).map_err(|e| bad(k, e))?;
        if header.format != REPORT_FORMAT {
            return Err(ScreeningError::Report(format!("unknown report format `{}`", header.format)));
        }
        if header.version != REPORT_VERSION {
            return Err(ScreeningError::Report(format!("unsupported report version {}", header.version)));
        }
        let records = lines.map(|(k, l)| serde_json::from_str(l).map_err(|e| bad(k, e))).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { header, records, timings: Vec::new() })
    }

    /// Status of `method` per contingency, in report order.
    pub fn column(&self, method: Method) -> Vec<(&str, Status)> {
        self.records.iter().filter(|r| r.method == method).map(|r| (r.id.as_str(), r.status)).collect()
    }

    pub fn cross_tab(&self, row: Method, col: Method) -> CrossTab {
        let b: BTreeMap<&str, Status> = self.column(col).into_iter().collect();
        let mut counts = BTreeMap::new();
        for (id, s) in self.column(row) {
            if let Some(&t) = b.get(id) {
                *counts.entry((s, t)).or_insert(0) += 1;
            }
        }
        CrossTab { row, col, counts }
    }

    /// Contingencies on which `a` and `b` report different statuses.
    pub fn disagreements(&self, a: Method, b: Method) -> Vec<Disagreement> {
        let cb: BTreeMap<&str, Status> = self.column(b).into_iter().collect();
        self.column(a)
            .into_iter()
            .filter_map(|(id, s)| {
                let t = *cb.get(id)?;
                (s != t).then(|| Disagreement { id: id.to_string(), a: s, b: t })
            })
            .collect()
    }

    fn method_pairs(&self) -> Vec<(Method, Method)> {
        let m = &self.header.methods;
        let mut out = Vec::new();
        for i in 0..m.len() {
            for j in i..m.len() {
                out.push((m[i], m[j]));
            }
        }
        out
    }

    /// Cross-tabulation of every method pair, the diagonal pairs giving per-method counts.
    pub fn cross_tab_csv(&self) -> String {
        let mut s = String::from("row_method,col_method,row_status,col_status,count\n");
        for (a, b) in self.method_pairs() {
            for ((x, y), n) in &self.cross_tab(a, b).counts {
                let _ = writeln!(s, "{a},{b},{x:?},{y:?},{n}");
            }
        }
        s
    }

    /// Total solve and traceback seconds per method.
    pub fn timing_summary(&self) -> Vec<(Method, usize, f64, f64)> {
        self.header
            .methods
            .iter()
            .map(|&m| {
                let ts: Vec<&TimingRecord> = self.timings.iter().filter(|t| t.method == m).collect();
                (m, ts.len(), ts.iter().map(|t| t.solve_seconds).sum(), ts.iter().map(|t| t.traceback_seconds).sum())
            })
            .collect()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "case {}: {} contingencies", self.header.case, self.header.contingencies);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<12} {:>8} {:>13} {:>9} {:>8} {:>11} {:>9} {:>7}", "method", "Normal", "NonPractical", "Collapse", "Solved", "NoSolution", "Skipped", "Failed");
        for &m in &self.header.methods {
            let col = self.column(m);
            let n = |st: Status| col.iter().filter(|(_, s)| *s == st).count();
            let _ = writeln!(
                s,
                "{:<12} {:>8} {:>13} {:>9} {:>8} {:>11} {:>9} {:>7}",
                m.to_string(),
                n(Status::Normal),
                n(Status::NonPractical),
                n(Status::Collapse),
                n(Status::Solved),
                n(Status::NoSolution),
                n(Status::SkippedIslanding),
                n(Status::Failed)
            );
        }
        let pairs: Vec<_> = self.method_pairs().into_iter().filter(|(a, b)| a != b).collect();
        if !pairs.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "disagreements");
            for (a, b) in pairs {
                let d = self.disagreements(a, b);
                let _ = writeln!(s, "  {a} vs {b}: {}", d.len());
                for x in &d {
                    let _ = writeln!(s, "    {}: {:?} / {:?}", x.id, x.a, x.b);
                }
            }
        }
        if !self.timings.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "{:<12} {:>6} {:>12} {:>12} {:>15}", "method", "runs", "solve [s]", "mean [s]", "traceback [s]");
            for (m, n, solve, tb) in self.timing_summary() {
                let mean = if n > 0 { solve / n as f64 } else { 0.0 };
                let _ = writeln!(s, "{:<12} {:>6} {:>12.3} {:>12.4} {:>15.3}", m.to_string(), n, solve, mean, tb);
            }
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossTab {
    pub row: Method,
    pub col: Method,
    pub counts: BTreeMap<(Status, Status), usize>,
}

impl CrossTab {
    pub fn get(&self, r: Status, c: Status) -> usize {
        self.counts.get(&(r, c)).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn row_marginal(&self, r: Status) -> usize {
        self.counts.iter().filter(|((x, _), _)| *x == r).map(|(_, n)| n).sum()
    }

    pub fn col_marginal(&self, c: Status) -> usize {
        self.counts.iter().filter(|((_, y), _)| *y == c).map(|(_, n)| n).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Disagreement {
    pub id: String,
    pub a: Status,
    pub b: Status,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::Diagnostics;

    fn run(method: Method, status: RunStatus, mismatch: f64) -> MethodRecord {
        MethodRecord {
            method,
            status,
            diagnostics: Diagnostics { iterations: 3, final_mismatch: mismatch, reached_alpha: 1.0, traceback_alpha: Some(1.0), reason: None },
            state: None,
            solve_seconds: 0.25,
            traceback_seconds: 0.5,
        }
    }

    fn sample() -> ScreeningReport {
        let he = Method::He;
        let nr = Method::Nr { mu: 1.0 };
        let normal = RunStatus::Classified(Classification::Normal);
        let results = vec![
            ContingencyResult {
                id: "a".into(),
                outages: vec![BranchRef { from: 1, to: 2, circuit: 1 }],
                load_scale: 1.0,
                runs: vec![run(he, normal.clone(), 1e-12), run(nr, normal.clone(), 1e-10)],
            },
            ContingencyResult {
                id: "b".into(),
                outages: vec![BranchRef { from: 2, to: 3, circuit: 1 }],
                load_scale: 1.1,
                runs: vec![
                    run(he, RunStatus::Classified(Classification::Collapse), 0.3),
                    run(nr, RunStatus::Classified(Classification::NonPractical), f64::INFINITY),
                ],
            },
            ContingencyResult {
                id: "c".into(),
                outages: vec![BranchRef { from: 3, to: 4, circuit: 1 }],
                load_scale: 1.0,
                runs: vec![run(he, RunStatus::SkippedIslanding { islands: 2 }, 0.0), run(nr, RunStatus::SkippedIslanding { islands: 2 }, 0.0)],
            },
        ];
        ScreeningReport::from_results("t", &[he, nr], &results)
    }

    #[test]
    fn jsonl_round_trip() {
        let r = sample();
        let text = r.to_jsonl();
        assert_eq!(text.lines().count(), 7);
        let back = ScreeningReport::parse_jsonl(&text).unwrap();
        assert_eq!(back.header, r.header);
        assert_eq!(back.records, r.records);
        assert_eq!(back.to_jsonl(), text);
        assert_eq!(back.records[3].final_mismatch, None);
    }

    #[test]
    fn rejects_other_versions() {
        let text = sample().to_jsonl().replacen("\"version\":1", "\"version\":9", 1);
        assert!(ScreeningReport::parse_jsonl(&text).is_err());
        assert!(ScreeningReport::parse_jsonl("").is_err());
    }

    #[test]
    fn cross_tab_marginals_sum_to_count() {
        let r = sample();
        let he = Method::He;
        let nr = Method::Nr { mu: 1.0 };
        let t = r.cross_tab(he, nr);
        assert_eq!(t.total(), 3);
        assert_eq!(t.get(Status::Normal, Status::Normal), 1);
        assert_eq!(t.get(Status::Collapse, Status::NonPractical), 1);
        assert_eq!(t.row_marginal(Status::SkippedIslanding), 1);
        assert_eq!(t.col_marginal(Status::NonPractical), 1);
        assert!(r.disagreements(he, he).is_empty());
        assert_eq!(r.disagreements(he, nr), vec![Disagreement { id: "b".into(), a: Status::Collapse, b: Status::NonPractical }]);
    }

    #[test]
    fn csv_and_summary() {
        let r = sample();
        let csv = r.cross_tab_csv();
        assert!(csv.starts_with("row_method,col_method,row_status,col_status,count\n"));
        assert!(csv.contains("HE,NR(1.0),Collapse,NonPractical,1\n"));
        assert!(csv.contains("HE,HE,Normal,Normal,1\n"));
        let s = r.summary();
        assert!(s.contains("HE vs NR(1.0): 1"));
        assert!(s.contains("b: Collapse / NonPractical"));
    }
}
