use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::agent::{SubsystemAgent, SubsystemBase};
use super::comm::{CommTrace, Direction, TraceEvent};
use super::message::{CoordinatorMessage, StageControl};
use super::transport::{worker_loop, InlineTransport, ThreadedTransport, Transport};
use crate::dense::DenseMatrix;
use crate::he::{
    evaluate_truncated, run_continuation, ContinuationReport, EvalMode, ExtVoltages, HeConfig, HeError, HeSeries,
    SeriesApproximant, SolveReport, StageEngine, StageState0, StageSystem,
};
use crate::network::{ContingencySpec, EffectiveY, PfState};
use crate::phe::{assemble_subsystem_stage, main_state0, BoundaryLink, MainStage, PartitionedCase, SplitDelta};
use crate::sparse::LuSymbolic;

/// Factorizations at the pre-contingency state, computed once and shared by every contingency.
#[derive(Debug)]
pub struct PartitionedBase {
    pub pcase: PartitionedCase,
    pub state: PfState,
    pub main: MainStage,
    pub main_symbolic: LuSymbolic,
    pub subs: Vec<SubsystemBase>,
}

fn boundary_voltages(links: &[BoundaryLink], v: &[Complex64], v_slack: &[Complex64]) -> Vec<Complex64> {
    links
        .iter()
        .map(|l| match *l {
            BoundaryLink::Unknown(i) => v[i],
            BoundaryLink::Fixed(e) => v_slack[e],
        })
        .collect()
}

fn symbolic_of(lhs: &crate::sparse::CscMatrix) -> Result<LuSymbolic, HeError> {
    LuSymbolic::analyze(lhs).map_err(|e| HeError::Solver(e.to_string()))
}

impl PartitionedBase {
    pub fn new(pcase: PartitionedCase, state: PfState) -> Result<Self, HeError> {
        let m = &pcase.model;
        if state.v.len() != m.n_total() || state.q_pv.len() != m.n_pv() {
            return Err(HeError::InvalidState("state dimension does not match the case".into()));
        }
        let s_main = main_state0(&pcase, &state);
        let mut subs = Vec::with_capacity(pcase.n_subsystems());
        for (s, view) in pcase.subsystems.iter().enumerate() {
            let (v, q) = pcase.sub_state(s, &state);
            let v_b0 = boundary_voltages(&view.links, &s_main.v, &pcase.main.v_slack);
            let stage = assemble_subsystem_stage(view, &[], &[], 0.0, StageState0::from_voltages(v, q), &v_b0, None)?;
            let symbolic = symbolic_of(&stage.system.lhs)?;
            subs.push(SubsystemBase { stage, symbolic });
        }
        let schur: Vec<(&DenseMatrix, &[Complex64])> = subs.iter().map(|b| (&b.stage.l_s, b.stage.i_b0.as_slice())).collect();
        let main = MainStage::assemble(&pcase, &[], 0.0, s_main, &schur, None)?;
        let main_symbolic = symbolic_of(&main.system.lhs)?;
        Ok(Self { pcase, state, main, main_symbolic, subs })
    }

    pub fn n_subsystems(&self) -> usize {
        self.subs.len()
    }

    fn agents<'a>(&'a self, split: &SplitDelta, cfg: &'a HeConfig, capture: bool) -> Vec<SubsystemAgent<'a>> {
        self.pcase
            .subsystems
            .iter()
            .zip(&self.subs)
            .enumerate()
            .map(|(s, (view, base))| {
                SubsystemAgent::new(view, base, cfg, split.internal[s].clone(), split.boundary[s].clone(), capture)
            })
            .collect()
    }
}

/// Options of one partitioned solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Subsystem worker threads (P2HE only).
    pub workers: usize,
    /// Keep every stage series.
    pub capture: bool,
    /// Record every message.
    pub trace: bool,
    /// Longest wait for any worker reply.
    pub timeout: Duration,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { workers: 1, capture: false, trace: false, timeout: Duration::from_secs(60) }
    }
}

/// Main-process side of the partitioned solve; drives subsystem agents over a transport.
pub struct Coordinator<'a, T: Transport> {
    base: &'a PartitionedBase,
    cfg: &'a HeConfig,
    transport: T,
    trace: Option<CommTrace>,
    delta: Vec<(usize, usize, Complex64)>,
    v: Vec<Complex64>,
    q: Vec<f64>,
    alpha: f64,
    at_base: bool,
    own: Option<MainStage>,
    series: HeSeries,
    approx: Option<SeriesApproximant>,
    captured: Option<Vec<HeSeries>>,
}

/// Main-system results handed back when the coordinator finishes.
pub struct CoordinatorOutput<T> {
    pub v: Vec<Complex64>,
    pub q: Vec<f64>,
    pub captured: Option<Vec<HeSeries>>,
    pub trace: Option<Vec<TraceEvent>>,
    pub transport: T,
}

impl<'a, T: Transport> Coordinator<'a, T> {
    pub fn new(base: &'a PartitionedBase, cfg: &'a HeConfig, delta_main: Vec<(usize, usize, Complex64)>, transport: T, opts: &SolveOptions) -> Self {
        let s0 = &base.main.system.state0;
        Self {
            base,
            cfg,
            transport,
            trace: opts.trace.then(|| CommTrace::new(base.n_subsystems())),
            delta: delta_main,
            v: s0.v.clone(),
            q: s0.q_pv.clone(),
            alpha: 0.0,
            at_base: true,
            own: None,
            series: HeSeries::default(),
            approx: None,
            captured: opts.capture.then(Vec::new),
        }
    }

    fn k(&self) -> usize {
        self.base.n_subsystems()
    }

    fn send(&mut self, msg: CoordinatorMessage) -> Result<(), HeError> {
        if let Some(t) = self.trace.as_mut() {
            t.record(Direction::ToWorker, &msg);
        }
        self.transport.send(msg)
    }

    fn recv(&mut self) -> Result<CoordinatorMessage, HeError> {
        let msg = self.transport.recv()?;
        if let Some(t) = self.trace.as_mut() {
            t.record(Direction::ToCoordinator, &msg);
        }
        if let CoordinatorMessage::Failure { error, .. } = msg {
            return Err(error);
        }
        if msg.sub() >= self.k() {
            return Err(HeError::Protocol(format!("reply from unknown subsystem {}", msg.sub())));
        }
        Ok(msg)
    }

    fn control(&mut self, sub: usize, control: StageControl) -> Result<(), HeError> {
        self.send(CoordinatorMessage::StageControl { sub, control })
    }

    fn boundary(&self, s: usize, v: &[Complex64]) -> Vec<Complex64> {
        boundary_voltages(&self.base.pcase.subsystems[s].links, v, &self.base.pcase.main.v_slack)
    }

    /// One reduced right-hand side of `order` from every subsystem, indexed by subsystem.
    fn collect_reduced(&mut self, order: usize) -> Result<Vec<Vec<f64>>, HeError> {
        let mut slots: Vec<Option<Vec<f64>>> = vec![None; self.k()];
        for _ in 0..self.k() {
            match self.recv()? {
                CoordinatorMessage::ReducedRhs { sub, order: n, r_s } if n == order && slots[sub].is_none() => slots[sub] = Some(r_s),
                other => return Err(HeError::Protocol(format!("expected reduced rhs of order {order}, got {} from {}", other.kind(), other.sub()))),
            }
        }
        Ok(slots.into_iter().map(|s| s.unwrap()).collect())
    }

    fn global_alpha(&self, t: f64) -> f64 {
        if t == 1.0 {
            1.0
        } else {
            self.alpha + t * (1.0 - self.alpha)
        }
    }

    fn evaluate(&mut self, t: f64, mode: EvalMode) -> Result<(Vec<Complex64>, Vec<f64>), HeError> {
        match mode {
            EvalMode::Truncated => Ok(evaluate_truncated(&self.series, t)),
            EvalMode::Pade => {
                if self.approx.is_none() {
                    self.approx = Some(SeriesApproximant::build(&self.series)?);
                }
                Ok(self.approx.as_ref().unwrap().evaluate(t))
            }
        }
    }

    fn main_mismatch(&self, alpha: f64, v: &[Complex64], q: &[f64], currents: &[Vec<Complex64>]) -> f64 {
        let p = &self.base.pcase;
        let links: Vec<&[BoundaryLink]> = p.subsystems.iter().map(|s| s.links.as_slice()).collect();
        let cur: Vec<&[Complex64]> = currents.iter().map(Vec::as_slice).collect();
        let extra = MainStage::extra_current(&p.main, &links, &cur);
        let block = &p.main.block;
        block.mismatch(&EffectiveY::new(&block.y, &self.delta, alpha), v, q, &p.main.v_slack, &extra)
    }

    /// Orders `1..=N` of the main series, exchanging reduced right-hand sides and boundary coefficients.
    fn solve_orders(&mut self, system: &StageSystem, alpha_done: f64, mut reduced: Vec<Vec<f64>>) -> Result<HeSeries, HeError> {
        let p = &self.base.pcase;
        let block = &p.main.block;
        let order = self.cfg.order;
        let rest = 1.0 - alpha_done;
        let stage_delta: Vec<_> = self.delta.iter().map(|&(i, j, d)| (i, j, d * rest)).collect();
        let nm = block.n();
        let ext = ExtVoltages::Fixed(&p.main.v_slack);
        let mut series = system.series0();
        for n in 1..=order {
            let mut rhs = block.compute_rhs(n, &series, &ext, &stage_delta, self.cfg.residual_correction.then_some(system.r0.as_slice()))?;
            for (view, r_s) in p.subsystems.iter().zip(&reduced) {
                let nb = view.n_boundary();
                for (a, link) in view.links.iter().enumerate() {
                    if let BoundaryLink::Unknown(i) = *link {
                        rhs[i] += r_s[a];
                        rhs[nm + i] += r_s[nb + a];
                    }
                }
            }
            let x = system.solve(&rhs)?;
            let (v, w, q) = block.split(&x);
            for (s, view) in p.subsystems.iter().enumerate() {
                let (c_sb, d_sb) = view
                    .links
                    .iter()
                    .map(|l| match *l {
                        BoundaryLink::Unknown(i) => (v[i].re, v[i].im),
                        BoundaryLink::Fixed(_) => (0.0, 0.0),
                    })
                    .unzip();
                self.send(CoordinatorMessage::BoundaryCoeffs { sub: s, order: n, c_sb, d_sb })?;
            }
            series.push(v, w, q);
            if n < order {
                reduced = self.collect_reduced(n + 1)?;
            }
        }
        Ok(series)
    }

    /// Tells every worker to stop and returns the main-system results.
    pub fn finish(mut self) -> CoordinatorOutput<T> {
        for s in 0..self.k() {
            let _ = self.control(s, StageControl::Finish);
        }
        CoordinatorOutput { v: self.v, q: self.q, captured: self.captured, trace: self.trace.map(|t| t.events), transport: self.transport }
    }

    /// Drops any half-finished stage on every worker.
    pub fn abort(&mut self) {
        for s in 0..self.k() {
            let _ = self.control(s, StageControl::Abort);
        }
    }
}

impl<T: Transport> StageEngine for Coordinator<'_, T> {
    fn begin_stage(&mut self, alpha_done: f64) -> Result<f64, HeError> {
        let k = self.k();
        let order = self.cfg.order;
        self.alpha = alpha_done;
        for s in 0..k {
            let v_b0 = self.boundary(s, &self.v);
            self.control(s, StageControl::Begin { alpha_done, v_b0, order })?;
        }
        let mut schur: Vec<Option<(DenseMatrix, Vec<Complex64>, f64)>> = vec![None; k];
        let mut first: Vec<Option<Vec<f64>>> = vec![None; k];
        for _ in 0..2 * k {
            match self.recv()? {
                CoordinatorMessage::SchurBlock { sub, l_s, i_b0, start_mismatch } if schur[sub].is_none() => {
                    schur[sub] = Some((l_s, i_b0, start_mismatch))
                }
                CoordinatorMessage::ReducedRhs { sub, order: 1, r_s } if schur[sub].is_some() && first[sub].is_none() => first[sub] = Some(r_s),
                other => return Err(HeError::Protocol(format!("unexpected {} from subsystem {} at stage start", other.kind(), other.sub()))),
            }
        }
        let schur: Vec<(DenseMatrix, Vec<Complex64>, f64)> = schur.into_iter().map(Option::unwrap).collect();
        let reduced: Vec<Vec<f64>> = first.into_iter().map(Option::unwrap).collect();

        let p = &self.base.pcase;
        if !(self.at_base && alpha_done == 0.0) {
            let folded: Vec<(&DenseMatrix, &[Complex64])> = schur.iter().map(|(l, i, _)| (l, i.as_slice())).collect();
            let s0 = StageState0::from_voltages(self.v.clone(), self.q.clone());
            self.own = Some(MainStage::assemble(p, &self.delta, alpha_done, s0, &folded, Some(&self.base.main_symbolic))?);
        }
        let currents: Vec<Vec<Complex64>> = schur.iter().map(|s| s.1.clone()).collect();
        let start = schur.iter().fold(self.main_mismatch(alpha_done, &self.v, &self.q, &currents), |m, s| m.max(s.2));

        let own = self.own.take();
        let base = self.base;
        let series = self.solve_orders(&own.as_ref().unwrap_or(&base.main).system, alpha_done, reduced);
        self.own = own;
        let series = series?;
        if let Some(c) = self.captured.as_mut() {
            c.push(series.clone());
        }
        self.series = series;
        self.approx = None;
        Ok(start)
    }

    fn probe(&mut self, t: f64, mode: EvalMode) -> Result<f64, HeError> {
        let (v, q) = self.evaluate(t, mode)?;
        let alpha = self.global_alpha(t);
        for s in 0..self.k() {
            let v_b = self.boundary(s, &v);
            self.control(s, StageControl::Probe { t, mode, alpha, v_b })?;
        }
        let mut reports: Vec<Option<(f64, Vec<Complex64>)>> = vec![None; self.k()];
        for _ in 0..self.k() {
            match self.recv()? {
                CoordinatorMessage::MismatchReport { sub, mismatch, currents } if reports[sub].is_none() => reports[sub] = Some((mismatch, currents)),
                other => return Err(HeError::Protocol(format!("expected mismatch report, got {} from {}", other.kind(), other.sub()))),
            }
        }
        let (sub_m, currents): (Vec<f64>, Vec<Vec<Complex64>>) = reports.into_iter().map(Option::unwrap).unzip();
        Ok(sub_m.into_iter().fold(self.main_mismatch(alpha, &v, &q, &currents), f64::max))
    }

    fn advance(&mut self, t: f64, mode: EvalMode) -> Result<(), HeError> {
        let (v, q) = self.evaluate(t, mode)?;
        for s in 0..self.k() {
            self.control(s, StageControl::Advance { t, mode })?;
        }
        self.v = v;
        self.q = q;
        self.at_base = false;
        Ok(())
    }
}

/// Result of one partitioned solve.
#[derive(Clone, Debug)]
pub struct PartitionedSolve {
    /// State and series are in full-model indexing, as for monolithic HE.
    pub report: SolveReport,
    pub trace: Option<Vec<TraceEvent>>,
}

/// Per-stage series of the whole model from main and subsystem series.
pub fn assemble_series(p: &PartitionedCase, main: &HeSeries, subs: &[HeSeries]) -> HeSeries {
    let m = &p.model;
    let npq = m.n_pq();
    let zero = Complex64::new(0.0, 0.0);
    let mut out = HeSeries::default();
    let orders = subs.iter().map(HeSeries::order).fold(main.order(), usize::min);
    for n in 0..=orders {
        let mut v = vec![zero; m.n()];
        let mut w = vec![zero; m.n()];
        let mut q = vec![0.0; m.n_pv()];
        let mut place = |block: &crate::he::EmbeddedBlock, full: &[usize], s: &HeSeries| {
            for i in 0..block.n() {
                v[full[i]] = s.v[n][i];
                w[full[i]] = s.w[n][i];
                if block.is_pv(i) {
                    q[full[i] - npq] = s.q[n][i - block.n_pq];
                }
            }
        };
        place(&p.main.block, &p.main.full_index, main);
        for (view, s) in p.subsystems.iter().zip(subs) {
            place(&view.block, &view.full_index, s);
        }
        out.push(v, w, q);
    }
    out
}

fn finalize<T>(
    base: &PartitionedBase,
    result: Result<ContinuationReport, HeError>,
    main: CoordinatorOutput<T>,
    mut agents: Vec<SubsystemAgent<'_>>,
) -> Result<PartitionedSolve, HeError> {
    let report = result?;
    let p = &base.pcase;
    agents.sort_by_key(|a| a.sub());
    let state = report.converged.then(|| {
        let subs: Vec<_> = agents.iter().map(|a| a.state()).collect();
        p.assemble_state(&main.v, &main.q, &subs)
    });
    let series = main.captured.map(|mc| {
        let sub_caps: Vec<Vec<HeSeries>> = agents.iter_mut().map(|a| a.take_captured().unwrap_or_default()).collect();
        let stages = sub_caps.iter().map(Vec::len).fold(mc.len(), usize::min);
        (0..stages)
            .map(|k| {
                let subs: Vec<HeSeries> = sub_caps.iter().map(|c| c[k].clone()).collect();
                assemble_series(p, &mc[k], &subs)
            })
            .collect()
    });
    Ok(PartitionedSolve { report: SolveReport { continuation: report, state, series }, trace: main.trace })
}

fn drive<T: Transport>(coord: &mut Coordinator<'_, T>, cfg: &HeConfig) -> Result<ContinuationReport, HeError> {
    let r = run_continuation(coord, cfg);
    if r.as_ref().map_or(true, |c| !c.converged) {
        coord.abort();
    }
    r
}

/// Sequential PHE: every subsystem runs on the caller's thread through an inline transport.
pub fn run_phe_single(base: &PartitionedBase, spec: &ContingencySpec, cfg: &HeConfig, opts: &SolveOptions) -> Result<PartitionedSolve, HeError> {
    let split = base.pcase.split_delta(spec);
    let agents = base.agents(&split, cfg, opts.capture);
    let mut coord = Coordinator::new(base, cfg, split.main.clone(), InlineTransport::new(agents), opts);
    let result = drive(&mut coord, cfg);
    let mut out = coord.finish();
    let transport = std::mem::replace(&mut out.transport, InlineTransport::new(Vec::new()));
    finalize(base, result, out, transport.into_agents())
}

/// P2HE: subsystems are spread over `opts.workers` threads and driven by message passing.
pub fn run_p2he_single(base: &PartitionedBase, spec: &ContingencySpec, cfg: &HeConfig, opts: &SolveOptions) -> Result<PartitionedSolve, HeError> {
    let split = base.pcase.split_delta(spec);
    let agents = base.agents(&split, cfg, opts.capture);
    let k = agents.len();
    let w = opts.workers.clamp(1, k.max(1));
    thread::scope(|sc| {
        let (reply_tx, reply_rx) = mpsc::channel();
        let mut groups: Vec<Vec<SubsystemAgent<'_>>> = (0..w).map(|_| Vec::new()).collect();
        for a in agents {
            groups[a.sub() % w].push(a);
        }
        let mut routes: Vec<Option<mpsc::Sender<CoordinatorMessage>>> = vec![None; k];
        let mut handles = Vec::with_capacity(w);
        for group in groups.into_iter().filter(|g| !g.is_empty()) {
            let (tx, rx) = mpsc::channel();
            for a in &group {
                routes[a.sub()] = Some(tx.clone());
            }
            let out = reply_tx.clone();
            handles.push(sc.spawn(move || worker_loop(group, rx, out)));
        }
        drop(reply_tx);
        let transport = ThreadedTransport::new(routes.into_iter().map(Option::unwrap).collect(), reply_rx, opts.timeout);
        let mut coord = Coordinator::new(base, cfg, split.main.clone(), transport, opts);
        let result = drive(&mut coord, cfg);
        let out = coord.finish();
        let mut agents = Vec::with_capacity(k);
        for h in handles {
            agents.extend(h.join().map_err(|_| HeError::Protocol("worker thread panicked".into()))?);
        }
        finalize(base, result, out, agents)
    })
}
