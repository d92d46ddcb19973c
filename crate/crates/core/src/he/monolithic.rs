use num_complex::Complex64;

use super::continuation::{run_continuation, ContinuationReport, StageEngine};
use super::eval::{evaluate_truncated, EvalMode, SeriesApproximant};
use super::series::HeSeries;
use super::stage::{EmbeddedBlock, ExtVoltages, StageState0, StageSystem};
use super::{HeConfig, HeError};
use crate::network::{ContingencySpec, EffectiveY, PfState, PowerFlowModel};
use crate::sparse::{CscMatrix, LuSymbolic};

/// Stage data at the pre-contingency state, shared by every contingency of one case.
#[derive(Clone, Debug)]
pub struct BaseStage {
    pub block: EmbeddedBlock,
    pub symbolic: LuSymbolic,
    pub state: PfState,
    pub system: StageSystem,
    pub v_slack: Vec<Complex64>,
}

impl BaseStage {
    pub fn new(model: &PowerFlowModel, state: PfState) -> Result<Self, HeError> {
        let block = EmbeddedBlock::from_model(model);
        let n = block.n();
        if state.v.len() != model.n_total() || state.q_pv.len() != model.n_pv() {
            return Err(HeError::InvalidState("state dimension does not match the case".into()));
        }
        let s0 = StageState0::from_voltages(state.v[..n].to_vec(), state.q_pv.clone());
        let trip = block.lhs_triplets(&block.y, &s0);
        let symbolic = LuSymbolic::analyze(&CscMatrix::from_triplets(block.dim(), block.dim(), &trip))
            .map_err(|e| HeError::Solver(e.to_string()))?;
        let v_slack = state.v[n..].to_vec();
        let system = StageSystem::assemble(&block, &block.y, s0, &v_slack, &[], &[], Some(&symbolic))?;
        Ok(Self { block, symbolic, state, system, v_slack })
    }
}

/// Monolithic HE stage engine for one contingency.
pub struct MonolithicEngine<'a> {
    base: &'a BaseStage,
    cfg: &'a HeConfig,
    delta: Vec<(usize, usize, Complex64)>,
    v: Vec<Complex64>,
    q: Vec<f64>,
    alpha: f64,
    at_base: bool,
    own: Option<StageSystem>,
    series: HeSeries,
    approx: Option<SeriesApproximant>,
    captured: Option<Vec<HeSeries>>,
}

impl<'a> MonolithicEngine<'a> {
    pub fn new(base: &'a BaseStage, delta_y: &[(usize, usize, Complex64)], cfg: &'a HeConfig) -> Self {
        let n = base.block.n();
        Self {
            base,
            cfg,
            delta: base.block.restrict_delta(delta_y, 1.0),
            v: base.state.v[..n].to_vec(),
            q: base.state.q_pv.clone(),
            alpha: 0.0,
            at_base: true,
            own: None,
            series: HeSeries::default(),
            approx: None,
            captured: None,
        }
    }

    /// Starts the first stage from `(v, q)` instead of the base state.
    pub fn starting_from(mut self, v: Vec<Complex64>, q: Vec<f64>) -> Self {
        self.v = v;
        self.q = q;
        self.at_base = false;
        self
    }

    /// Series of the current stage.
    pub fn series(&self) -> &HeSeries {
        &self.series
    }

    /// Keeps a copy of every stage series.
    pub fn capture_series(mut self) -> Self {
        self.captured = Some(Vec::new());
        self
    }

    pub fn take_captured(&mut self) -> Option<Vec<HeSeries>> {
        self.captured.take()
    }

    pub fn state(&self) -> PfState {
        let mut v = self.v.clone();
        v.extend_from_slice(&self.base.v_slack);
        PfState { v, q_pv: self.q.clone() }
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
}

impl StageEngine for MonolithicEngine<'_> {
    fn begin_stage(&mut self, alpha_done: f64) -> Result<f64, HeError> {
        let block = &self.base.block;
        self.alpha = alpha_done;
        if !self.at_base {
            let y0 = EffectiveY::new(&block.y, &self.delta, alpha_done).materialize();
            let s0 = StageState0::from_voltages(self.v.clone(), self.q.clone());
            self.own = Some(StageSystem::assemble(
                block,
                &y0,
                s0,
                &self.base.v_slack,
                &[],
                &[],
                Some(&self.base.symbolic),
            )?);
        }
        let start = block.mismatch(
            &EffectiveY::new(&block.y, &self.delta, alpha_done),
            &self.v,
            &self.q,
            &self.base.v_slack,
            &[],
        );
        let system = self.own.as_ref().unwrap_or(&self.base.system);
        let stage_delta: Vec<_> = self.delta.iter().map(|&(i, j, d)| (i, j, d * (1.0 - alpha_done))).collect();
        let ext = ExtVoltages::Fixed(&self.base.v_slack);
        let mut series = system.series0();
        for k in 1..=self.cfg.order {
            system.solve_order(block, k, &mut series, &ext, &stage_delta, self.cfg.residual_correction)?;
        }
        if let Some(c) = self.captured.as_mut() {
            c.push(series.clone());
        }
        self.series = series;
        self.approx = None;
        Ok(start)
    }

    fn probe(&mut self, t: f64, mode: EvalMode) -> Result<f64, HeError> {
        let (v, q) = self.evaluate(t, mode)?;
        let a = self.global_alpha(t);
        let block = &self.base.block;
        Ok(block.mismatch(&EffectiveY::new(&block.y, &self.delta, a), &v, &q, &self.base.v_slack, &[]))
    }

    fn advance(&mut self, t: f64, mode: EvalMode) -> Result<(), HeError> {
        let (v, q) = self.evaluate(t, mode)?;
        self.v = v;
        self.q = q;
        self.at_base = false;
        Ok(())
    }
}

/// Result of a multi-stage solve.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub continuation: ContinuationReport,
    /// Present only for converged solves.
    pub state: Option<PfState>,
    pub series: Option<Vec<HeSeries>>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.continuation.converged
    }
}

fn run(engine: &mut MonolithicEngine<'_>, cfg: &HeConfig) -> Result<SolveReport, HeError> {
    let report = run_continuation(engine, cfg)?;
    let state = report.converged.then(|| engine.state());
    Ok(SolveReport { continuation: report, state, series: engine.take_captured() })
}

/// Solves the post-contingency state by multi-stage HE from the base stage.
pub fn multi_stage_solve(base: &BaseStage, spec: &ContingencySpec, cfg: &HeConfig, capture: bool) -> Result<SolveReport, HeError> {
    let mut engine = MonolithicEngine::new(base, &spec.delta_y, cfg);
    if capture {
        engine = engine.capture_series();
    }
    run(&mut engine, cfg)
}

/// Multi-stage HE from an arbitrary solved `start` state of `model` under admittance change `delta_y`.
pub fn multi_stage_solve_from(
    model: &PowerFlowModel,
    start: PfState,
    delta_y: &[(usize, usize, Complex64)],
    cfg: &HeConfig,
) -> Result<SolveReport, HeError> {
    let base = match BaseStage::new(model, start) {
        Ok(b) => b,
        Err(e) if e.is_numerical() => {
            return Ok(SolveReport {
                continuation: ContinuationReport {
                    converged: false,
                    reached_alpha: 0.0,
                    final_mismatch: f64::INFINITY,
                    stages: Vec::new(),
                    reason: Some(e.to_string()),
                },
                state: None,
                series: None,
            })
        }
        Err(e) => return Err(e),
    };
    let mut engine = MonolithicEngine::new(&base, delta_y, cfg);
    run(&mut engine, cfg)
}
