use num_complex::Complex64;

use super::message::{CoordinatorMessage, StageControl};
use crate::he::{evaluate_truncated, EvalMode, HeConfig, HeError, HeSeries, SeriesApproximant, StageState0};
use crate::network::EffectiveY;
use crate::phe::{
    assemble_subsystem_stage, back_solve_internal, boundary_currents, reduce_subsystem_rhs, SubsystemStage, SubsystemView,
};
use crate::sparse::LuSymbolic;

/// Subsystem artifacts at the pre-contingency state, shared by every contingency.
#[derive(Clone, Debug)]
pub struct SubsystemBase {
    pub stage: SubsystemStage,
    pub symbolic: LuSymbolic,
}

/// One subsystem process: owns its internal state and series; talks to the coordinator in messages.
pub struct SubsystemAgent<'a> {
    view: &'a SubsystemView,
    base: &'a SubsystemBase,
    cfg: &'a HeConfig,
    delta_int: Vec<(usize, usize, Complex64)>,
    delta_bnd: Vec<(usize, usize, Complex64)>,
    v: Vec<Complex64>,
    q: Vec<f64>,
    at_base: bool,
    alpha: f64,
    order: usize,
    own: Option<SubsystemStage>,
    stage_delta: (Vec<(usize, usize, Complex64)>, Vec<(usize, usize, Complex64)>),
    series: HeSeries,
    boundary: Vec<Vec<Complex64>>,
    pending: Option<(usize, Vec<f64>)>,
    active: bool,
    approx: Option<SeriesApproximant>,
    captured: Option<Vec<HeSeries>>,
}

impl<'a> SubsystemAgent<'a> {
    pub fn new(
        view: &'a SubsystemView,
        base: &'a SubsystemBase,
        cfg: &'a HeConfig,
        delta_int: Vec<(usize, usize, Complex64)>,
        delta_bnd: Vec<(usize, usize, Complex64)>,
        capture: bool,
    ) -> Self {
        let s0 = &base.stage.system.state0;
        Self {
            view,
            base,
            cfg,
            delta_int,
            delta_bnd,
            v: s0.v.clone(),
            q: s0.q_pv.clone(),
            at_base: true,
            alpha: 0.0,
            order: 0,
            own: None,
            stage_delta: (Vec::new(), Vec::new()),
            series: HeSeries::default(),
            boundary: Vec::new(),
            pending: None,
            active: false,
            approx: None,
            captured: capture.then(Vec::new),
        }
    }

    pub fn sub(&self) -> usize {
        self.view.index
    }

    /// Internal voltages and PV reactive injections.
    pub fn state(&self) -> (Vec<Complex64>, Vec<f64>) {
        (self.v.clone(), self.q.clone())
    }

    pub fn take_captured(&mut self) -> Option<Vec<HeSeries>> {
        self.captured.take()
    }

    pub fn handle(&mut self, msg: CoordinatorMessage) -> Vec<CoordinatorMessage> {
        let sub = self.sub();
        let out = match msg {
            CoordinatorMessage::StageControl { control, .. } => match control {
                StageControl::Begin { alpha_done, v_b0, order } => self.begin(alpha_done, v_b0, order),
                StageControl::Probe { t, mode, alpha, v_b } => self.probe(t, mode, alpha, &v_b).map(|m| vec![m]),
                StageControl::Advance { t, mode } => self.advance(t, mode).map(|_| vec![]),
                StageControl::Abort => {
                    self.active = false;
                    self.pending = None;
                    Ok(vec![])
                }
                StageControl::Finish => Ok(vec![]),
            },
            CoordinatorMessage::BoundaryCoeffs { order, c_sb, d_sb, .. } => self.boundary_coeffs(order, &c_sb, &d_sb),
            other => Err(HeError::Protocol(format!("worker received {}", other.kind()))),
        };
        out.unwrap_or_else(|error| {
            self.active = false;
            self.pending = None;
            vec![CoordinatorMessage::Failure { sub, error }]
        })
    }

    fn stage(&self) -> &SubsystemStage {
        self.own.as_ref().unwrap_or(&self.base.stage)
    }

    fn begin(&mut self, alpha_done: f64, v_b0: Vec<Complex64>, order: usize) -> Result<Vec<CoordinatorMessage>, HeError> {
        if v_b0.len() != self.view.n_boundary() || order == 0 {
            return Err(HeError::Protocol("malformed stage start".into()));
        }
        self.alpha = alpha_done;
        self.order = order;
        if !(self.at_base && alpha_done == 0.0) {
            let s0 = StageState0::from_voltages(self.v.clone(), self.q.clone());
            self.own = Some(assemble_subsystem_stage(
                self.view,
                &self.delta_int,
                &self.delta_bnd,
                alpha_done,
                s0,
                &v_b0,
                Some(&self.base.symbolic),
            )?);
        }
        let block = &self.view.block;
        let start = block.mismatch(&EffectiveY::new(&block.y, &self.delta_int, alpha_done), &self.v, &self.q, &v_b0, &[]);
        let rest = 1.0 - alpha_done;
        let scale = |d: &[(usize, usize, Complex64)]| d.iter().map(|&(i, j, y)| (i, j, y * rest)).collect::<Vec<_>>();
        self.stage_delta = (scale(&self.delta_int), scale(&self.delta_bnd));
        self.series = self.stage().system.series0();
        self.boundary = vec![v_b0];
        self.approx = None;
        self.active = true;
        let (r_s, u) = self.reduce(1)?;
        self.pending = Some((1, u));
        let st = self.stage();
        Ok(vec![
            CoordinatorMessage::SchurBlock { sub: self.sub(), l_s: st.l_s.clone(), i_b0: st.i_b0.clone(), start_mismatch: start },
            CoordinatorMessage::ReducedRhs { sub: self.sub(), order: 1, r_s },
        ])
    }

    fn reduce(&self, order: usize) -> Result<(Vec<f64>, Vec<f64>), HeError> {
        reduce_subsystem_rhs(
            self.view,
            self.stage(),
            order,
            &self.series,
            &self.boundary,
            &self.stage_delta.0,
            &self.stage_delta.1,
            self.cfg.residual_correction,
        )
    }

    fn boundary_coeffs(&mut self, order: usize, c: &[f64], d: &[f64]) -> Result<Vec<CoordinatorMessage>, HeError> {
        let u = match self.pending.take() {
            Some((n, u)) if n == order && self.active => u,
            Some((n, _)) => return Err(HeError::Protocol(format!("boundary order {order} received while expecting {n}"))),
            None => return Err(HeError::Protocol(format!("boundary order {order} received outside a stage"))),
        };
        let nb = self.view.n_boundary();
        if c.len() != nb || d.len() != nb {
            return Err(HeError::Protocol("boundary coefficient size".into()));
        }
        let mut x_sb = c.to_vec();
        x_sb.extend_from_slice(d);
        let own = self.own.as_ref().unwrap_or(&self.base.stage);
        back_solve_internal(self.view, own, &u, &x_sb, &mut self.series);
        self.boundary.push(c.iter().zip(d).map(|(&a, &b)| Complex64::new(a, b)).collect());
        if order < self.order {
            let (r_s, u) = self.reduce(order + 1)?;
            self.pending = Some((order + 1, u));
            Ok(vec![CoordinatorMessage::ReducedRhs { sub: self.sub(), order: order + 1, r_s }])
        } else {
            if let Some(cap) = self.captured.as_mut() {
                cap.push(self.series.clone());
            }
            Ok(vec![])
        }
    }

    fn ready(&self) -> Result<(), HeError> {
        if !self.active || self.pending.is_some() || self.series.order() != self.order {
            return Err(HeError::Protocol("stage series incomplete".into()));
        }
        Ok(())
    }

    fn evaluate(&mut self, t: f64, mode: EvalMode) -> Result<(Vec<Complex64>, Vec<f64>), HeError> {
        self.ready()?;
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

    fn probe(&mut self, t: f64, mode: EvalMode, alpha: f64, v_b: &[Complex64]) -> Result<CoordinatorMessage, HeError> {
        let (v, q) = self.evaluate(t, mode)?;
        let block = &self.view.block;
        let mismatch = block.mismatch(&EffectiveY::new(&block.y, &self.delta_int, alpha), &v, &q, v_b, &[]);
        let currents = boundary_currents(&self.view.y_bnd, &self.delta_bnd, alpha, &v, v_b);
        Ok(CoordinatorMessage::MismatchReport { sub: self.sub(), mismatch, currents })
    }

    fn advance(&mut self, t: f64, mode: EvalMode) -> Result<(), HeError> {
        let (v, q) = self.evaluate(t, mode)?;
        self.v = v;
        self.q = q;
        self.at_base = false;
        Ok(())
    }
}
