use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::admittance::{build_admittance, BusOrdering, EffectiveY};
use super::case::{BusKind, GridCase};
use super::NetworkError;
use crate::sparse::CsrMatrix;

/// Power-flow data of a case in internal bus order.
#[derive(Clone, Debug)]
pub struct PowerFlowModel {
    pub ordering: BusOrdering,
    /// Bus id of each internal index.
    pub ids: Vec<usize>,
    /// Full admittance matrix (non-slack block plus slack rows and columns).
    pub y: CsrMatrix<Complex64>,
    /// Constant-power injection of each non-slack bus; the reactive part is unused at PV buses.
    pub s_inj: Vec<Complex64>,
    /// Constant-current draw of each non-slack bus.
    pub i_load: Vec<Complex64>,
    /// Voltage magnitude setpoint of each PV bus (indexed from 0 within the PV group).
    pub v_sp: Vec<f64>,
    /// Fixed phasor of each slack bus.
    pub v_slack: Vec<Complex64>,
}

impl PowerFlowModel {
    pub fn new(case: &GridCase) -> Result<Self, NetworkError> {
        let adm = build_admittance(case)?;
        let ord = adm.ordering;
        let n = ord.n();
        let mut s_inj = Vec::with_capacity(n);
        let mut i_load = Vec::with_capacity(n);
        let mut v_sp = Vec::with_capacity(ord.n_pv);
        let mut v_slack = Vec::with_capacity(ord.n_slack);
        let mut ids = Vec::with_capacity(ord.len());
        for (i, &k) in ord.case_pos.iter().enumerate() {
            let b = &case.buses[k];
            ids.push(b.id);
            if i < n {
                s_inj.push(b.s_inj());
                i_load.push(b.current_draw());
                if b.kind == BusKind::PV {
                    v_sp.push(b.v_sp);
                }
            } else {
                v_slack.push(Complex64::from_polar(b.v_sp, b.v_angle_sp));
            }
        }
        Ok(Self { ordering: ord, ids, y: adm.ybus, s_inj, i_load, v_sp, v_slack })
    }

    pub fn n_pq(&self) -> usize {
        self.ordering.n_pq
    }

    pub fn n_pv(&self) -> usize {
        self.ordering.n_pv
    }

    /// Number of non-slack buses.
    pub fn n(&self) -> usize {
        self.ordering.n()
    }

    pub fn n_total(&self) -> usize {
        self.ids.len()
    }

    pub fn is_pv(&self, i: usize) -> bool {
        i >= self.n_pq() && i < self.n()
    }

    /// Flat start: 1 pu at PQ buses, setpoint magnitude at PV buses, all at the (first) slack angle.
    pub fn flat_state(&self) -> PfState {
        let angle = self.v_slack.first().map_or(0.0, |v| v.arg());
        let mut v = Vec::with_capacity(self.n_total());
        for i in 0..self.n() {
            let mag = if self.is_pv(i) { self.v_sp[i - self.n_pq()] } else { 1.0 };
            v.push(Complex64::from_polar(mag, angle));
        }
        v.extend_from_slice(&self.v_slack);
        let mut s = PfState { v, q_pv: vec![0.0; self.n_pv()] };
        s.q_pv = self.pv_reactive(&EffectiveY::new(&self.y, &[], 0.0), &s.v);
        s
    }

    /// Reactive injection each PV bus needs to balance its current at voltages `v`.
    pub fn pv_reactive(&self, y: &EffectiveY<'_>, v: &[Complex64]) -> Vec<f64> {
        let cur = y.currents(v);
        (self.n_pq()..self.n()).map(|i| (v[i] * (cur[i] + self.i_load[i]).conj()).im).collect()
    }

    /// Index of a bus id in internal order.
    pub fn index_of(&self, id: usize) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    /// Max power-balance and PV-magnitude residual of `state` under admittance `y`.
    pub fn mismatch(&self, y: &EffectiveY<'_>, state: &PfState) -> f64 {
        let v = &state.v;
        let cur = y.currents(v);
        let mut m = 0.0f64;
        for i in 0..self.n() {
            let s = v[i] * (cur[i] + self.i_load[i]).conj();
            let spec = if self.is_pv(i) {
                let k = i - self.n_pq();
                m = m.max((v[i].norm() - self.v_sp[k]).abs());
                Complex64::new(self.s_inj[i].re, state.q_pv[k])
            } else {
                self.s_inj[i]
            };
            let d = s - spec;
            m = m.max(d.re.abs()).max(d.im.abs());
        }
        if !m.is_finite() {
            return f64::INFINITY;
        }
        m
    }
}

/// Bus voltages in internal order (slack buses last) plus PV reactive injections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PfState {
    pub v: Vec<Complex64>,
    pub q_pv: Vec<f64>,
}

impl PfState {
    pub fn max_voltage_diff(&self, other: &PfState) -> f64 {
        self.v.iter().zip(&other.v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}
