use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::network::{EffectiveY, PfState, PowerFlowModel};
use crate::sparse::{CscMatrix, CsrMatrix, LuSymbolic, SparseLu};

/// A square nonlinear system for Newton iteration.
pub trait NewtonSystem {
    fn residual(&self, x: &[f64]) -> Vec<f64>;
    /// Returns `J(x)^-1 f`.
    fn newton_direction(&mut self, x: &[f64], f: &[f64]) -> Result<Vec<f64>, String>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub residual_norm: f64,
    pub failure: Option<String>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| if x.is_nan() { f64::INFINITY } else { m.max(x.abs()) })
}

/// Iterates `x <- x - mu * J^-1 g(x)` until `|g|_inf <= tol` or `max_iter` steps.
pub fn damped_newton<S: NewtonSystem>(sys: &mut S, x0: &[f64], mu: f64, tol: f64, max_iter: usize) -> NewtonOutcome {
    assert!(mu > 0.0 && mu <= 1.0, "damping factor must lie in (0, 1]");
    let mut x = x0.to_vec();
    let mut f = sys.residual(&x);
    let mut norm = inf_norm(&f);
    for it in 0..max_iter {
        if norm <= tol {
            return NewtonOutcome { x, iterations: it, converged: true, residual_norm: norm, failure: None };
        }
        if !norm.is_finite() {
            return NewtonOutcome { x, iterations: it, converged: false, residual_norm: norm, failure: Some("residual not finite".into()) };
        }
        let dx = match sys.newton_direction(&x, &f) {
            Ok(d) => d,
            Err(e) => return NewtonOutcome { x, iterations: it, converged: false, residual_norm: norm, failure: Some(e) },
        };
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi -= mu * di;
        }
        f = sys.residual(&x);
        norm = inf_norm(&f);
    }
    let converged = norm <= tol;
    NewtonOutcome {
        x,
        iterations: max_iter,
        converged,
        residual_norm: norm,
        failure: (!converged).then(|| "iteration limit".to_string()),
    }
}

/// Polar-coordinate power-flow equations: unknowns are all non-slack angles then PQ magnitudes.
pub struct PolarPowerFlow<'a> {
    model: &'a PowerFlowModel,
    y: CsrMatrix<Complex64>,
    symbolic: Option<LuSymbolic>,
}

impl<'a> PolarPowerFlow<'a> {
    pub fn new(model: &'a PowerFlowModel, y: &EffectiveY<'_>) -> Self {
        Self { model, y: y.materialize(), symbolic: None }
    }

    pub fn dim(&self) -> usize {
        self.model.n() + self.model.n_pq()
    }

    pub fn voltages(&self, x: &[f64]) -> Vec<Complex64> {
        let m = self.model;
        let (n, npq) = (m.n(), m.n_pq());
        let mut v = Vec::with_capacity(m.n_total());
        for i in 0..n {
            let mag = if i < npq { x[n + i] } else { m.v_sp[i - npq] };
            v.push(Complex64::from_polar(mag, x[i]));
        }
        v.extend_from_slice(&m.v_slack);
        v
    }

    pub fn unknowns(&self, v: &[Complex64]) -> Vec<f64> {
        let (n, npq) = (self.model.n(), self.model.n_pq());
        let mut x: Vec<f64> = v[..n].iter().map(|z| z.arg()).collect();
        x.extend(v[..npq].iter().map(|z| z.norm()));
        x
    }

    fn currents(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut cur = self.y.mul_vec(v);
        for (c, il) in cur.iter_mut().zip(&self.model.i_load) {
            *c += il;
        }
        cur
    }

    pub fn state(&self, x: &[f64]) -> PfState {
        let v = self.voltages(x);
        let cur = self.currents(&v);
        let m = self.model;
        let q_pv = (m.n_pq()..m.n()).map(|i| (v[i] * cur[i].conj()).im).collect();
        PfState { v, q_pv }
    }

    fn jacobian(&self, v: &[Complex64]) -> CscMatrix {
        let m = self.model;
        let (n, npq) = (m.n(), m.n_pq());
        let cur = self.currents(v);
        let j = Complex64::new(0.0, 1.0);
        let mut t = Vec::with_capacity(4 * self.y.nnz());
        for i in 0..n {
            for (k, yik) in self.y.row(i) {
                if k >= n {
                    continue;
                }
                let vn_k = v[k] / v[k].norm();
                let mut ds_da = -j * v[i] * (yik * v[k]).conj();
                let mut ds_dm = v[i] * (yik * vn_k).conj();
                if i == k {
                    ds_da += j * v[i] * cur[i].conj();
                    ds_dm += cur[i].conj() * vn_k;
                }
                t.push((i, k, ds_da.re));
                if i < npq {
                    t.push((n + i, k, ds_da.im));
                }
                if k < npq {
                    t.push((i, n + k, ds_dm.re));
                    if i < npq {
                        t.push((n + i, n + k, ds_dm.im));
                    }
                }
            }
        }
        let d = self.dim();
        CscMatrix::from_triplets(d, d, &t)
    }
}

impl NewtonSystem for PolarPowerFlow<'_> {
    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let m = self.model;
        let (n, npq) = (m.n(), m.n_pq());
        let v = self.voltages(x);
        let cur = self.currents(&v);
        let mut f = vec![0.0; self.dim()];
        for i in 0..n {
            let d = v[i] * cur[i].conj() - m.s_inj[i];
            f[i] = d.re;
            if i < npq {
                f[n + i] = d.im;
            }
        }
        f
    }

    fn newton_direction(&mut self, x: &[f64], f: &[f64]) -> Result<Vec<f64>, String> {
        let jac = self.jacobian(&self.voltages(x));
        if self.symbolic.is_none() {
            self.symbolic = Some(LuSymbolic::analyze(&jac).map_err(|e| e.to_string())?);
        }
        let lu = SparseLu::factor_with(self.symbolic.as_ref().unwrap(), &jac).map_err(|e| format!("Jacobian: {e}"))?;
        Ok(lu.solve(f))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NrStart {
    FlatStart,
    BaseState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NrConfig {
    pub mu: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub start: NrStart,
}

impl Default for NrConfig {
    fn default() -> Self {
        Self { mu: 1.0, max_iter: 50, tol: 1e-8, start: NrStart::FlatStart }
    }
}

#[derive(Clone, Debug)]
pub struct NrResult {
    pub state: Option<PfState>,
    pub iterations: usize,
    pub mismatch: f64,
    pub failure: Option<String>,
}

impl NrResult {
    pub fn converged(&self) -> bool {
        self.state.is_some()
    }
}

/// Damped NR from an explicit initial voltage vector.
pub fn nr_solve_from(model: &PowerFlowModel, y: &EffectiveY<'_>, v0: &[Complex64], cfg: &NrConfig) -> NrResult {
    let mut sys = PolarPowerFlow::new(model, y);
    let x0 = sys.unknowns(v0);
    let out = damped_newton(&mut sys, &x0, cfg.mu, cfg.tol, cfg.max_iter);
    if out.converged {
        let state = sys.state(&out.x);
        NrResult { mismatch: model.mismatch(y, &state), state: Some(state), iterations: out.iterations, failure: None }
    } else {
        NrResult { state: None, iterations: out.iterations, mismatch: out.residual_norm, failure: out.failure }
    }
}

/// Damped NR with the configured start (`base` is required for `BaseState`).
pub fn nr_solve(model: &PowerFlowModel, y: &EffectiveY<'_>, cfg: &NrConfig, base: Option<&PfState>) -> NrResult {
    let v0 = match (cfg.start, base) {
        (NrStart::BaseState, Some(b)) => b.v.clone(),
        _ => model.flat_state().v,
    };
    nr_solve_from(model, y, &v0, cfg)
}

/// Pre-contingency state solved to near machine precision.
pub fn solve_base_state(model: &PowerFlowModel) -> Result<PfState, String> {
    let y = EffectiveY::new(&model.y, &[], 0.0);
    let cfg = NrConfig { mu: 1.0, max_iter: 40, tol: 1e-11, start: NrStart::FlatStart };
    let mut r = nr_solve(model, &y, &cfg, None);
    if r.state.is_none() {
        return Err(format!("base case power flow did not converge: {}", r.failure.unwrap_or_default()));
    }
    let mut sys = PolarPowerFlow::new(model, &y);
    let mut x = sys.unknowns(&r.state.take().unwrap().v);
    let mut best = model.mismatch(&y, &sys.state(&x));
    for _ in 0..3 {
        let f = sys.residual(&x);
        let dx = sys.newton_direction(&x, &f)?;
        let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a - d).collect();
        let m = model.mismatch(&y, &sys.state(&trial));
        if m < best {
            best = m;
            x = trial;
        } else {
            break;
        }
    }
    Ok(sys.state(&x))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Square;

    impl NewtonSystem for Square {
        fn residual(&self, x: &[f64]) -> Vec<f64> {
            vec![x[0] * x[0] - 4.0]
        }
        fn newton_direction(&mut self, x: &[f64], f: &[f64]) -> Result<Vec<f64>, String> {
            Ok(vec![f[0] / (2.0 * x[0])])
        }
    }

    #[test]
    fn one_step_undamped() {
        let out = damped_newton(&mut Square, &[3.0], 1.0, 0.0, 1);
        assert!((out.x[0] - 13.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn one_step_damped() {
        let out = damped_newton(&mut Square, &[3.0], 0.5, 0.0, 1);
        assert!((out.x[0] - (3.0 - 0.5 * 5.0 / 6.0)).abs() < 1e-15);
    }

    #[test]
    fn step_length_linear_in_mu() {
        let full = damped_newton(&mut Square, &[3.0], 1.0, 0.0, 1).x[0] - 3.0;
        for mu in [0.1, 0.25, 0.7] {
            let step = damped_newton(&mut Square, &[3.0], mu, 0.0, 1).x[0] - 3.0;
            assert!((step - mu * full).abs() < 1e-15);
        }
    }

    #[test]
    fn converges_to_root() {
        let out = damped_newton(&mut Square, &[3.0], 1.0, 1e-12, 20);
        assert!(out.converged);
        assert!((out.x[0] - 2.0).abs() < 1e-12);
    }
}

#[cfg(test)]
mod case_tests {
    use super::*;
    use crate::network::parse_case;

    #[test]
    fn case118_flat_start_converges() {
        let case = parse_case(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/case118.m")).unwrap();
        let model = PowerFlowModel::new(&case).unwrap();
        let y = EffectiveY::new(&model.y, &[], 0.0);
        let r = nr_solve(&model, &y, &NrConfig::default(), None);
        let state = r.state.expect("converged");
        assert!(model.mismatch(&y, &state) <= 1e-8);
        assert!(r.iterations <= 10);
        let damped = nr_solve(&model, &y, &NrConfig { mu: 0.5, max_iter: 100, ..NrConfig::default() }, None);
        assert!(damped.iterations > r.iterations);
        assert!(damped.state.unwrap().max_voltage_diff(&state) < 1e-7);
    }

    #[test]
    fn base_state_is_polished() {
        let case = parse_case(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/case118.m")).unwrap();
        let model = PowerFlowModel::new(&case).unwrap();
        let s = solve_base_state(&model).unwrap();
        assert!(model.mismatch(&EffectiveY::new(&model.y, &[], 0.0), &s) < 1e-11);
    }
}
