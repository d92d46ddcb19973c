use num_complex::Complex64;

use super::series::HeSeries;
use super::HeError;
use crate::network::{EffectiveY, PowerFlowModel};
use crate::sparse::{CscMatrix, CsrMatrix, LuSymbolic, SparseLu};

/// Unknown buses of one embedded system (PQ first, then PV) and their admittance rows.
///
/// Columns of `y` are the unknown buses followed by `n_ext` external buses whose voltages
/// are supplied from outside (slack buses, or boundary buses for a subsystem).
#[derive(Clone, Debug)]
pub struct EmbeddedBlock {
    pub n_pq: usize,
    pub n_pv: usize,
    pub n_ext: usize,
    pub s_inj: Vec<Complex64>,
    pub i_load: Vec<Complex64>,
    pub v_sp: Vec<f64>,
    pub y: CsrMatrix<Complex64>,
}

impl EmbeddedBlock {
    /// All non-slack buses of a model, with slack buses as externals.
    pub fn from_model(model: &PowerFlowModel) -> Self {
        let n = model.n();
        let rows: Vec<usize> = (0..n).collect();
        let col_map: Vec<Option<usize>> = (0..model.n_total()).map(Some).collect();
        Self {
            n_pq: model.n_pq(),
            n_pv: model.n_pv(),
            n_ext: model.n_total() - n,
            s_inj: model.s_inj.clone(),
            i_load: model.i_load.clone(),
            v_sp: model.v_sp.clone(),
            y: model.y.select(&rows, &col_map, model.n_total()),
        }
    }

    pub fn n(&self) -> usize {
        self.n_pq + self.n_pv
    }

    /// Size of the per-order unknown vector `[C; D; E; F; Q_PV]`.
    pub fn dim(&self) -> usize {
        4 * self.n() + self.n_pv
    }

    pub fn is_pv(&self, i: usize) -> bool {
        i >= self.n_pq && i < self.n()
    }

    /// Delta entries that belong to the block's rows, scaled.
    pub fn restrict_delta(&self, delta: &[(usize, usize, Complex64)], scale: f64) -> Vec<(usize, usize, Complex64)> {
        delta.iter().filter(|e| e.0 < self.n()).map(|&(i, j, d)| (i, j, d * scale)).collect()
    }

    fn q_at(&self, i: usize, q_pv: &[f64]) -> f64 {
        if self.is_pv(i) {
            q_pv[i - self.n_pq]
        } else {
            self.s_inj[i].im
        }
    }

    /// Embedded residual `R(x)` for the given admittance; `extra_current` is drawn in addition to `i_load`.
    pub fn residual(
        &self,
        y: &EffectiveY<'_>,
        v: &[Complex64],
        w: &[Complex64],
        q_pv: &[f64],
        v_ext: &[Complex64],
        extra_current: &[Complex64],
    ) -> Vec<f64> {
        let n = self.n();
        let mut full = v.to_vec();
        full.extend_from_slice(v_ext);
        let cur = y.currents(&full);
        let mut r = vec![0.0; self.dim()];
        for i in 0..n {
            let s = Complex64::new(self.s_inj[i].re, -self.q_at(i, q_pv));
            let mut t = s * w[i].conj() - cur[i] - self.i_load[i];
            if let Some(e) = extra_current.get(i) {
                t -= e;
            }
            r[i] = t.re;
            r[n + i] = t.im;
            let vw = v[i] * w[i] - 1.0;
            r[2 * n + i] = vw.re;
            r[3 * n + i] = vw.im;
        }
        for k in 0..self.n_pv {
            let i = self.n_pq + k;
            r[4 * n + k] = 0.5 * (v[i].norm_sqr() - self.v_sp[k] * self.v_sp[k]);
        }
        r
    }

    /// Max power-balance and PV-magnitude mismatch.
    pub fn mismatch(
        &self,
        y: &EffectiveY<'_>,
        v: &[Complex64],
        q_pv: &[f64],
        v_ext: &[Complex64],
        extra_current: &[Complex64],
    ) -> f64 {
        let mut full = v.to_vec();
        full.extend_from_slice(v_ext);
        let cur = y.currents(&full);
        let mut m = 0.0f64;
        for i in 0..self.n() {
            let mut c = cur[i] + self.i_load[i];
            if let Some(e) = extra_current.get(i) {
                c += e;
            }
            let s = v[i] * c.conj();
            let d = s - Complex64::new(self.s_inj[i].re, self.q_at(i, q_pv));
            m = m.max(d.re.abs()).max(d.im.abs());
            if self.is_pv(i) {
                m = m.max((v[i].norm() - self.v_sp[i - self.n_pq]).abs());
            }
        }
        if m.is_nan() {
            f64::INFINITY
        } else {
            m
        }
    }

    /// Triplets of the stage matrix `L` at `state0` with admittance `y_eff0` (same shape as `y`).
    ///
    /// Every structural entry is emitted, zero or not, so the pattern only depends on `y`.
    pub fn lhs_triplets(&self, y_eff0: &CsrMatrix<Complex64>, s0: &StageState0) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut t = Vec::with_capacity(4 * y_eff0.nnz() + 14 * n);
        for i in 0..n {
            for (j, yij) in y_eff0.row(i) {
                if j >= n {
                    continue;
                }
                let (g, b) = (yij.re, yij.im);
                t.push((i, j, -g));
                t.push((i, n + j, b));
                t.push((n + i, j, -b));
                t.push((n + i, n + j, -g));
            }
        }
        for i in 0..n {
            let p = self.s_inj[i].re;
            let q0 = self.q_at(i, &s0.q_pv);
            let (c0, d0) = (s0.v[i].re, s0.v[i].im);
            let (e0, f0) = (s0.w[i].re, s0.w[i].im);
            t.push((i, 2 * n + i, p));
            t.push((i, 3 * n + i, -q0));
            t.push((n + i, 2 * n + i, -q0));
            t.push((n + i, 3 * n + i, -p));
            t.push((2 * n + i, i, e0));
            t.push((2 * n + i, n + i, -f0));
            t.push((2 * n + i, 2 * n + i, c0));
            t.push((2 * n + i, 3 * n + i, -d0));
            t.push((3 * n + i, i, f0));
            t.push((3 * n + i, n + i, e0));
            t.push((3 * n + i, 2 * n + i, d0));
            t.push((3 * n + i, 3 * n + i, c0));
            if self.is_pv(i) {
                let k = i - self.n_pq;
                t.push((i, 4 * n + k, -f0));
                t.push((n + i, 4 * n + k, -e0));
                t.push((4 * n + k, i, c0));
                t.push((4 * n + k, n + i, d0));
            }
        }
        t
    }

    /// Coupling of the power-balance rows to external-bus `(C, D)` columns, as triplets
    /// `(row, col)` with `col < 2 * n_ext` (C columns first).
    pub fn ext_coupling(&self, y_eff0: &CsrMatrix<Complex64>) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let ne = self.n_ext;
        let mut t = Vec::new();
        for i in 0..n {
            for (j, yij) in y_eff0.row(i) {
                if j < n {
                    continue;
                }
                let e = j - n;
                t.push((i, e, -yij.re));
                t.push((i, ne + e, yij.im));
                t.push((n + i, e, -yij.im));
                t.push((n + i, ne + e, -yij.re));
            }
        }
        t
    }

    /// Right-hand side of order `n >= 1`.
    ///
    /// `delta` holds the stage admittance change restricted to the block rows; `ext` gives
    /// external voltages per order; `r0` is subtracted at order 1 when present.
    pub fn compute_rhs(
        &self,
        order: usize,
        series: &HeSeries,
        ext: &ExtVoltages<'_>,
        delta: &[(usize, usize, Complex64)],
        r0: Option<&[f64]>,
    ) -> Result<Vec<f64>, HeError> {
        if order == 0 || series.order() + 1 < order {
            return Err(HeError::MissingOrder { requested: order, available: series.order() });
        }
        let n = self.n();
        let mut rhs = vec![0.0; self.dim()];
        let vprev = &series.v[order - 1];
        let ext_prev = ext.at(order - 1);
        let mut di = vec![Complex64::new(0.0, 0.0); n];
        for &(i, j, d) in delta {
            let vj = if j < n {
                vprev[j]
            } else {
                match ext_prev {
                    Some(e) => e[j - n],
                    None => continue,
                }
            };
            di[i] += d * vj;
        }
        for i in 0..n {
            let mut t = di[i];
            if self.is_pv(i) {
                let k = i - self.n_pq;
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 1..order {
                    acc += series.w[order - m][i].conj() * series.q[m][k];
                }
                t += Complex64::new(0.0, 1.0) * acc;
            }
            rhs[i] = t.re;
            rhs[n + i] = t.im;
            let mut s = Complex64::new(0.0, 0.0);
            for m in 1..order {
                s += series.w[m][i] * series.v[order - m][i];
            }
            rhs[2 * n + i] = -s.re;
            rhs[3 * n + i] = -s.im;
        }
        for k in 0..self.n_pv {
            let i = self.n_pq + k;
            let mut s = 0.0;
            for m in 1..order {
                let (a, b) = (series.v[m][i], series.v[order - m][i]);
                s += a.re * b.re + a.im * b.im;
            }
            rhs[4 * n + k] = -0.5 * s;
        }
        if order == 1 {
            if let Some(r0) = r0 {
                for (x, r) in rhs.iter_mut().zip(r0) {
                    *x -= r;
                }
            }
        }
        Ok(rhs)
    }

    /// Splits a solution vector into `(V, W, Q_PV)` coefficients.
    pub fn split(&self, x: &[f64]) -> (Vec<Complex64>, Vec<Complex64>, Vec<f64>) {
        let n = self.n();
        let v = (0..n).map(|i| Complex64::new(x[i], x[n + i])).collect();
        let w = (0..n).map(|i| Complex64::new(x[2 * n + i], x[3 * n + i])).collect();
        let q = x[4 * n..4 * n + self.n_pv].to_vec();
        (v, w, q)
    }
}

/// External voltages seen by a block at each order.
#[derive(Clone, Copy, Debug)]
pub enum ExtVoltages<'a> {
    /// Constant phasors: order 0 only.
    Fixed(&'a [Complex64]),
    /// A full coefficient series per order.
    Series(&'a [Vec<Complex64>]),
}

impl<'a> ExtVoltages<'a> {
    pub fn at(&self, n: usize) -> Option<&'a [Complex64]> {
        match *self {
            ExtVoltages::Fixed(v) => (n == 0).then_some(v),
            ExtVoltages::Series(s) => s.get(n).map(|v| v.as_slice()),
        }
    }
}

/// Order-0 state of a stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageState0 {
    pub v: Vec<Complex64>,
    pub w: Vec<Complex64>,
    pub q_pv: Vec<f64>,
}

impl StageState0 {
    /// `W` is the exact elementwise reciprocal of `V`.
    pub fn from_voltages(v: Vec<Complex64>, q_pv: Vec<f64>) -> Self {
        let w = v.iter().map(|z| z.inv()).collect();
        Self { v, w, q_pv }
    }

    pub fn check(&self, block: &EmbeddedBlock) -> Result<(), HeError> {
        if self.v.len() != block.n() || self.w.len() != block.n() || self.q_pv.len() != block.n_pv {
            return Err(HeError::InvalidState("dimension mismatch".into()));
        }
        for (i, (v, w)) in self.v.iter().zip(&self.w).enumerate() {
            if (v * w - 1.0).norm() > 1e-10 {
                return Err(HeError::InvalidState(format!("V*W != 1 at unknown {i}")));
            }
        }
        Ok(())
    }
}

/// Constant stage matrix with its factorization and the order-0 residual.
#[derive(Clone, Debug)]
pub struct StageSystem {
    pub lhs: CscMatrix,
    pub lu: SparseLu,
    pub state0: StageState0,
    pub r0: Vec<f64>,
}

impl StageSystem {
    /// Assembles and factors `L` (plus any `extra` triplets) at `state0`.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        block: &EmbeddedBlock,
        y_eff0: &CsrMatrix<Complex64>,
        state0: StageState0,
        v_ext0: &[Complex64],
        extra_current0: &[Complex64],
        extra: &[(usize, usize, f64)],
        symbolic: Option<&LuSymbolic>,
    ) -> Result<Self, HeError> {
        state0.check(block)?;
        let mut trip = block.lhs_triplets(y_eff0, &state0);
        trip.extend_from_slice(extra);
        let dim = block.dim();
        let lhs = CscMatrix::from_triplets(dim, dim, &trip);
        let lu = match symbolic {
            Some(s) => SparseLu::factor_with(s, &lhs),
            None => SparseLu::factor(&lhs),
        }
        .map_err(|e| match e {
            crate::sparse::SparseError::Singular => HeError::SingularJacobian,
            other => HeError::Solver(other.to_string()),
        })?;
        let y = EffectiveY::new(y_eff0, &[], 0.0);
        let r0 = block.residual(&y, &state0.v, &state0.w, &state0.q_pv, v_ext0, extra_current0);
        Ok(Self { lhs, lu, state0, r0 })
    }

    /// Solves `L x = rhs` with one step of iterative refinement and checks the residual.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, HeError> {
        let mut x = self.lu.solve(rhs);
        let mut r: Vec<f64> = self.lhs.mul_vec(&x).iter().zip(rhs).map(|(a, b)| b - a).collect();
        self.lu.solve_in_place(&mut r);
        for (xi, di) in x.iter_mut().zip(&r) {
            *xi += di;
        }
        let lx = self.lhs.mul_vec(&x);
        let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let res = lx.iter().zip(rhs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if !(res <= 1e-9 * (1.0 + scale)) {
            return Err(HeError::Solver(format!("order solve residual {res:e}")));
        }
        Ok(x)
    }

    pub fn series0(&self) -> HeSeries {
        HeSeries::new(self.state0.v.clone(), self.state0.w.clone(), self.state0.q_pv.clone())
    }

    /// Computes and appends order `n` to `series`.
    pub fn solve_order(
        &self,
        block: &EmbeddedBlock,
        order: usize,
        series: &mut HeSeries,
        ext: &ExtVoltages<'_>,
        delta: &[(usize, usize, Complex64)],
        correction: bool,
    ) -> Result<(), HeError> {
        if series.order() + 1 != order {
            return Err(HeError::MissingOrder { requested: order, available: series.order() });
        }
        let rhs = block.compute_rhs(order, series, ext, delta, correction.then_some(self.r0.as_slice()))?;
        let x = self.solve(&rhs)?;
        let (v, w, q) = block.split(&x);
        series.push(v, w, q);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::solve_base_state;
    use crate::dense::DenseMatrix;
    use crate::network::{parse_case, PowerFlowModel};
    use crate::synthetic::{three_bus_pv_case, two_bus_case};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn flatten(block: &EmbeddedBlock, s: &StageState0) -> Vec<f64> {
        let n = block.n();
        let mut x = vec![0.0; block.dim()];
        for i in 0..n {
            x[i] = s.v[i].re;
            x[n + i] = s.v[i].im;
            x[2 * n + i] = s.w[i].re;
            x[3 * n + i] = s.w[i].im;
        }
        x[4 * n..].copy_from_slice(&s.q_pv);
        x
    }

    /// Central-difference Jacobian of the embedded residual, compared entrywise with `L`.
    fn fd_relative_error(block: &EmbeddedBlock, s0: &StageState0, v_ext: &[Complex64]) -> f64 {
        let lhs = CscMatrix::from_triplets(block.dim(), block.dim(), &block.lhs_triplets(&block.y, s0)).to_dense();
        let y = EffectiveY::new(&block.y, &[], 0.0);
        let x0 = flatten(block, s0);
        let eval = |x: &[f64]| {
            let (v, w, q) = block.split(x);
            block.residual(&y, &v, &w, &q, v_ext, &[])
        };
        let h = 1e-6;
        let mut fd = DenseMatrix::zeros(block.dim(), block.dim());
        for j in 0..block.dim() {
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp[j] += h;
            xm[j] -= h;
            let (rp, rm) = (eval(&xp), eval(&xm));
            for i in 0..block.dim() {
                fd[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        lhs.sub(&fd).max_abs() / lhs.max_abs()
    }

    #[test]
    fn two_bus_matrix_by_hand() {
        let z = c(0.02, 0.2);
        let case = two_bus_case(c(0.8, 0.3), z);
        let model = PowerFlowModel::new(&case).unwrap();
        let block = EmbeddedBlock::from_model(&model);
        let v0 = c(0.95, -0.12);
        let s0 = StageState0::from_voltages(vec![v0], vec![]);
        let lhs = CscMatrix::from_triplets(4, 4, &block.lhs_triplets(&block.y, &s0)).to_dense();
        let y = z.inv();
        let (g, b) = (y.re, y.im);
        let (p, q) = (-0.8, -0.3);
        let w0 = v0.inv();
        let expected = DenseMatrix::from_rows(&[
            vec![-g, b, p, -q],
            vec![-b, -g, -q, -p],
            vec![w0.re, -w0.im, v0.re, -v0.im],
            vec![w0.im, w0.re, v0.im, v0.re],
        ]);
        assert!(lhs.sub(&expected).max_abs() < 1e-12);
    }

    #[test]
    fn pv_rows_by_hand() {
        let model = PowerFlowModel::new(&three_bus_pv_case(0.6, c(0.9, 0.3))).unwrap();
        let block = EmbeddedBlock::from_model(&model);
        assert_eq!((block.n_pq, block.n_pv, block.dim()), (1, 1, 9));
        let s0 = StageState0::from_voltages(vec![c(0.97, 0.02), c(1.01, 0.14)], vec![0.25]);
        let lhs = CscMatrix::from_triplets(9, 9, &block.lhs_triplets(&block.y, &s0)).to_dense();
        let (n, pv) = (2, 1);
        let (c0, d0) = (s0.v[pv].re, s0.v[pv].im);
        let (e0, f0) = (s0.w[pv].re, s0.w[pv].im);
        assert_eq!(lhs[(pv, 4 * n)], -f0);
        assert_eq!(lhs[(n + pv, 4 * n)], -e0);
        assert_eq!(lhs[(4 * n, pv)], c0);
        assert_eq!(lhs[(4 * n, n + pv)], d0);
        assert_eq!(lhs[(pv, 3 * n + pv)], -0.25);
        assert_eq!(lhs[(n + pv, 2 * n + pv)], -0.25);
    }

    #[test]
    fn jacobian_matches_finite_difference_small() {
        let model = PowerFlowModel::new(&two_bus_case(c(0.8, 0.3), c(0.02, 0.2))).unwrap();
        let block = EmbeddedBlock::from_model(&model);
        let s0 = StageState0::from_voltages(vec![c(0.95, -0.12)], vec![]);
        assert!(fd_relative_error(&block, &s0, &model.v_slack) <= 1e-6);

        let model = PowerFlowModel::new(&three_bus_pv_case(0.6, c(0.9, 0.3))).unwrap();
        let block = EmbeddedBlock::from_model(&model);
        let s0 = StageState0::from_voltages(vec![c(0.97, 0.02), c(1.01, 0.14)], vec![0.25]);
        assert!(fd_relative_error(&block, &s0, &model.v_slack) <= 1e-6);
    }

    #[test]
    fn jacobian_matches_finite_difference_case118() {
        let case = parse_case(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/case118.m")).unwrap();
        let model = PowerFlowModel::new(&case).unwrap();
        let base = solve_base_state(&model).unwrap();
        let block = EmbeddedBlock::from_model(&model);
        let s0 = StageState0::from_voltages(base.v[..model.n()].to_vec(), base.q_pv.clone());
        assert!(fd_relative_error(&block, &s0, &model.v_slack) <= 1e-6);
    }

    #[test]
    fn rejects_inconsistent_reciprocal() {
        let model = PowerFlowModel::new(&two_bus_case(c(0.8, 0.3), c(0.02, 0.2))).unwrap();
        let block = EmbeddedBlock::from_model(&model);
        let mut s0 = StageState0::from_voltages(vec![c(0.95, -0.12)], vec![]);
        s0.w[0] *= 1.01;
        assert!(matches!(s0.check(&block), Err(HeError::InvalidState(_))));
        let r = StageSystem::assemble(&block, &block.y, s0, &model.v_slack, &[], &[], None);
        assert!(matches!(r, Err(HeError::InvalidState(_))));
    }

    #[test]
    fn first_order_rhs_is_admittance_change_current() {
        let model = PowerFlowModel::new(&three_bus_pv_case(0.6, c(0.9, 0.3))).unwrap();
        let block = EmbeddedBlock::from_model(&model);
        let v = vec![c(0.97, 0.02), c(1.01, 0.14)];
        let series = HeSeries::new(v.clone(), v.iter().map(|z| z.inv()).collect(), vec![0.25]);
        let dy = c(-1.5, 6.0);
        // outage-like change between internal bus 0 and the slack (column 2)
        let delta = vec![(0, 0, dy), (0, 2, -dy), (2, 0, -dy), (2, 2, dy)];
        let ext = ExtVoltages::Fixed(&model.v_slack);
        let rhs = block.compute_rhs(1, &series, &ext, &block.restrict_delta(&delta, 1.0), None).unwrap();
        let di = dy * v[0] - dy * model.v_slack[0];
        let mut expected = vec![0.0; 9];
        expected[0] = di.re;
        expected[2] = di.im;
        for (a, b) in rhs.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn unchanged_network_is_a_fixed_point() {
        let model = PowerFlowModel::new(&three_bus_pv_case(0.6, c(0.9, 0.3))).unwrap();
        let base = solve_base_state(&model).unwrap();
        let block = EmbeddedBlock::from_model(&model);
        let s0 = StageState0::from_voltages(base.v[..2].to_vec(), base.q_pv.clone());
        let sys = StageSystem::assemble(&block, &block.y, s0, &model.v_slack, &[], &[], None).unwrap();
        let mut series = sys.series0();
        let ext = ExtVoltages::Fixed(&model.v_slack);
        for k in 1..=8 {
            sys.solve_order(&block, k, &mut series, &ext, &[], true).unwrap();
        }
        for k in 1..=8 {
            assert!(series.v[k].iter().all(|z| z.norm() < 1e-12));
            assert!(series.q[k].iter().all(|z| z.abs() < 1e-10));
        }
    }

    #[test]
    fn order_must_follow_series() {
        let model = PowerFlowModel::new(&two_bus_case(c(0.8, 0.3), c(0.02, 0.2))).unwrap();
        let block = EmbeddedBlock::from_model(&model);
        let s0 = StageState0::from_voltages(vec![c(0.95, -0.12)], vec![]);
        let sys = StageSystem::assemble(&block, &block.y, s0, &model.v_slack, &[], &[], None).unwrap();
        let mut series = sys.series0();
        let ext = ExtVoltages::Fixed(&model.v_slack);
        assert!(matches!(sys.solve_order(&block, 2, &mut series, &ext, &[], false), Err(HeError::MissingOrder { .. })));
    }
}
