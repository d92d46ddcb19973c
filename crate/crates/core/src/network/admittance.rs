use num_complex::Complex64;

use super::case::{Branch, BusKind, GridCase};
use super::NetworkError;
use crate::sparse::CsrMatrix;

/// Internal bus order: PQ buses, then PV buses, then slack buses, each group by ascending id.
#[derive(Clone, Debug, PartialEq)]
pub struct BusOrdering {
    /// Internal index to position in `GridCase::buses`.
    pub case_pos: Vec<usize>,
    /// Position in `GridCase::buses` to internal index.
    pub internal: Vec<usize>,
    pub n_pq: usize,
    pub n_pv: usize,
    pub n_slack: usize,
}

impl BusOrdering {
    pub fn new(case: &GridCase) -> Self {
        let mut keyed: Vec<(u8, usize, usize)> = case
            .buses
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let g = match b.kind {
                    BusKind::PQ => 0,
                    BusKind::PV => 1,
                    BusKind::Slack => 2,
                };
                (g, b.id, k)
            })
            .collect();
        keyed.sort_unstable();
        let case_pos: Vec<usize> = keyed.iter().map(|e| e.2).collect();
        let mut internal = vec![0; case_pos.len()];
        for (i, &k) in case_pos.iter().enumerate() {
            internal[k] = i;
        }
        let count = |g| keyed.iter().filter(|e| e.0 == g).count();
        Self { case_pos, internal, n_pq: count(0), n_pv: count(1), n_slack: count(2) }
    }

    /// Number of non-slack buses.
    pub fn n(&self) -> usize {
        self.n_pq + self.n_pv
    }

    pub fn len(&self) -> usize {
        self.case_pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.case_pos.is_empty()
    }

    pub fn internal_of_id(&self, case: &GridCase, id: usize) -> Option<usize> {
        case.bus_position(id).map(|k| self.internal[k])
    }
}

/// Admittance matrix over all buses in internal order.
///
/// Rows and columns `0..n` are the non-slack block `Y`; columns `n..` are the slack coupling `Y_SL`.
#[derive(Clone, Debug)]
pub struct AdmittanceMatrix {
    pub ordering: BusOrdering,
    pub ybus: CsrMatrix<Complex64>,
}

impl AdmittanceMatrix {
    pub fn n(&self) -> usize {
        self.ordering.n()
    }

    /// Entry of the non-slack block.
    pub fn y(&self, i: usize, j: usize) -> Complex64 {
        assert!(i < self.n() && j < self.n());
        self.ybus.get(i, j)
    }

    /// Entry of the slack coupling block (`k` counts slack buses).
    pub fn y_sl(&self, i: usize, k: usize) -> Complex64 {
        self.ybus.get(i, self.n() + k)
    }
}

/// Standard pi-model stamp `(y_ff, y_ft, y_tf, y_tt)`.
pub fn branch_stamp(br: &Branch) -> (Complex64, Complex64, Complex64, Complex64) {
    let ys = br.series_impedance.inv();
    let bc = Complex64::new(0.0, br.shunt_susceptance / 2.0);
    let t = br.tap_ratio;
    let ytt = ys + bc;
    let yff = ytt / t.norm_sqr();
    let yft = -ys / t.conj();
    let ytf = -ys / t;
    (yff, yft, ytf, ytt)
}

pub(crate) fn check_branch(k: usize, br: &Branch) -> Result<(), NetworkError> {
    if br.series_impedance.norm() == 0.0 {
        return Err(NetworkError::ZeroImpedance(k));
    }
    if br.tap_ratio.norm() == 0.0 {
        return Err(NetworkError::ZeroTap(k));
    }
    Ok(())
}

/// Builds the bus admittance matrix. Out-of-service branches leave explicit zeros so the
/// sparsity pattern does not depend on branch status.
pub fn build_admittance(case: &GridCase) -> Result<AdmittanceMatrix, NetworkError> {
    let ordering = BusOrdering::new(case);
    let zero = Complex64::new(0.0, 0.0);
    let mut trip = Vec::with_capacity(case.buses.len() + 4 * case.branches.len());
    for (k, b) in case.buses.iter().enumerate() {
        trip.push((ordering.internal[k], ordering.internal[k], b.shunt_admittance()));
    }
    for (k, br) in case.branches.iter().enumerate() {
        check_branch(k, br)?;
        let f = ordering.internal[case.bus_position(br.from).unwrap()];
        let t = ordering.internal[case.bus_position(br.to).unwrap()];
        let (yff, yft, ytf, ytt) = if br.in_service() { branch_stamp(br) } else { (zero, zero, zero, zero) };
        trip.push((f, f, yff));
        trip.push((f, t, yft));
        trip.push((t, f, ytf));
        trip.push((t, t, ytt));
    }
    let n = ordering.len();
    Ok(AdmittanceMatrix { ordering, ybus: CsrMatrix::from_triplets(n, n, &trip) })
}

/// `Y + scale * dY`, applied lazily.
#[derive(Clone, Copy, Debug)]
pub struct EffectiveY<'a> {
    pub base: &'a CsrMatrix<Complex64>,
    pub delta: &'a [(usize, usize, Complex64)],
    pub scale: f64,
}

impl<'a> EffectiveY<'a> {
    pub fn new(base: &'a CsrMatrix<Complex64>, delta: &'a [(usize, usize, Complex64)], scale: f64) -> Self {
        Self { base, delta, scale }
    }

    /// Current injections `(Y + scale dY) v` for every row.
    pub fn currents(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut i = self.base.mul_vec(v);
        if self.scale != 0.0 {
            for &(r, c, d) in self.delta {
                i[r] += d * self.scale * v[c];
            }
        }
        i
    }

    /// Materialises the matrix on the base pattern; every delta entry must lie inside it.
    pub fn materialize(&self) -> CsrMatrix<Complex64> {
        let mut m = self.base.clone();
        if self.scale != 0.0 {
            for &(r, c, d) in self.delta {
                let p = m.position(r, c).expect("delta entry outside admittance pattern");
                m.values_mut()[p] += d * self.scale;
            }
        }
        m
    }
}
