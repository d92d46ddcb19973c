use num_complex::Complex64;

use super::partition::SubsystemView;
use crate::dense::DenseMatrix;
use crate::he::{ExtVoltages, HeError, HeSeries, StageState0, StageSystem};
use crate::network::EffectiveY;
use crate::sparse::{CsrMatrix, LuSymbolic};

/// Factored internal block of one subsystem for one stage, with its boundary Schur complement.
///
/// Boundary quantities are ordered `[Re rows | Im rows]` and `[C cols | D cols]`, each of size `n_b`.
#[derive(Clone, Debug)]
pub struct SubsystemStage {
    /// `L_sii`, its factors, the internal order-0 state and the internal stage-start residual.
    pub system: StageSystem,
    /// `L_sii^-1 L_sib`, one column per boundary unknown.
    pub z: Vec<Vec<f64>>,
    /// `L_sbi` as a sparse `2 n_b x dim` matrix.
    pub l_sbi: CsrMatrix<f64>,
    pub l_sbb: DenseMatrix,
    pub l_s: DenseMatrix,
    /// Boundary voltages at the stage start.
    pub v_b0: Vec<Complex64>,
    /// Current flowing from each boundary bus into the subsystem at the stage start.
    pub i_b0: Vec<Complex64>,
}

fn real_blocks(row: usize, col: usize, y: Complex64, rows: usize, cols: usize, out: &mut Vec<(usize, usize, f64)>) {
    out.push((row, col, -y.re));
    out.push((row, cols + col, y.im));
    out.push((rows + row, col, -y.im));
    out.push((rows + row, cols + col, -y.re));
}

/// Boundary currents `Y_s,b. [V_i; V_b]` under `y_bnd + scale * delta_bnd`.
pub fn boundary_currents(
    y_bnd: &CsrMatrix<Complex64>,
    delta_bnd: &[(usize, usize, Complex64)],
    scale: f64,
    v_int: &[Complex64],
    v_bnd: &[Complex64],
) -> Vec<Complex64> {
    let mut full = v_int.to_vec();
    full.extend_from_slice(v_bnd);
    EffectiveY::new(y_bnd, delta_bnd, scale).currents(&full)
}

/// Assembles and factors `L_sii` at `state0` and forms `L_s = L_sbb - L_sbi L_sii^-1 L_sib`.
///
/// `delta_int`/`delta_bnd` are the subsystem's admittance changes, applied with weight `alpha_done`.
pub fn assemble_subsystem_stage(
    view: &SubsystemView,
    delta_int: &[(usize, usize, Complex64)],
    delta_bnd: &[(usize, usize, Complex64)],
    alpha_done: f64,
    state0: StageState0,
    v_b0: &[Complex64],
    symbolic: Option<&LuSymbolic>,
) -> Result<SubsystemStage, HeError> {
    let block = &view.block;
    let ni = block.n();
    let nb = view.n_boundary();
    let dim = block.dim();
    let y_int = EffectiveY::new(&block.y, delta_int, alpha_done).materialize();
    let y_bnd = EffectiveY::new(&view.y_bnd, delta_bnd, alpha_done).materialize();
    let system = StageSystem::assemble(block, &y_int, state0, v_b0, &[], &[], symbolic)?;

    let mut z = vec![vec![0.0; dim]; 2 * nb];
    for (r, c, v) in block.ext_coupling(&y_int) {
        z[c][r] += v;
    }
    for col in z.iter_mut() {
        if col.iter().any(|&v| v != 0.0) {
            *col = system.solve(col)?;
        }
    }

    let mut t_bi = Vec::new();
    let mut t_bb = Vec::new();
    for a in 0..nb {
        for (j, y) in y_bnd.row(a) {
            if j < ni {
                real_blocks(a, j, y, nb, ni, &mut t_bi);
            } else {
                real_blocks(a, j - ni, y, nb, nb, &mut t_bb);
            }
        }
    }
    // L_sbi only touches the C and D columns of the internal unknowns
    let l_sbi = CsrMatrix::from_triplets(2 * nb, dim, &t_bi);
    let mut l_sbb = DenseMatrix::zeros(2 * nb, 2 * nb);
    for (r, c, v) in t_bb {
        l_sbb[(r, c)] += v;
    }
    let mut l_s = l_sbb.clone();
    for c in 0..2 * nb {
        let prod = l_sbi.mul_vec(&z[c]);
        for r in 0..2 * nb {
            l_s[(r, c)] -= prod[r];
        }
    }
    let i_b0 = boundary_currents(&view.y_bnd, delta_bnd, alpha_done, &system.state0.v, v_b0);
    Ok(SubsystemStage { system, z, l_sbi, l_sbb, l_s, v_b0: v_b0.to_vec(), i_b0 })
}

/// Reduced right-hand side `R_s[n] = R_sb[n] - L_sbi L_sii^-1 R_si[n]`.
///
/// Returns `(R_s[n], L_sii^-1 R_si[n])`; the second part is kept for the back-solve.
/// `boundary` holds boundary voltage coefficients through order `n - 1`.
#[allow(clippy::too_many_arguments)]
pub fn reduce_subsystem_rhs(
    view: &SubsystemView,
    stage: &SubsystemStage,
    order: usize,
    series: &HeSeries,
    boundary: &[Vec<Complex64>],
    stage_delta_int: &[(usize, usize, Complex64)],
    stage_delta_bnd: &[(usize, usize, Complex64)],
    correction: bool,
) -> Result<(Vec<f64>, Vec<f64>), HeError> {
    let block = &view.block;
    let ni = block.n();
    let nb = view.n_boundary();
    if boundary.len() < order {
        return Err(HeError::MissingOrder { requested: order - 1, available: boundary.len().saturating_sub(1) });
    }
    let ext = ExtVoltages::Series(boundary);
    let r_si = block.compute_rhs(order, series, &ext, stage_delta_int, correction.then_some(stage.system.r0.as_slice()))?;
    let u = stage.system.solve(&r_si)?;
    let mut acc = vec![Complex64::new(0.0, 0.0); nb];
    for &(a, c, d) in stage_delta_bnd {
        let v = if c < ni { series.v[order - 1][c] } else { boundary[order - 1][c - ni] };
        acc[a] += d * v;
    }
    let proj = stage.l_sbi.mul_vec(&u);
    let mut r_s = vec![0.0; 2 * nb];
    for a in 0..nb {
        r_s[a] = acc[a].re - proj[a];
        r_s[nb + a] = acc[a].im - proj[nb + a];
    }
    Ok((r_s, u))
}

/// `x_si[n] = L_sii^-1 R_si[n] - (L_sii^-1 L_sib) x_sb[n]`, appended to `series` as order `n`.
pub fn back_solve_internal(view: &SubsystemView, stage: &SubsystemStage, u: &[f64], x_sb: &[f64], series: &mut HeSeries) {
    let mut x = u.to_vec();
    for (zc, &xb) in stage.z.iter().zip(x_sb) {
        if xb != 0.0 {
            for (xi, zi) in x.iter_mut().zip(zc) {
                *xi -= zi * xb;
            }
        }
    }
    let (v, w, q) = view.block.split(&x);
    series.push(v, w, q);
}
