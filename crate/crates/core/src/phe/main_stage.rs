use num_complex::Complex64;

use super::partition::{BoundaryLink, MainView, PartitionedCase};
use crate::dense::DenseMatrix;
use crate::he::{HeError, StageState0, StageSystem};
use crate::network::{EffectiveY, PfState};
use crate::sparse::{CsrMatrix, LuSymbolic};

/// Main-block triplets of one subsystem's `L_s`, skipping fixed (slack) boundary buses.
///
/// Every entry is emitted, zero or not, so the merged pattern never changes.
pub fn fold_triplets(main_n: usize, links: &[BoundaryLink], l_s: &DenseMatrix) -> Vec<(usize, usize, f64)> {
    let nb = links.len();
    let idx = |k: usize| -> Option<usize> {
        let (link, imag) = if k < nb { (links[k], false) } else { (links[k - nb], true) };
        match link {
            BoundaryLink::Unknown(i) => Some(if imag { main_n + i } else { i }),
            BoundaryLink::Fixed(_) => None,
        }
    };
    let mut t = Vec::with_capacity(4 * nb * nb);
    for r in 0..2 * nb {
        let Some(mr) = idx(r) else { continue };
        for c in 0..2 * nb {
            if let Some(mc) = idx(c) {
                t.push((mr, mc, l_s[(r, c)]));
            }
        }
    }
    t
}

/// Order-0 main state of a full-model state.
pub fn main_state0(p: &PartitionedCase, state: &PfState) -> StageState0 {
    let v = p.main_voltages(state);
    StageState0::from_voltages(v[..p.main.block.n()].to_vec(), p.main_q_pv(state))
}

/// Main stage matrix with every subsystem's Schur complement folded in.
#[derive(Clone, Debug)]
pub struct MainStage {
    pub system: StageSystem,
}

impl MainStage {
    /// Boundary currents of all subsystems accumulated onto main rows.
    pub fn extra_current(main: &MainView, links: &[&[BoundaryLink]], currents: &[&[Complex64]]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); main.block.n()];
        for (l, cur) in links.iter().zip(currents) {
            for (link, i) in l.iter().zip(cur.iter()) {
                if let BoundaryLink::Unknown(k) = link {
                    out[*k] += i;
                }
            }
        }
        out
    }

    /// Assembles and factors the merged main matrix from each subsystem's `(L_s, I_sub0)`.
    ///
    /// Subsystem contributions are folded in subsystem order.
    pub fn assemble(
        p: &PartitionedCase,
        delta_main: &[(usize, usize, Complex64)],
        alpha_done: f64,
        state0: StageState0,
        subs: &[(&DenseMatrix, &[Complex64])],
        symbolic: Option<&LuSymbolic>,
    ) -> Result<Self, HeError> {
        let main = &p.main;
        let n = main.block.n();
        let y0: CsrMatrix<Complex64> = EffectiveY::new(&main.block.y, delta_main, alpha_done).materialize();
        let mut extra = Vec::new();
        for (view, (l_s, _)) in p.subsystems.iter().zip(subs) {
            extra.extend(fold_triplets(n, &view.links, l_s));
        }
        let links: Vec<&[BoundaryLink]> = p.subsystems.iter().map(|s| s.links.as_slice()).collect();
        let currents: Vec<&[Complex64]> = subs.iter().map(|s| s.1).collect();
        let i_extra = Self::extra_current(main, &links, &currents);
        let system = StageSystem::assemble(&main.block, &y0, state0, &main.v_slack, &i_extra, &extra, symbolic)?;
        Ok(Self { system })
    }
}
