use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::PartitionError;
use crate::he::EmbeddedBlock;
use crate::network::{branch_stamp, BusKind, ContingencySpec, GridCase, PfState, PowerFlowModel};
use crate::sparse::CsrMatrix;

/// User-supplied partition: main bus ids and, per subsystem, internal and boundary bus ids.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub main: Vec<usize>,
    #[serde(default, rename = "subsystem")]
    pub subsystems: Vec<SubsystemSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemSpec {
    pub name: String,
    pub internal: Vec<usize>,
    pub boundary: Vec<usize>,
}

pub fn parse_partition(text: &str) -> Result<PartitionSpec, PartitionError> {
    toml::from_str(text).map_err(|e| PartitionError::Parse(e.to_string()))
}

pub fn read_partition(path: impl AsRef<Path>) -> Result<PartitionSpec, PartitionError> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| PartitionError::Parse(format!("{}: {e}", path.as_ref().display())))?;
    parse_partition(&text)
}

pub fn write_partition(spec: &PartitionSpec) -> String {
    toml::to_string(spec).expect("partition serializes")
}

/// Part owning a branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Owner {
    Main,
    Sub(usize),
}

/// Where a subsystem boundary bus sits in the main block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryLink {
    /// Main unknown index.
    Unknown(usize),
    /// Main external (slack) index; its voltage is fixed.
    Fixed(usize),
}

/// Main-system block: every bus not internal to a subsystem, with main-owned branches only.
#[derive(Clone, Debug)]
pub struct MainView {
    pub block: EmbeddedBlock,
    pub v_slack: Vec<Complex64>,
    /// Full-model index of each main local index (unknowns, then slack buses).
    pub full_index: Vec<usize>,
    pub ids: Vec<usize>,
}

/// One lower-level system: internal rows with boundary buses as external columns.
#[derive(Clone, Debug)]
pub struct SubsystemView {
    pub index: usize,
    pub name: String,
    /// Internal bus ids in local order (PQ then PV, each by id).
    pub internal_ids: Vec<usize>,
    pub boundary_ids: Vec<usize>,
    pub block: EmbeddedBlock,
    /// Admittance over `[internal, boundary]` from this subsystem's branches only.
    pub y: CsrMatrix<Complex64>,
    /// Boundary rows of `y`.
    pub y_bnd: CsrMatrix<Complex64>,
    pub links: Vec<BoundaryLink>,
    /// Full-model index of each internal local index.
    pub full_index: Vec<usize>,
}

impl SubsystemView {
    pub fn n_internal(&self) -> usize {
        self.block.n()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary_ids.len()
    }
}

/// A case split into one main system and its subsystems.
#[derive(Clone, Debug)]
pub struct PartitionedCase {
    pub model: PowerFlowModel,
    pub main: MainView,
    pub subsystems: Vec<SubsystemView>,
    pub branch_owner: Vec<Owner>,
    /// Local endpoint indices of each branch in its owner's indexing.
    branch_local: Vec<(usize, usize)>,
    branch_stamps: Vec<(Complex64, Complex64, Complex64, Complex64)>,
}

/// Admittance change of one contingency split by owner, in each part's local indexing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplitDelta {
    /// Main block rows and `[unknowns, slack]` columns.
    pub main: Vec<(usize, usize, Complex64)>,
    /// Per subsystem: internal rows over `[internal, boundary]` columns.
    pub internal: Vec<Vec<(usize, usize, Complex64)>>,
    /// Per subsystem: boundary rows (0-based) over `[internal, boundary]` columns.
    pub boundary: Vec<Vec<(usize, usize, Complex64)>>,
}

impl PartitionedCase {
    pub fn n_subsystems(&self) -> usize {
        self.subsystems.len()
    }

    /// Splits the outaged branches of `spec` into main and subsystem admittance changes.
    pub fn split_delta(&self, spec: &ContingencySpec) -> SplitDelta {
        let k = self.subsystems.len();
        let mut out = SplitDelta { main: Vec::new(), internal: vec![Vec::new(); k], boundary: vec![Vec::new(); k] };
        for &b in &spec.branch_indices {
            let (f, t) = self.branch_local[b];
            let (yff, yft, ytf, ytt) = self.branch_stamps[b];
            let entries = [(f, f, -yff), (f, t, -yft), (t, f, -ytf), (t, t, -ytt)];
            match self.branch_owner[b] {
                Owner::Main => {
                    let n = self.main.block.n();
                    out.main.extend(entries.iter().filter(|e| e.0 < n).copied());
                }
                Owner::Sub(s) => {
                    let ni = self.subsystems[s].n_internal();
                    for (r, c, d) in entries {
                        if r < ni {
                            out.internal[s].push((r, c, d));
                        } else {
                            out.boundary[s].push((r - ni, c, d));
                        }
                    }
                }
            }
        }
        out
    }

    /// Main-local voltages of a full-model state.
    pub fn main_voltages(&self, state: &PfState) -> Vec<Complex64> {
        self.main.full_index.iter().map(|&f| state.v[f]).collect()
    }

    /// Main PV reactive injections of a full-model state.
    pub fn main_q_pv(&self, state: &PfState) -> Vec<f64> {
        let b = &self.main.block;
        let npq = self.model.n_pq();
        (b.n_pq..b.n()).map(|i| state.q_pv[self.main.full_index[i] - npq]).collect()
    }

    /// Internal voltages and PV reactive injections of subsystem `s` from a full-model state.
    pub fn sub_state(&self, s: usize, state: &PfState) -> (Vec<Complex64>, Vec<f64>) {
        let sub = &self.subsystems[s];
        let npq = self.model.n_pq();
        let v = sub.full_index.iter().map(|&f| state.v[f]).collect();
        let q = (sub.block.n_pq..sub.block.n()).map(|i| state.q_pv[sub.full_index[i] - npq]).collect();
        (v, q)
    }

    /// Reassembles a full-model state from the parts.
    pub fn assemble_state(&self, main_v: &[Complex64], main_q: &[f64], subs: &[(Vec<Complex64>, Vec<f64>)]) -> PfState {
        let m = &self.model;
        let mut v = vec![Complex64::new(0.0, 0.0); m.n_total()];
        let mut q = vec![0.0; m.n_pv()];
        let npq = m.n_pq();
        let mb = &self.main.block;
        for (i, &f) in self.main.full_index.iter().enumerate() {
            v[f] = if i < mb.n() { main_v[i] } else { self.main.v_slack[i - mb.n()] };
        }
        for i in mb.n_pq..mb.n() {
            q[self.main.full_index[i] - npq] = main_q[i - mb.n_pq];
        }
        for (sub, (sv, sq)) in self.subsystems.iter().zip(subs) {
            for (i, &f) in sub.full_index.iter().enumerate() {
                v[f] = sv[i];
            }
            for i in sub.block.n_pq..sub.block.n() {
                q[sub.full_index[i] - npq] = sq[i - sub.block.n_pq];
            }
        }
        PfState { v, q_pv: q }
    }
}

fn ordered_internal(case: &GridCase, ids: &[usize]) -> (Vec<usize>, usize) {
    let mut pq: Vec<usize> = Vec::new();
    let mut pv: Vec<usize> = Vec::new();
    for &id in ids {
        match case.bus(id).map(|b| b.kind) {
            Some(BusKind::PV) => pv.push(id),
            _ => pq.push(id),
        }
    }
    pq.sort_unstable();
    pv.sort_unstable();
    let n_pq = pq.len();
    pq.extend(pv);
    (pq, n_pq)
}

/// Validates `spec` against `case` and builds the main and subsystem blocks.
pub fn partition_case(case: &GridCase, spec: &PartitionSpec) -> Result<PartitionedCase, PartitionError> {
    let model = PowerFlowModel::new(case)?;
    // part of every bus: None = main, Some(s) = internal to subsystem s
    let mut part: HashMap<usize, Option<usize>> = HashMap::with_capacity(case.n_buses());
    let mut assign = |id: usize, p: Option<usize>| -> Result<(), PartitionError> {
        if case.bus(id).is_none() {
            return Err(PartitionError::UnknownBus(id));
        }
        if part.insert(id, p).is_some() {
            return Err(PartitionError::Overlap(id));
        }
        Ok(())
    };
    for &id in &spec.main {
        assign(id, None)?;
    }
    for (s, sub) in spec.subsystems.iter().enumerate() {
        if sub.internal.is_empty() {
            return Err(PartitionError::EmptySubsystem(sub.name.clone()));
        }
        for &id in &sub.internal {
            assign(id, Some(s))?;
        }
    }
    for b in &case.buses {
        if !part.contains_key(&b.id) {
            return Err(PartitionError::Unassigned(b.id));
        }
    }
    for sub in &spec.subsystems {
        for &id in &sub.internal {
            if case.bus(id).unwrap().kind == BusKind::Slack {
                return Err(PartitionError::SlackInSubsystem { sub: sub.name.clone(), bus: id });
            }
        }
        let mut seen = BTreeSet::new();
        for &id in &sub.boundary {
            match part.get(&id) {
                Some(None) => {}
                Some(Some(_)) => return Err(PartitionError::BoundaryNotMain { sub: sub.name.clone(), bus: id }),
                None => return Err(PartitionError::UnknownBus(id)),
            }
            if !seen.insert(id) {
                return Err(PartitionError::Overlap(id));
            }
        }
    }

    // branch ownership
    let mut owner = Vec::with_capacity(case.branches.len());
    let mut tied: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); spec.subsystems.len()];
    for br in &case.branches {
        let (pf, pt) = (part[&br.from], part[&br.to]);
        let o = match (pf, pt) {
            (None, None) => Owner::Main,
            (Some(a), Some(b)) if a == b => Owner::Sub(a),
            (Some(a), Some(b)) => {
                return Err(PartitionError::SubsystemTie {
                    a: spec.subsystems[a].name.clone(),
                    b: spec.subsystems[b].name.clone(),
                    from: br.from,
                    to: br.to,
                })
            }
            (Some(s), None) | (None, Some(s)) => {
                let (inner, outer) = if pf.is_some() { (br.from, br.to) } else { (br.to, br.from) };
                if !spec.subsystems[s].boundary.contains(&outer) {
                    return Err(PartitionError::OutsideBoundary { sub: spec.subsystems[s].name.clone(), from: inner, to: outer });
                }
                tied[s].insert(outer);
                Owner::Sub(s)
            }
        };
        owner.push(o);
    }
    for (s, sub) in spec.subsystems.iter().enumerate() {
        for &id in &sub.boundary {
            if !tied[s].contains(&id) {
                return Err(PartitionError::BoundaryWithoutTie { sub: sub.name.clone(), bus: id });
            }
        }
    }

    // main system as a case of its own
    let main_buses: Vec<_> = case.buses.iter().filter(|b| part[&b.id].is_none()).cloned().collect();
    let main_branches: Vec<_> =
        case.branches.iter().zip(&owner).filter(|(_, o)| **o == Owner::Main).map(|(b, _)| b.clone()).collect();
    let main_case = GridCase::new(&format!("{}-main", case.name), case.base_mva, main_buses, main_branches)?;
    let main_model = PowerFlowModel::new(&main_case)?;
    let full_of_id: HashMap<usize, usize> = model.ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let main_local_of_id: HashMap<usize, usize> = main_model.ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let main = MainView {
        block: EmbeddedBlock::from_model(&main_model),
        v_slack: main_model.v_slack.clone(),
        full_index: main_model.ids.iter().map(|id| full_of_id[id]).collect(),
        ids: main_model.ids.clone(),
    };
    let n_main = main.block.n();

    // subsystems
    let mut subsystems = Vec::with_capacity(spec.subsystems.len());
    let mut sub_local: Vec<HashMap<usize, usize>> = Vec::with_capacity(spec.subsystems.len());
    for (s, sub) in spec.subsystems.iter().enumerate() {
        let (internal_ids, n_pq) = ordered_internal(case, &sub.internal);
        let ni = internal_ids.len();
        let nb = sub.boundary.len();
        let mut local: HashMap<usize, usize> = HashMap::with_capacity(ni + nb);
        for (i, &id) in internal_ids.iter().chain(&sub.boundary).enumerate() {
            local.insert(id, i);
        }
        let zero = Complex64::new(0.0, 0.0);
        let mut trip = Vec::new();
        for (i, &id) in internal_ids.iter().enumerate() {
            trip.push((i, i, case.bus(id).unwrap().shunt_admittance()));
        }
        for a in 0..nb {
            trip.push((ni + a, ni + a, zero));
        }
        for (br, o) in case.branches.iter().zip(&owner) {
            if *o != Owner::Sub(s) {
                continue;
            }
            let (f, t) = (local[&br.from], local[&br.to]);
            let (yff, yft, ytf, ytt) = if br.in_service() { branch_stamp(br) } else { (zero, zero, zero, zero) };
            trip.extend([(f, f, yff), (f, t, yft), (t, f, ytf), (t, t, ytt)]);
        }
        let y = CsrMatrix::from_triplets(ni + nb, ni + nb, &trip);
        let all_cols: Vec<Option<usize>> = (0..ni + nb).map(Some).collect();
        let rows_int: Vec<usize> = (0..ni).collect();
        let rows_bnd: Vec<usize> = (ni..ni + nb).collect();
        let buses: Vec<_> = internal_ids.iter().map(|id| case.bus(*id).unwrap()).collect();
        let block = EmbeddedBlock {
            n_pq,
            n_pv: ni - n_pq,
            n_ext: nb,
            s_inj: buses.iter().map(|b| b.s_inj()).collect(),
            i_load: buses.iter().map(|b| b.current_draw()).collect(),
            v_sp: buses[n_pq..].iter().map(|b| b.v_sp).collect(),
            y: y.select(&rows_int, &all_cols, ni + nb),
        };
        let links = sub
            .boundary
            .iter()
            .map(|id| {
                let l = main_local_of_id[id];
                if l < n_main {
                    BoundaryLink::Unknown(l)
                } else {
                    BoundaryLink::Fixed(l - n_main)
                }
            })
            .collect();
        subsystems.push(SubsystemView {
            index: s,
            name: sub.name.clone(),
            full_index: internal_ids.iter().map(|id| full_of_id[id]).collect(),
            internal_ids,
            boundary_ids: sub.boundary.clone(),
            y_bnd: y.select(&rows_bnd, &all_cols, ni + nb),
            y,
            block,
            links,
        });
        sub_local.push(local);
    }

    let mut branch_local = Vec::with_capacity(case.branches.len());
    let mut branch_stamps = Vec::with_capacity(case.branches.len());
    for (br, o) in case.branches.iter().zip(&owner) {
        let pair = match o {
            Owner::Main => (main_local_of_id[&br.from], main_local_of_id[&br.to]),
            Owner::Sub(s) => (sub_local[*s][&br.from], sub_local[*s][&br.to]),
        };
        branch_local.push(pair);
        branch_stamps.push(branch_stamp(br));
    }

    Ok(PartitionedCase { model, main, subsystems, branch_owner: owner, branch_local, branch_stamps })
}
