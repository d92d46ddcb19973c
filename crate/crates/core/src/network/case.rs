use std::collections::{BTreeSet, HashMap};

use num_complex::Complex64;

use super::NetworkError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BusKind {
    PQ,
    PV,
    Slack,
}

/// Split of a bus load into constant-power, constant-current and constant-impedance parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZipLoad {
    pub p_frac: f64,
    pub i_frac: f64,
    pub z_frac: f64,
}

impl ZipLoad {
    pub const CONSTANT_POWER: ZipLoad = ZipLoad { p_frac: 1.0, i_frac: 0.0, z_frac: 0.0 };
}

/// One bus. Loads and generation are in per unit on the case base.
#[derive(Clone, Debug, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub kind: BusKind,
    /// Nominal load (consumption) at 1 pu voltage.
    pub load: Complex64,
    /// Generation injection; the reactive part is ignored at PV and slack buses.
    pub gen: Complex64,
    /// Shunt admittance to ground.
    pub shunt: Complex64,
    pub v_sp: f64,
    pub v_angle_sp: f64,
    pub v_init: Complex64,
    pub zip: Option<ZipLoad>,
    pub base_kv: f64,
}

impl Bus {
    pub fn pq(id: usize, load: Complex64) -> Self {
        Self {
            id,
            kind: BusKind::PQ,
            load,
            gen: Complex64::new(0.0, 0.0),
            shunt: Complex64::new(0.0, 0.0),
            v_sp: 1.0,
            v_angle_sp: 0.0,
            v_init: Complex64::new(1.0, 0.0),
            zip: None,
            base_kv: 0.0,
        }
    }

    pub fn zip_or_default(&self) -> ZipLoad {
        self.zip.unwrap_or(ZipLoad::CONSTANT_POWER)
    }

    /// Net constant-power injection (generation minus constant-power load).
    pub fn s_inj(&self) -> Complex64 {
        self.gen - self.load * self.zip_or_default().p_frac
    }

    /// Shunt plus the constant-impedance share of the load, as a diagonal admittance.
    pub fn shunt_admittance(&self) -> Complex64 {
        self.shunt + (self.load * self.zip_or_default().z_frac).conj()
    }

    /// Constant-current draw of the load at nominal voltage.
    pub fn current_draw(&self) -> Complex64 {
        (self.load * self.zip_or_default().i_frac).conj()
    }

    pub fn p_inj(&self) -> f64 {
        self.s_inj().re
    }

    pub fn q_inj(&self) -> f64 {
        self.s_inj().im
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchStatus {
    InService,
    Out,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    /// Distinguishes parallel branches between the same bus pair, numbered from 1 in file order.
    pub circuit: u32,
    pub series_impedance: Complex64,
    pub shunt_susceptance: f64,
    /// Off-nominal turns ratio `ratio * exp(j shift)` on the from side; 1 for lines.
    pub tap_ratio: Complex64,
    pub status: BranchStatus,
}

impl Branch {
    pub fn line(from: usize, to: usize, z: Complex64, b: f64) -> Self {
        Self {
            from,
            to,
            circuit: 1,
            series_impedance: z,
            shunt_susceptance: b,
            tap_ratio: Complex64::new(1.0, 0.0),
            status: BranchStatus::InService,
        }
    }

    pub fn in_service(&self) -> bool {
        self.status == BranchStatus::InService
    }

    pub fn connects(&self, a: usize, b: usize) -> bool {
        (self.from == a && self.to == b) || (self.from == b && self.to == a)
    }
}

/// A validated electrical case.
#[derive(Clone, Debug)]
pub struct GridCase {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub slack_ids: BTreeSet<usize>,
    index: HashMap<usize, usize>,
}

impl GridCase {
    /// Validates and builds a case. Circuit numbers are recomputed from branch order.
    pub fn new(name: &str, base_mva: f64, buses: Vec<Bus>, mut branches: Vec<Branch>) -> Result<Self, NetworkError> {
        let mut index = HashMap::with_capacity(buses.len());
        for (k, b) in buses.iter().enumerate() {
            if index.insert(b.id, k).is_some() {
                return Err(NetworkError::DuplicateBus(b.id));
            }
            if b.kind != BusKind::PQ && !(b.v_sp > 0.0 && b.v_sp.is_finite()) {
                return Err(NetworkError::InvalidSetpoint(b.id));
            }
            if let Some(z) = b.zip {
                if ((z.p_frac + z.i_frac + z.z_frac) - 1.0).abs() > 1e-9 {
                    return Err(NetworkError::InvalidZip(b.id));
                }
            }
        }
        let mut seen: HashMap<(usize, usize), u32> = HashMap::new();
        for (k, br) in branches.iter_mut().enumerate() {
            for bus in [br.from, br.to] {
                if !index.contains_key(&bus) {
                    return Err(NetworkError::UnknownEndpoint { index: k, bus });
                }
            }
            let key = (br.from.min(br.to), br.from.max(br.to));
            let c = seen.entry(key).or_insert(0);
            *c += 1;
            br.circuit = *c;
        }
        let slack_ids = buses.iter().filter(|b| b.kind == BusKind::Slack).map(|b| b.id).collect();
        let case = Self { name: name.to_string(), base_mva, buses, branches, slack_ids, index };
        case.check_slack_per_island()?;
        Ok(case)
    }

    fn check_slack_per_island(&self) -> Result<(), NetworkError> {
        if self.slack_ids.is_empty() {
            return Err(NetworkError::NoSlack(self.buses.first().map_or(0, |b| b.id)));
        }
        for island in super::islands(self, &[]) {
            let n = island.iter().filter(|id| self.slack_ids.contains(id)).count();
            if n == 0 {
                return Err(NetworkError::NoSlack(island[0]));
            }
            if n > 1 {
                return Err(NetworkError::MultipleSlack(island[0]));
            }
        }
        Ok(())
    }

    pub fn bus_position(&self, id: usize) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn bus(&self, id: usize) -> Option<&Bus> {
        self.bus_position(id).map(|k| &self.buses[k])
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    /// Index of the in-service or out-of-service branch with the given endpoints and circuit.
    pub fn find_branch(&self, from: usize, to: usize, circuit: u32) -> Option<usize> {
        self.branches.iter().position(|b| b.connects(from, to) && b.circuit == circuit)
    }

    pub fn total_load(&self) -> Complex64 {
        self.buses.iter().map(|b| b.load).sum()
    }
}

/// Multiplies all loads and all non-slack generation by `factor`.
pub fn scale_loading(case: &GridCase, factor: f64) -> Result<GridCase, NetworkError> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(NetworkError::InvalidScale(factor));
    }
    let mut out = case.clone();
    for b in &mut out.buses {
        b.load *= factor;
        if b.kind != BusKind::Slack {
            b.gen *= factor;
        }
    }
    Ok(out)
}
