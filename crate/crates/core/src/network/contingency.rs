use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::admittance::{branch_stamp, BusOrdering};
use super::case::GridCase;
use super::NetworkError;

/// Branch reference by endpoints and circuit number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BranchRef {
    pub from: usize,
    pub to: usize,
    pub circuit: u32,
}

impl std::fmt::Display for BranchRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}({})", self.from, self.to, self.circuit)
    }
}

/// One row group of a contingency list: outaged branches and an optional load scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContingencyEntry {
    pub id: String,
    pub outages: Vec<BranchRef>,
    pub load_scale: Option<f64>,
}

/// Admittance change of an outage, in internal bus order of the case it was built for.
#[derive(Clone, Debug, PartialEq)]
pub struct ContingencySpec {
    pub id: String,
    pub outaged_branches: Vec<BranchRef>,
    pub branch_indices: Vec<usize>,
    /// Entries `(row, col, value)` of `dY` over all buses, duplicates merged, sorted.
    pub delta_y: Vec<(usize, usize, Complex64)>,
}

impl ContingencySpec {
    pub fn is_empty(&self) -> bool {
        self.branch_indices.is_empty()
    }
}

/// `dY = -(stamp of outaged branches)`.
pub fn build_contingency_delta(case: &GridCase, id: &str, outages: &[BranchRef]) -> Result<ContingencySpec, NetworkError> {
    let ordering = BusOrdering::new(case);
    let mut acc: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
    let mut indices = Vec::with_capacity(outages.len());
    for r in outages {
        let k = case.find_branch(r.from, r.to, r.circuit).ok_or_else(|| NetworkError::UnknownBranch(r.to_string()))?;
        if indices.contains(&k) {
            return Err(NetworkError::Invalid(format!("branch {r} listed twice")));
        }
        let br = &case.branches[k];
        if !br.in_service() {
            return Err(NetworkError::BranchAlreadyOut(r.to_string()));
        }
        super::admittance::check_branch(k, br)?;
        indices.push(k);
        let f = ordering.internal[case.bus_position(br.from).unwrap()];
        let t = ordering.internal[case.bus_position(br.to).unwrap()];
        let (yff, yft, ytf, ytt) = branch_stamp(br);
        for (key, v) in [((f, f), yff), ((f, t), yft), ((t, f), ytf), ((t, t), ytt)] {
            *acc.entry(key).or_insert(Complex64::new(0.0, 0.0)) -= v;
        }
    }
    Ok(ContingencySpec {
        id: id.to_string(),
        outaged_branches: outages.to_vec(),
        branch_indices: indices,
        delta_y: acc.into_iter().map(|((i, j), v)| (i, j, v)).collect(),
    })
}

/// Parses a contingency CSV with header `contingency_id,from_bus,to_bus,circuit[,load_scale]`.
///
/// Rows sharing an id form one multi-element outage; ids keep first-appearance order.
pub fn parse_contingency_csv(text: &str) -> Result<Vec<ContingencyEntry>, NetworkError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| NetworkError::Parse { line: 1, msg: "empty contingency file".into() })?;
    let cols: Vec<String> = header.split(',').map(|c| c.trim().to_ascii_lowercase()).collect();
    let find = |name: &str| cols.iter().position(|c| c == name);
    let (Some(ci), Some(cf), Some(ct), Some(cc)) = (find("contingency_id"), find("from_bus"), find("to_bus"), find("circuit")) else {
        return Err(NetworkError::Parse { line: 1, msg: "header must contain contingency_id,from_bus,to_bus,circuit".into() });
    };
    let cs = find("load_scale");
    let mut out: Vec<ContingencyEntry> = Vec::new();
    let mut pos: BTreeMap<String, usize> = BTreeMap::new();
    for (k, line) in lines {
        let lineno = k + 1;
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |c: usize| f.get(c).copied().ok_or_else(|| NetworkError::Parse { line: lineno, msg: "missing column".into() });
        let num = |c: usize| -> Result<usize, NetworkError> {
            get(c)?.parse().map_err(|_| NetworkError::Parse { line: lineno, msg: format!("invalid integer '{}'", f[c]) })
        };
        let id = get(ci)?.to_string();
        let r = BranchRef { from: num(cf)?, to: num(ct)?, circuit: num(cc)? as u32 };
        let scale = match cs.and_then(|c| f.get(c)).filter(|s| !s.is_empty()) {
            Some(s) => Some(s.parse::<f64>().map_err(|_| NetworkError::Parse { line: lineno, msg: format!("invalid load scale '{s}'") })?),
            None => None,
        };
        match pos.get(&id) {
            Some(&p) => {
                let e = &mut out[p];
                if scale.is_some() && e.load_scale.is_some() && scale != e.load_scale {
                    return Err(NetworkError::Parse { line: lineno, msg: format!("conflicting load scale for {id}") });
                }
                e.load_scale = e.load_scale.or(scale);
                e.outages.push(r);
            }
            None => {
                pos.insert(id.clone(), out.len());
                out.push(ContingencyEntry { id, outages: vec![r], load_scale: scale });
            }
        }
    }
    Ok(out)
}

pub fn read_contingency_csv(path: impl AsRef<Path>) -> Result<Vec<ContingencyEntry>, NetworkError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| NetworkError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    parse_contingency_csv(&text)
}

pub fn write_contingency_csv(entries: &[ContingencyEntry]) -> String {
    let with_scale = entries.iter().any(|e| e.load_scale.is_some());
    let mut s = String::from("contingency_id,from_bus,to_bus,circuit");
    if with_scale {
        s.push_str(",load_scale");
    }
    s.push('\n');
    for e in entries {
        for r in &e.outages {
            let _ = write!(s, "{},{},{},{}", e.id, r.from, r.to, r.circuit);
            if with_scale {
                let _ = write!(s, ",{}", e.load_scale.map_or(String::new(), |v| format!("{v:?}")));
            }
            s.push('\n');
        }
    }
    s
}
