use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::network::{parse_case, Branch, Bus, BusKind, GridCase, NetworkError};
use crate::phe::{PartitionSpec, SubsystemSpec};

/// Series impedance of every tie line between the main system and a replica.
pub const TIE_IMPEDANCE: Complex64 = Complex64::new(0.002, 0.02);

/// Main-system buses receiving one feeder replica each in the 419-bus build.
pub const SYN419_TIES: [usize; 7] = [15, 41, 49, 69, 88, 89, 96];

/// Load factor applied to every feeder replica.
pub const FEEDER_LOAD_FACTOR: f64 = 0.4;

/// Tie branches (main bus, replica bus) of replicas 2..=9 of the Polish build.
pub const POLISH_TIES: [(usize, &[(usize, usize)]); 8] = [
    (2, &[(18, 18)]),
    (3, &[(448, 445), (474, 475)]),
    (4, &[(2254, 2248), (2247, 2250)]),
    (5, &[(1089, 1092), (1100, 1095)]),
    (6, &[(673, 665)]),
    (7, &[(1354, 1356), (1544, 1547), (738, 739)]),
    (8, &[(1100, 1092), (1089, 1095)]),
    (9, &[(146, 148)]),
];

/// Bus-id offset of Polish replica `r` (1-based; replica 1 keeps its ids).
pub fn polish_offset(r: usize) -> usize {
    (r - 1) * 10000
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Recipe {
    /// 118-bus main system with one feeder at bus 88.
    Syn161,
    /// 118-bus main system with seven feeders.
    Syn419,
    /// Nine Polish replicas.
    Polish9,
    /// Polish replicas 1 to 3 only.
    Polish3,
}

impl Recipe {
    pub const ALL: [Recipe; 4] = [Recipe::Syn161, Recipe::Syn419, Recipe::Polish9, Recipe::Polish3];

    /// Input case files, relative to the data directory.
    pub fn inputs(self) -> &'static [&'static str] {
        match self {
            Recipe::Syn161 | Recipe::Syn419 => &["case118.m", "case43_radial.m"],
            Recipe::Polish9 | Recipe::Polish3 => &["case2383wp.m"],
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Recipe::Syn161 => "syn161",
            Recipe::Syn419 => "syn419",
            Recipe::Polish9 => "polish9",
            Recipe::Polish3 => "polish3",
        };
        f.write_str(s)
    }
}

impl FromStr for Recipe {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown recipe `{s}` (expected syn161, syn419, polish9 or polish3)"))
    }
}

/// A synthetic multi-area case with its partition.
#[derive(Clone, Debug)]
pub struct SyntheticBuild {
    pub case: GridCase,
    pub partition: PartitionSpec,
}

/// Copy of `case` with ids shifted by `offset`, loads scaled by `load_factor` and the slack bus
/// turned into `slack_kind` (PQ or PV, keeping its dispatch).
fn replica(case: &GridCase, offset: usize, load_factor: f64, slack_kind: BusKind) -> (Vec<Bus>, Vec<Branch>) {
    let buses = case
        .buses
        .iter()
        .map(|b| {
            let mut b = b.clone();
            b.id += offset;
            b.load *= load_factor;
            if b.kind == BusKind::Slack {
                b.kind = slack_kind;
                b.v_angle_sp = 0.0;
                if slack_kind == BusKind::PQ {
                    b.gen = Complex64::new(0.0, 0.0);
                }
            }
            b
        })
        .collect();
    let branches = case
        .branches
        .iter()
        .map(|br| {
            let mut br = br.clone();
            br.from += offset;
            br.to += offset;
            br
        })
        .collect();
    (buses, branches)
}

/// Main system with one feeder replica tied to each bus of `ties`.
///
/// Replica `s` (1-based) maps feeder bus `k` to `1000 s + k`; its supply bus (the feeder's slack)
/// becomes an unloaded PQ bus tied to the main system. The main system's non-slack active
/// generation is scaled up to carry the added load.
pub fn build_feeder_system(name: &str, main: &GridCase, feeder: &GridCase, ties: &[usize]) -> Result<SyntheticBuild, NetworkError> {
    let supply = *feeder.slack_ids.iter().next().ok_or(NetworkError::NoSlack(0))?;
    if feeder.buses.iter().map(|b| b.id).max().unwrap_or(0) >= 1000 {
        return Err(NetworkError::Invalid("feeder bus ids must be below 1000".into()));
    }
    let mut buses = main.buses.clone();
    let mut branches = main.branches.clone();
    let mut partition = PartitionSpec { main: main.buses.iter().map(|b| b.id).collect(), subsystems: Vec::new() };
    let mut added = 0.0;
    for (s, &tie) in ties.iter().enumerate() {
        if main.bus(tie).is_none() {
            return Err(NetworkError::Invalid(format!("tie bus {tie} is not in the main system")));
        }
        let offset = 1000 * (s + 1);
        let (rb, rbr) = replica(feeder, offset, FEEDER_LOAD_FACTOR, BusKind::PQ);
        added += rb.iter().map(|b| b.load.re - b.gen.re).sum::<f64>();
        partition.subsystems.push(SubsystemSpec {
            name: format!("feeder{}", s + 1),
            internal: rb.iter().map(|b| b.id).collect(),
            boundary: vec![tie],
        });
        buses.extend(rb);
        branches.extend(rbr);
        branches.push(Branch::line(tie, offset + supply, TIE_IMPEDANCE, 0.0));
    }
    let p_gen: f64 = buses.iter().take(main.n_buses()).filter(|b| b.kind != BusKind::Slack).map(|b| b.gen.re).sum();
    if p_gen > 0.0 {
        let f = (p_gen + added) / p_gen;
        for b in buses.iter_mut().take(main.n_buses()).filter(|b| b.kind != BusKind::Slack) {
            b.gen.re *= f;
        }
    }
    let case = GridCase::new(name, main.base_mva, buses, branches)?;
    Ok(SyntheticBuild { case, partition })
}

/// `replicas` copies of `base` (3 or 9) tied per the Polish connection table.
///
/// Replica 1 is the main system; every other replica's slack becomes a PV bus keeping its
/// dispatch and voltage setpoint.
pub fn build_polish(name: &str, base: &GridCase, replicas: usize) -> Result<SyntheticBuild, NetworkError> {
    if !(1..=9).contains(&replicas) {
        return Err(NetworkError::Invalid(format!("replica count {replicas} outside 1..=9")));
    }
    let mut buses = base.buses.clone();
    let mut branches = base.branches.clone();
    let mut partition = PartitionSpec { main: base.buses.iter().map(|b| b.id).collect(), subsystems: Vec::new() };
    for &(r, ties) in POLISH_TIES.iter().filter(|(r, _)| *r <= replicas) {
        let offset = polish_offset(r);
        let (rb, rbr) = replica(base, offset, 1.0, BusKind::PV);
        let mut boundary: Vec<usize> = Vec::new();
        for &(m, s) in ties {
            if base.bus(m).is_none() || base.bus(s).is_none() {
                return Err(NetworkError::Invalid(format!("tie {m}-{s} references a bus missing from the base case")));
            }
            if !boundary.contains(&m) {
                boundary.push(m);
            }
            branches.push(Branch::line(m, offset + s, TIE_IMPEDANCE, 0.0));
        }
        partition.subsystems.push(SubsystemSpec { name: format!("replica{r}"), internal: rb.iter().map(|b| b.id).collect(), boundary });
        buses.extend(rb);
        branches.extend(rbr);
    }
    let case = GridCase::new(name, base.base_mva, buses, branches)?;
    Ok(SyntheticBuild { case, partition })
}

/// Builds `recipe` from the case files in `data_dir`.
pub fn build_recipe(recipe: Recipe, data_dir: impl AsRef<Path>) -> Result<SyntheticBuild, NetworkError> {
    let dir = data_dir.as_ref();
    let load = |f: &str| parse_case(dir.join(f));
    let name = recipe.to_string();
    match recipe {
        Recipe::Syn161 => build_feeder_system(&name, &load("case118.m")?, &load("case43_radial.m")?, &[88]),
        Recipe::Syn419 => build_feeder_system(&name, &load("case118.m")?, &load("case43_radial.m")?, &SYN419_TIES),
        Recipe::Polish9 => build_polish(&name, &load("case2383wp.m")?, 9),
        Recipe::Polish3 => build_polish(&name, &load("case2383wp.m")?, 3),
    }
}
