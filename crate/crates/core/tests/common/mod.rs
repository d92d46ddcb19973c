#![allow(dead_code)]

use std::path::PathBuf;

use gridhe::baseline::solve_base_state;
use gridhe::he::{BaseStage, HeConfig, HeSeries, MonolithicEngine, SolveReport, StageEngine};
use gridhe::network::{build_contingency_delta, check_connectivity, BranchRef, ContingencySpec, GridCase, PowerFlowModel};
use gridhe::parallel::PartitionedBase;
use gridhe::phe::{partition_case, PartitionSpec};
use gridhe::synthetic::{build_recipe, Recipe};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Monolithic and partitioned base artifacts of one case.
pub struct Fixture {
    pub case: GridCase,
    pub partition: PartitionSpec,
    pub model: PowerFlowModel,
    pub he: BaseStage,
    pub phe: PartitionedBase,
}

impl Fixture {
    pub fn new(case: GridCase, partition: PartitionSpec) -> Self {
        let model = PowerFlowModel::new(&case).unwrap();
        let state = solve_base_state(&model).unwrap();
        let he = BaseStage::new(&model, state.clone()).unwrap();
        let phe = PartitionedBase::new(partition_case(&case, &partition).unwrap(), state).unwrap();
        Self { case, partition, model, he, phe }
    }

    pub fn recipe(r: Recipe) -> Self {
        let b = build_recipe(r, data_dir()).unwrap();
        Self::new(b.case, b.partition)
    }

    /// Single-branch outages that keep the network connected.
    pub fn connected_n1(&self) -> Vec<ContingencySpec> {
        self.case
            .branches
            .iter()
            .filter(|b| b.in_service())
            .filter_map(|b| {
                let r = BranchRef { from: b.from, to: b.to, circuit: b.circuit };
                let spec = build_contingency_delta(&self.case, &r.to_string(), &[r]).unwrap();
                (check_connectivity(&self.case, &spec).len() == 1).then_some(spec)
            })
            .collect()
    }
}

/// Largest per-order difference of the stacked coefficient vector `[v; w; q]`, in the infinity norm
/// relative to `max(1, |x[n]|)`.
pub fn series_diff(a: &HeSeries, b: &HeSeries) -> f64 {
    assert_eq!(a.order(), b.order());
    let mut d = 0.0f64;
    for n in 0..=a.order() {
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for (x, y) in a.v[n].iter().zip(&b.v[n]).chain(a.w[n].iter().zip(&b.w[n])) {
            num = num.max((x - y).norm());
            den = den.max(x.norm());
        }
        for (x, y) in a.q[n].iter().zip(&b.q[n]) {
            num = num.max((x - y).abs());
            den = den.max(x.abs());
        }
        d = d.max(num / den.max(1.0));
    }
    d
}

/// Rebuilds every stage of a captured partitioned solve with the monolithic engine, started from
/// the same stage-start state and cumulative alpha, and returns the largest coefficient difference.
pub fn per_stage_coefficient_diff(base: &BaseStage, spec: &ContingencySpec, cfg: &HeConfig, phe: &SolveReport) -> f64 {
    let series = phe.series.as_ref().expect("captured series");
    let mut worst = 0.0f64;
    for (s, stage_series) in series.iter().enumerate() {
        let alpha_done = if s == 0 { 0.0 } else { phe.continuation.stages[s - 1].reached_alpha };
        let mut engine = MonolithicEngine::new(base, &spec.delta_y, cfg);
        if s > 0 {
            engine = engine.starting_from(stage_series.v[0].clone(), stage_series.q[0].clone());
        }
        engine.begin_stage(alpha_done).unwrap();
        worst = worst.max(series_diff(engine.series(), stage_series));
    }
    worst
}
