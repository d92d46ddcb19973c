mod common;

use common::{per_stage_coefficient_diff, Fixture};
use gridhe::he::{multi_stage_solve, HeConfig};
use gridhe::parallel::{run_p2he_single, run_phe_single, SolveOptions};
use gridhe::phe::{PartitionSpec, SubsystemSpec};
use gridhe::synthetic::Recipe;

fn capture() -> SolveOptions {
    SolveOptions { capture: true, ..SolveOptions::default() }
}

#[test]
fn syn161_phe_coefficients_and_states_match_he() {
    let f = Fixture::recipe(Recipe::Syn161);
    let cfg = HeConfig::default();
    let specs = f.connected_n1();
    assert!(specs.len() > 150);
    let (mut coef, mut state, mut survived) = (0.0f64, 0.0f64, 0);
    for spec in &specs {
        let he = multi_stage_solve(&f.he, spec, &cfg, false).unwrap();
        let phe = run_phe_single(&f.phe, spec, &cfg, &capture()).unwrap();
        assert_eq!(he.converged(), phe.report.converged(), "{}", spec.id);
        coef = coef.max(per_stage_coefficient_diff(&f.he, spec, &cfg, &phe.report));
        if let (Some(a), Some(b)) = (&he.state, &phe.report.state) {
            state = state.max(a.max_voltage_diff(b));
            survived += 1;
        }
    }
    assert!(coef <= 1e-10, "coefficient difference {coef:e}");
    assert!(state <= 1e-10, "state difference {state:e}");
    assert!(survived > 0);
}

#[test]
fn syn419_p2he_is_bitwise_phe_across_worker_counts() {
    let f = Fixture::recipe(Recipe::Syn419);
    let cfg = HeConfig::default();
    for spec in f.connected_n1().iter().step_by(9) {
        let phe = run_phe_single(&f.phe, spec, &cfg, &SolveOptions::default()).unwrap();
        for workers in [1, 2, 8] {
            let p2 = run_p2he_single(&f.phe, spec, &cfg, &SolveOptions { workers, ..SolveOptions::default() }).unwrap();
            assert_eq!(p2.report.state, phe.report.state, "{} with {workers} workers", spec.id);
            assert_eq!(p2.report.continuation, phe.report.continuation);
        }
    }
}

#[test]
fn polish3_partitioned_matches_monolithic() {
    let f = Fixture::recipe(Recipe::Polish3);
    let cfg = HeConfig::default();
    let specs = f.connected_n1();
    for spec in specs.iter().step_by(specs.len() / 3) {
        let he = multi_stage_solve(&f.he, spec, &cfg, false).unwrap();
        let phe = run_phe_single(&f.phe, spec, &cfg, &SolveOptions::default()).unwrap();
        if let (Some(a), Some(b)) = (&he.state, &phe.report.state) {
            assert!(a.max_voltage_diff(b) <= 1e-10, "{}: {:e}", spec.id, a.max_voltage_diff(b));
        } else {
            assert_eq!(he.converged(), phe.report.converged());
        }
        for workers in [2, 8] {
            let p2 = run_p2he_single(&f.phe, spec, &cfg, &SolveOptions { workers, ..SolveOptions::default() }).unwrap();
            assert_eq!(p2.report.state, phe.report.state);
        }
    }
}

#[test]
fn result_does_not_depend_on_partition() {
    let whole = Fixture::recipe(Recipe::Syn161);
    let mut spec = whole.partition.clone();
    let moved: SubsystemSpec = spec.subsystems.remove(0);
    spec.main.extend(moved.internal);
    let coarse = Fixture::new(whole.case.clone(), spec);
    let flat = Fixture::new(whole.case.clone(), PartitionSpec { main: whole.case.buses.iter().map(|b| b.id).collect(), subsystems: vec![] });
    let cfg = HeConfig::default();
    for c in whole.connected_n1().iter().step_by(17) {
        let reference = multi_stage_solve(&whole.he, c, &cfg, false).unwrap();
        for f in [&whole, &coarse, &flat] {
            let r = run_phe_single(&f.phe, c, &cfg, &SolveOptions::default()).unwrap();
            match (&reference.state, &r.report.state) {
                (Some(a), Some(b)) => assert!(a.max_voltage_diff(b) <= 1e-10, "{}", c.id),
                (a, b) => assert_eq!(a.is_some(), b.is_some(), "{}", c.id),
            }
        }
    }
}

#[test]
fn lower_order_series_also_match() {
    let f = Fixture::recipe(Recipe::Syn161);
    for order in [3, 6] {
        let cfg = HeConfig { order, ..HeConfig::default() };
        for spec in f.connected_n1().iter().step_by(23) {
            let phe = run_phe_single(&f.phe, spec, &cfg, &capture()).unwrap();
            let d = per_stage_coefficient_diff(&f.he, spec, &cfg, &phe.report);
            assert!(d <= 1e-10, "order {order} {}: {d:e}", spec.id);
        }
    }
}
