use num_complex::Complex64;

use crate::network::{Branch, Bus, BusKind, GridCase};

/// Slack bus 1 at `1∠0` feeding a constant-power load `load` (pu) at bus 2 through impedance `z`.
pub fn two_bus_case(load: Complex64, z: Complex64) -> GridCase {
    let mut slack = Bus::pq(1, Complex64::new(0.0, 0.0));
    slack.kind = BusKind::Slack;
    GridCase::new("two-bus", 100.0, vec![slack, Bus::pq(2, load)], vec![Branch::line(1, 2, z, 0.0)])
        .expect("valid two-bus case")
}

/// High and low voltage roots at bus 2 of [`two_bus_case`], or `None` beyond the nose point.
///
/// With `a = S conj(z)` the load bus voltage is `V = U + a` where `U = |V|^2` solves
/// `U^2 + (2 Re a - 1) U + |a|^2 = 0`.
pub fn two_bus_roots(load: Complex64, z: Complex64) -> Option<(Complex64, Complex64)> {
    let a = load * z.conj();
    let b = 2.0 * a.re - 1.0;
    let disc = b * b - 4.0 * a.norm_sqr();
    if disc < 0.0 {
        return None;
    }
    let hi = 0.5 * (-b + disc.sqrt());
    let lo = 0.5 * (-b - disc.sqrt());
    Some((hi + a, lo + a))
}

/// Three buses in a triangle: slack 1, PV bus 2 (generation `p_gen`, setpoint 1.02), PQ load bus 3.
pub fn three_bus_pv_case(p_gen: f64, load: Complex64) -> GridCase {
    let mut slack = Bus::pq(1, Complex64::new(0.0, 0.0));
    slack.kind = BusKind::Slack;
    slack.v_sp = 1.0;
    slack.v_angle_sp = 0.1;
    let mut pv = Bus::pq(2, Complex64::new(0.1, 0.03));
    pv.kind = BusKind::PV;
    pv.gen = Complex64::new(p_gen, 0.0);
    pv.v_sp = 1.02;
    let mut pq = Bus::pq(3, load);
    pq.shunt = Complex64::new(0.0, 0.05);
    let branches = vec![
        Branch::line(1, 2, Complex64::new(0.01, 0.08), 0.02),
        Branch::line(2, 3, Complex64::new(0.02, 0.12), 0.03),
        Branch::line(1, 3, Complex64::new(0.015, 0.1), 0.025),
        Branch::line(1, 3, Complex64::new(0.03, 0.2), 0.0),
    ];
    GridCase::new("three-bus", 100.0, vec![slack, pv, pq], branches).expect("valid three-bus case")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_satisfy_power_balance() {
        let load = Complex64::new(1.2, 0.4);
        let z = Complex64::new(0.02, 0.2);
        let (hi, lo) = two_bus_roots(load, z).unwrap();
        for v in [hi, lo] {
            let s = v * ((Complex64::new(1.0, 0.0) - v) / z).conj();
            assert!((s - load).norm() < 1e-12, "{s}");
        }
        assert!(hi.norm() > lo.norm());
    }

    #[test]
    fn no_roots_beyond_nose() {
        assert!(two_bus_roots(Complex64::new(5.0, 1.0), Complex64::new(0.0, 0.2)).is_none());
    }
}
