use serde::{Deserialize, Serialize};

/// Cost constants of the operation-count model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// Right-hand-side generation cost per bus, taken equal for every order.
    pub c_r: f64,
}

impl Default for ComplexityConstants {
    fn default() -> Self {
        Self { c0: 60.0, c1: 40.0, c2: 9.0, c_r: 40.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityInput {
    /// Main-system buses.
    pub n_m: f64,
    /// Buses per subsystem.
    pub n_s: f64,
    /// Number of subsystems.
    pub k: f64,
    /// Boundary buses per subsystem.
    pub n_b: f64,
    /// Series order.
    pub order: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityEstimate {
    /// Operations of monolithic HE.
    pub m1: f64,
    /// Operations of partitioned HE.
    pub m2: f64,
}

/// Operation counts of monolithic (`m1`) and partitioned (`m2`) HE.
pub fn estimate_complexity(x: &ComplexityInput, c: &ComplexityConstants) -> ComplexityEstimate {
    let ComplexityInput { n_m, n_s, k, n_b, order } = *x;
    let total = n_m + k * n_s;
    let rhs = order * c.c_r * total;
    let m1 = c.c0 * total.powi(3) + order * c.c1 * total.powi(2) + rhs;
    let m2 = c.c0 * (n_m.powi(3) + k * n_s.powi(3))
        + 2.0 * k * n_b * c.c1 * n_s * n_s
        + order * c.c1 * (n_m * n_m + k * n_s * n_s)
        + rhs
        + 2.0 * order * k * c.c2 * n_b * n_s;
    ComplexityEstimate { m1, m2 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn input(n_m: f64, n_s: f64, k: f64, n_b: f64) -> ComplexityInput {
        ComplexityInput { n_m, n_s, k, n_b, order: 10.0 }
    }

    #[test]
    fn polish_sized_partition_is_cheaper() {
        let e = estimate_complexity(&input(2383.0, 2383.0, 8.0, 2.0), &ComplexityConstants::default());
        // direct evaluation of both formulas
        let (c0, c1, c2, cr) = (60.0, 40.0, 9.0, 40.0);
        let t: f64 = 2383.0 * 9.0;
        let m1 = c0 * t.powi(3) + 10.0 * c1 * t * t + 10.0 * cr * t;
        let s: f64 = 2383.0;
        let m2 = c0 * (s.powi(3) + 8.0 * s.powi(3)) + 2.0 * 8.0 * 2.0 * c1 * s * s + 10.0 * c1 * (s * s + 8.0 * s * s) + 10.0 * cr * t + 2.0 * 10.0 * 8.0 * c2 * 2.0 * s;
        assert_eq!(e.m1, m1);
        assert!((e.m2 - m2).abs() <= 1e-12 * m2);
        assert!(e.m2 < e.m1);
    }

    #[test]
    fn no_subsystems_leave_overheads_only() {
        let e = estimate_complexity(&input(500.0, 100.0, 0.0, 2.0), &ComplexityConstants::default());
        assert_eq!(e.m1, e.m2);
    }

    #[test]
    fn advantage_grows_with_subsystem_count() {
        let c = ComplexityConstants::default();
        let mut prev = f64::NEG_INFINITY;
        for k in 1..20 {
            let e = estimate_complexity(&input(1000.0, 800.0, k as f64, 3.0), &c);
            let gap = e.m1 - e.m2;
            assert!(gap > prev);
            prev = gap;
        }
    }

    proptest! {
        #[test]
        fn partition_wins_with_small_boundaries(
            n_m in 20.0f64..5000.0, n_s in 20.0f64..5000.0, k in 1u32..20, frac in 0.0f64..=1.0
        ) {
            let n_b = (0.05 * n_m.min(n_s) * frac).max(1.0).floor();
            prop_assume!(n_b <= 0.05 * n_m.min(n_s));
            let e = estimate_complexity(&input(n_m.floor(), n_s.floor(), k as f64, n_b), &ComplexityConstants::default());
            prop_assert!(e.m2 < e.m1);
        }
    }
}
