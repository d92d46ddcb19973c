use super::HeError;
use crate::dense::{DenseLu, DenseMatrix};

/// Rational approximant `P(a) / Q(a)` of one real power series, with `Q(0) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PadeApproximant {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
}

fn horner(c: &[f64], a: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &x| acc * a + x)
}

impl PadeApproximant {
    /// Near-diagonal approximant from coefficients `c[0..=N]`.
    ///
    /// The denominator degree starts at `ceil(N/2)` and is lowered while the coefficient
    /// system is singular; numerator degree is `N` minus the denominator degree.
    pub fn from_series(c: &[f64]) -> Result<Self, HeError> {
        if c.len() < 3 {
            return Err(HeError::Pade("series order must be at least 2".into()));
        }
        let n = c.len() - 1;
        let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tail = c[1..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 || tail <= 1e-13 * scale {
            return Ok(Self { numerator: c.to_vec(), denominator: vec![1.0] });
        }
        let mut m = n.div_ceil(2);
        while m > 0 {
            let l = n - m;
            let coef = |k: isize| if k < 0 { 0.0 } else { c[k as usize] };
            let mut a = DenseMatrix::zeros(m, m);
            let mut rhs = vec![0.0; m];
            for r in 0..m {
                let k = (l + 1 + r) as isize;
                for j in 1..=m {
                    a[(r, j - 1)] = coef(k - j as isize);
                }
                rhs[r] = -coef(k);
            }
            if let Some(lu) = DenseLu::factor(&a, 1e-12) {
                let b = lu.solve(&rhs);
                if b.iter().all(|x| x.is_finite()) {
                    let mut den = vec![1.0];
                    den.extend_from_slice(&b);
                    let num = (0..=l)
                        .map(|k| (0..=k.min(m)).map(|j| den[j] * c[k - j]).sum())
                        .collect();
                    return Ok(Self { numerator: num, denominator: den });
                }
            }
            m -= 1;
        }
        Ok(Self { numerator: c.to_vec(), denominator: vec![1.0] })
    }

    pub fn evaluate(&self, a: f64) -> f64 {
        horner(&self.numerator, a) / horner(&self.denominator, a)
    }

    pub fn denominator_at(&self, a: f64) -> f64 {
        horner(&self.denominator, a)
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.numerator.len() - 1, self.denominator.len() - 1)
    }

    /// True when the denominator changes sign or vanishes on `[-1, 1]`.
    pub fn has_pole_in_unit_interval(&self) -> bool {
        if self.denominator.len() == 1 {
            return false;
        }
        let steps = 400;
        let mut prev = self.denominator_at(-1.0);
        for s in 1..=steps {
            let a = -1.0 + 2.0 * s as f64 / steps as f64;
            let q = self.denominator_at(a);
            if q == 0.0 || prev == 0.0 || q.signum() != prev.signum() {
                return true;
            }
            prev = q;
        }
        false
    }

    /// Taylor coefficients of `P / Q` through `order`.
    pub fn expand(&self, order: usize) -> Vec<f64> {
        let mut out = vec![0.0; order + 1];
        for k in 0..=order {
            let mut s = self.numerator.get(k).copied().unwrap_or(0.0);
            for j in 1..self.denominator.len().min(k + 1) {
                s -= self.denominator[j] * out[k - j];
            }
            out[k] = s;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn geometric_series_reproduced() {
        let p = PadeApproximant::from_series(&[1.0; 6]).unwrap();
        assert!((p.evaluate(0.9) - 10.0).abs() <= 1e-9);
        assert!(p.has_pole_in_unit_interval());
    }

    #[test]
    fn exponential_three_three() {
        let c: Vec<f64> = (0..=6u32).map(|k| 1.0 / (1..=k).map(f64::from).product::<f64>()).collect();
        let p = PadeApproximant::from_series(&c).unwrap();
        assert_eq!(p.degrees(), (3, 3));
        // [3/3] of exp is (120 + 60a + 12a^2 + a^3) / (120 - 60a + 12a^2 - a^3); at a = 1 this is 193/71
        assert!((p.evaluate(1.0) - 193.0 / 71.0).abs() < 1e-13);
        assert!((p.evaluate(1.0) - 1f64.exp()).abs() < 3e-5);
        assert!(!p.has_pole_in_unit_interval());
    }

    #[test]
    fn exponential_four_four_within_1e6() {
        let c: Vec<f64> = (0..=8u32).map(|k| 1.0 / (1..=k).map(f64::from).product::<f64>()).collect();
        let p = PadeApproximant::from_series(&c).unwrap();
        assert!((p.evaluate(1.0) - 1f64.exp()).abs() <= 1e-6);
    }

    #[test]
    fn constant_series() {
        let p = PadeApproximant::from_series(&[2.5, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.denominator, vec![1.0]);
        assert_eq!(p.evaluate(0.7), 2.5);
    }

    #[test]
    fn short_series_rejected() {
        assert!(PadeApproximant::from_series(&[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn matches_series_through_order_n(c in proptest::collection::vec(-1.0f64..1.0, 5..11)) {
            let p = PadeApproximant::from_series(&c).unwrap();
            prop_assert!((p.denominator[0] - 1.0).abs() == 0.0);
            let (l, _) = p.degrees();
            for k in 0..c.len() {
                let qc: f64 = (0..p.denominator.len().min(k + 1)).map(|j| p.denominator[j] * c[k - j]).sum();
                let target = if k <= l { p.numerator[k] } else { 0.0 };
                let bound: f64 = p.denominator.iter().map(|b| b.abs()).sum::<f64>() * 1e-12;
                prop_assert!((qc - target).abs() <= bound, "order {}: {} vs {}", k, qc, target);
            }
        }
    }
}
