use std::ops::{Add, Mul};

use num_complex::Complex64;

/// `sum_{k=0..=n} x[k] * y[n-k]`.
pub fn convolve<T>(x: &[T], y: &[T], n: usize) -> T
where
    T: Copy + Default + Add<Output = T> + Mul<Output = T>,
{
    assert!(x.len() > n && y.len() > n, "sequences shorter than order {n}");
    (0..=n).fold(T::default(), |acc, k| acc + x[k] * y[n - k])
}

/// Coefficients of one embedding stage for the unknown buses of a block.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HeSeries {
    /// `v[n][i] = C[n][i] + j D[n][i]`.
    pub v: Vec<Vec<Complex64>>,
    /// `w[n][i] = E[n][i] + j F[n][i]`.
    pub w: Vec<Vec<Complex64>>,
    /// Reactive injection coefficients of PV buses.
    pub q: Vec<Vec<f64>>,
}

impl HeSeries {
    pub fn new(v0: Vec<Complex64>, w0: Vec<Complex64>, q0: Vec<f64>) -> Self {
        Self { v: vec![v0], w: vec![w0], q: vec![q0] }
    }

    /// Highest stored order.
    pub fn order(&self) -> usize {
        self.v.len() - 1
    }

    pub fn c(&self, n: usize) -> Vec<f64> {
        self.v[n].iter().map(|z| z.re).collect()
    }

    pub fn d(&self, n: usize) -> Vec<f64> {
        self.v[n].iter().map(|z| z.im).collect()
    }

    pub fn e(&self, n: usize) -> Vec<f64> {
        self.w[n].iter().map(|z| z.re).collect()
    }

    pub fn f(&self, n: usize) -> Vec<f64> {
        self.w[n].iter().map(|z| z.im).collect()
    }

    pub fn push(&mut self, v: Vec<Complex64>, w: Vec<Complex64>, q: Vec<f64>) {
        self.v.push(v);
        self.w.push(w);
        self.q.push(q);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_convolution() {
        assert_eq!(convolve(&[1.0, 2.0], &[3.0, 4.0], 1), 10.0);
    }

    fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    proptest! {
        #[test]
        fn identity_element(x in proptest::collection::vec(-10.0f64..10.0, 6), n in 0usize..6) {
            let mut e = vec![0.0; 6];
            e[0] = 1.0;
            prop_assert_eq!(convolve(&x, &e, n), x[n]);
        }

        #[test]
        fn matches_polynomial_product(x in proptest::collection::vec(-10.0f64..10.0, 6),
                                      y in proptest::collection::vec(-10.0f64..10.0, 6)) {
            let p = poly_mul(&x, &y);
            for n in 0..6 {
                prop_assert!((convolve(&x, &y, n) - p[n]).abs() <= 1e-12 * (1.0 + p[n].abs()));
            }
        }
    }
}
