use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::pade::PadeApproximant;
use super::series::HeSeries;
use super::HeError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvalMode {
    Truncated,
    Pade,
}

/// Horner evaluation of every voltage and PV reactive channel at `alpha`.
pub fn evaluate_truncated(series: &HeSeries, alpha: f64) -> (Vec<Complex64>, Vec<f64>) {
    let n = series.v[0].len();
    let npv = series.q[0].len();
    let top = series.order();
    let mut v = series.v[top].clone();
    let mut q = series.q[top].clone();
    for k in (0..top).rev() {
        for i in 0..n {
            v[i] = v[i] * alpha + series.v[k][i];
        }
        for i in 0..npv {
            q[i] = q[i] * alpha + series.q[k][i];
        }
    }
    (v, q)
}

/// Per-channel Padé approximants of a stage series.
#[derive(Clone, Debug)]
pub struct SeriesApproximant {
    re: Vec<PadeApproximant>,
    im: Vec<PadeApproximant>,
    q: Vec<PadeApproximant>,
}

impl SeriesApproximant {
    pub fn build(series: &HeSeries) -> Result<Self, HeError> {
        let n = series.v[0].len();
        let npv = series.q[0].len();
        let chan = |f: &dyn Fn(usize) -> f64| -> Result<PadeApproximant, HeError> {
            let c: Vec<f64> = (0..=series.order()).map(f).collect();
            PadeApproximant::from_series(&c)
        };
        let re = (0..n).map(|i| chan(&|k| series.v[k][i].re)).collect::<Result<_, _>>()?;
        let im = (0..n).map(|i| chan(&|k| series.v[k][i].im)).collect::<Result<_, _>>()?;
        let q = (0..npv).map(|i| chan(&|k| series.q[k][i])).collect::<Result<_, _>>()?;
        Ok(Self { re, im, q })
    }

    pub fn evaluate(&self, alpha: f64) -> (Vec<Complex64>, Vec<f64>) {
        let v = self.re.iter().zip(&self.im).map(|(r, i)| Complex64::new(r.evaluate(alpha), i.evaluate(alpha))).collect();
        let q = self.q.iter().map(|p| p.evaluate(alpha)).collect();
        (v, q)
    }
}
