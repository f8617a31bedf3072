//! Synthetic designs for the lack-of-fit and significance experiments.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Matrix, Sample};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::significance::SigSample;
use crate::transforms::yeo_johnson_inverse;

/// Shape of the departure from the linear null model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviationKind {
    Zero,
    /// `c x^2`
    Quadratic,
    /// `c exp(x)`
    Exponential,
    /// `c sin(2 pi x)`
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub kind: DeviationKind,
    pub amplitude: f64,
}

impl Deviation {
    pub const ZERO: Deviation = Deviation { kind: DeviationKind::Zero, amplitude: 0.0 };

    pub fn new(kind: DeviationKind, amplitude: f64) -> Self {
        Self { kind, amplitude }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let c = self.amplitude;
        match self.kind {
            DeviationKind::Zero => 0.0,
            DeviationKind::Quadratic => c * x * x,
            DeviationKind::Exponential => c * x.exp(),
            DeviationKind::Sine => c * (2.0 * std::f64::consts::PI * x).sin(),
        }
    }

    /// Row label in the layout of the published tables.
    pub fn label(&self) -> String {
        let c = fmt_amplitude(self.amplitude);
        match self.kind {
            DeviationKind::Zero => "0".into(),
            DeviationKind::Quadratic => format!("{c}X^2"),
            DeviationKind::Exponential => format!("{c}exp(X)"),
            DeviationKind::Sine => format!("{c}sin(2piX)"),
        }
    }

    /// The thirteen rows of the lack-of-fit tables.
    pub fn table_rows() -> Vec<Deviation> {
        let mut rows = vec![Deviation::ZERO];
        for c in [2.0, 3.0, 4.0, 5.0] {
            rows.push(Deviation::new(DeviationKind::Quadratic, c));
        }
        for c in [2.0, 3.0, 4.0, 5.0] {
            rows.push(Deviation::new(DeviationKind::Exponential, c));
        }
        for c in [0.25, 0.5, 0.75, 1.0] {
            rows.push(Deviation::new(DeviationKind::Sine, c));
        }
        rows
    }
}

fn fmt_amplitude(c: f64) -> String {
    if c.fract() == 0.0 {
        format!("{}", c as i64)
    } else {
        format!("{c}")
    }
}

/// Lack-of-fit design `Lambda_theta0(Y) = 3 + 5X + Delta(X) + eps` with
/// `X ~ U[0,1]` and `eps` standard normal truncated to `[-3, 3]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LofScenario {
    pub theta0: f64,
    pub n: usize,
    pub deviation: Deviation,
    /// When set to a bandwidth `h`, the deviation is scaled by
    /// `n^{-1/2} h^{-1/4}` (local alternative).
    pub local_bandwidth: Option<f64>,
}

impl LofScenario {
    pub fn new(theta0: f64, n: usize, deviation: Deviation) -> Self {
        Self { theta0, n, deviation, local_bandwidth: None }
    }

    pub fn null(theta0: f64, n: usize) -> Self {
        Self::new(theta0, n, Deviation::ZERO)
    }

    pub fn scale(&self) -> f64 {
        match self.local_bandwidth {
            Some(h) => (self.n as f64).powf(-0.5) * h.powf(-0.25),
            None => 1.0,
        }
    }

    /// Regression function `3 + 5x + Delta(x)` on the transformed scale.
    pub fn regression(&self, x: f64) -> f64 {
        3.0 + 5.0 * x + self.scale() * self.deviation.eval(x)
    }

    pub fn describe(&self) -> String {
        format!("lof theta0={} n={} delta={}", self.theta0, self.n, self.deviation.label())
    }
}

/// Standard normal truncated to `[-bound, bound]` by rejection.
pub fn truncated_normal(rng: &mut impl Rng, bound: f64) -> f64 {
    loop {
        let e: f64 = rng.sample(StandardNormal);
        if e.abs() <= bound {
            return e;
        }
    }
}

pub fn gen_lof<T: Scalar>(sc: &LofScenario, rng: &mut impl Rng) -> Result<Sample<T>> {
    if sc.n == 0 {
        return Err(Error::Config("sample size must be positive".into()));
    }
    let mut x = Vec::with_capacity(sc.n);
    let mut y = Vec::with_capacity(sc.n);
    for _ in 0..sc.n {
        let xi: f64 = rng.random();
        let eps = truncated_normal(rng, 3.0);
        x.push(T::lit(xi));
        y.push(T::lit(yeo_johnson_inverse(sc.theta0, sc.regression(xi) + eps)?));
    }
    Sample::new(Matrix::column(x), y)
}

/// The seven significance designs, all with `(W, V) ~ U[0,1]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SigModel {
    /// `1 + W + eps` (null)
    M1,
    /// `W + V + eps`
    M2,
    /// `3 + 2W + 0.25 sin(2 pi V) + eps`
    M3,
    /// `1 + W + sin(5V) + eps`
    M4,
    /// `3 + 2W + 5 V^2 eps`
    M5,
    /// `1 + W + V^2 + eps`
    M6,
    /// `1 + W + exp(V^2) + eps`
    M7,
}

impl SigModel {
    pub const ALL: [SigModel; 7] = [SigModel::M1, SigModel::M2, SigModel::M3, SigModel::M4, SigModel::M5, SigModel::M6, SigModel::M7];

    pub fn from_id(id: &str) -> Result<Self> {
        let t = id.trim().trim_start_matches('(').trim_end_matches(')');
        let t = t.strip_prefix("5.").unwrap_or(t);
        let k: usize = t.parse().map_err(|_| Error::Config(format!("unknown model `{id}` (expected 5.1 to 5.7)")))?;
        SigModel::ALL.get(k.wrapping_sub(1)).copied().ok_or_else(|| Error::Config(format!("unknown model `{id}`")))
    }

    pub fn label(self) -> &'static str {
        match self {
            SigModel::M1 => "(5.1)",
            SigModel::M2 => "(5.2)",
            SigModel::M3 => "(5.3)",
            SigModel::M4 => "(5.4)",
            SigModel::M5 => "(5.5)",
            SigModel::M6 => "(5.6)",
            SigModel::M7 => "(5.7)",
        }
    }

    /// `E[Lambda(Y) | W, V]` without the local-alternative scaling of the
    /// `V` part, split as `(W part, V part)`.
    pub fn mean_parts(self, w: f64, v: f64) -> (f64, f64) {
        match self {
            SigModel::M1 => (1.0 + w, 0.0),
            SigModel::M2 => (w, v),
            SigModel::M3 => (3.0 + 2.0 * w, 0.25 * (2.0 * std::f64::consts::PI * v).sin()),
            SigModel::M4 => (1.0 + w, (5.0 * v).sin()),
            SigModel::M5 => (3.0 + 2.0 * w, 0.0),
            SigModel::M6 => (1.0 + w, v * v),
            SigModel::M7 => (1.0 + w, (v * v).exp()),
        }
    }

    /// Multiplier of the error term.
    pub fn error_scale(self, v: f64) -> f64 {
        match self {
            SigModel::M5 => 5.0 * v * v,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigScenario {
    pub model: SigModel,
    pub n: usize,
    pub theta0: f64,
    /// When set to a bandwidth `h`, the `V` part of the mean is scaled by
    /// `n^{-1/2} h^{-1/2}` (local alternative).
    pub local_bandwidth: Option<f64>,
}

impl SigScenario {
    pub fn new(model: SigModel, n: usize) -> Self {
        Self { model, n, theta0: 1.0, local_bandwidth: None }
    }

    pub fn scale(&self) -> f64 {
        match self.local_bandwidth {
            Some(h) => (self.n as f64).powf(-0.5) * h.powf(-0.5),
            None => 1.0,
        }
    }

    /// Transformed response for covariates `(w, v)` and error `eps`.
    pub fn response(&self, w: f64, v: f64, eps: f64) -> f64 {
        let (a, b) = self.model.mean_parts(w, v);
        a + self.scale() * b + self.model.error_scale(v) * eps
    }

    pub fn describe(&self) -> String {
        format!("sig model={} n={} theta0={}", self.model.label(), self.n, self.theta0)
    }
}

pub fn gen_sig<T: Scalar>(sc: &SigScenario, rng: &mut impl Rng) -> Result<SigSample<T>> {
    if sc.n == 0 {
        return Err(Error::Config("sample size must be positive".into()));
    }
    let (mut w, mut v, mut y) = (Vec::with_capacity(sc.n), Vec::with_capacity(sc.n), Vec::with_capacity(sc.n));
    for _ in 0..sc.n {
        let (wi, vi): (f64, f64) = (rng.random(), rng.random());
        let eps: f64 = rng.sample(StandardNormal);
        w.push(T::lit(wi));
        v.push(T::lit(vi));
        y.push(T::lit(yeo_johnson_inverse(sc.theta0, sc.response(wi, vi, eps))?));
    }
    SigSample::new(Matrix::column(w), Matrix::column(v), y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelfit::{least_squares, Linear1D};
    use crate::resampling::{Purpose, StreamSeed};
    use crate::transforms::yeo_johnson;

    #[test]
    fn lof_rows_satisfy_model_equation() {
        for theta0 in [0.0, 0.5, 1.0] {
            let sc = LofScenario::new(theta0, 300, Deviation::new(DeviationKind::Quadratic, 5.0));
            let s: Sample<f64> = gen_lof(&sc, &mut StreamSeed::new(1, 0, Purpose::Data).rng()).unwrap();
            for i in 0..s.len() {
                let eps = yeo_johnson(theta0, s.y[i]) - sc.regression(s.x.get(i, 0));
                assert!(eps.abs() <= 3.0 + 1e-9);
            }
        }
    }

    #[test]
    fn reproducible_and_identity_fit() {
        let sc = LofScenario::null(1.0, 2000);
        let key = StreamSeed::new(5, 1, Purpose::Data);
        let a: Sample<f64> = gen_lof(&sc, &mut key.rng()).unwrap();
        let b: Sample<f64> = gen_lof(&sc, &mut key.rng()).unwrap();
        assert_eq!(a, b);
        let beta = least_squares(&a.x, &a.y, &Linear1D, &[0.0, 0.0]).unwrap();
        assert!((beta[0] - 3.0).abs() < 0.15 && (beta[1] - 5.0).abs() < 0.25, "{beta:?}");
    }

    #[test]
    fn table_rows_and_labels() {
        let rows = Deviation::table_rows();
        assert_eq!(rows.len(), 13);
        assert_eq!(rows[0].label(), "0");
        assert_eq!(rows[1].label(), "2X^2");
        assert_eq!(rows[9].label(), "0.25sin(2piX)");
    }

    #[test]
    fn heteroscedastic_model_variance() {
        let sc = SigScenario::new(SigModel::M5, 200_000);
        let s: SigSample<f64> = gen_sig(&sc, &mut StreamSeed::new(2, 0, Purpose::Data).rng()).unwrap();
        // residual variance near v = 0.9 should be 25 v^4
        let (mut sum, mut cnt) = (0.0, 0.0);
        for i in 0..s.len() {
            let v = s.v.get(i, 0);
            if (v - 0.9).abs() < 0.01 {
                let r = s.y[i] - 3.0 - 2.0 * s.w.get(i, 0);
                sum += r * r;
                cnt += 1.0;
            }
        }
        let want = 25.0 * 0.9f64.powi(4);
        assert!((sum / cnt - want).abs() < 0.15 * want, "{} vs {want}", sum / cnt);
    }

    #[test]
    fn sig_rows_satisfy_model_equation() {
        for model in SigModel::ALL {
            let sc = SigScenario::new(model, 50);
            let mut rng = StreamSeed::new(3, 0, Purpose::Data).rng();
            let s: SigSample<f64> = gen_sig(&sc, &mut rng).unwrap();
            let mut rng = StreamSeed::new(3, 0, Purpose::Data).rng();
            for i in 0..50 {
                let (w, v): (f64, f64) = (rng.random(), rng.random());
                let eps: f64 = rng.sample(StandardNormal);
                assert!((yeo_johnson(1.0, s.y[i]) - sc.response(w, v, eps)).abs() < 1e-9);
            }
        }
        assert_eq!(SigModel::from_id("5.4").unwrap(), SigModel::M4);
        assert_eq!(SigModel::from_id("(5.7)").unwrap(), SigModel::M7);
        assert!(SigModel::from_id("5.9").is_err());
    }
}
