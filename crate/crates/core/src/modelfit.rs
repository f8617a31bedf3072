//! Estimation of the transformation parameter by profile likelihood and of
//! the parametric regression coefficients by least squares.

use serde::{Deserialize, Serialize};

use crate::data::{Matrix, Sample};
use crate::error::{Error, Result};
use crate::linalg::solve_in_place;
use crate::optimize::brent_minimize;
use crate::scalar::Scalar;
use crate::smoothing::{
    cv_select, default_grid, fitted_values, kde_at_rows, normal_reference_from_sd, sample_sd, BandwidthMode, BandwidthSpec, Kernel, NeighborIndex, Smoother,
};
use crate::transforms::TransformFamily;

/// Parametric regression class `m(x, beta)`.
pub trait RegressionFamily<T: Scalar>: Send + Sync {
    fn n_params(&self) -> usize;

    fn eval(&self, x: &[T], beta: &[T]) -> T;

    /// Writes `dm/dbeta (x, beta)` into `out`.
    fn gradient(&self, x: &[T], beta: &[T], out: &mut [T]);

    /// `true` when `m` is linear in `beta`, enabling the closed-form solve.
    fn is_linear(&self) -> bool {
        false
    }
}

/// `m(x, beta) = beta_1 + beta_2 x` on the first covariate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linear1D;

impl<T: Scalar> RegressionFamily<T> for Linear1D {
    fn n_params(&self) -> usize {
        2
    }

    #[inline]
    fn eval(&self, x: &[T], beta: &[T]) -> T {
        beta[0] + beta[1] * x[0]
    }

    fn gradient(&self, x: &[T], _beta: &[T], out: &mut [T]) {
        out[0] = T::one();
        out[1] = x[0];
    }

    fn is_linear(&self) -> bool {
        true
    }
}

/// Intercept plus one slope per covariate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Affine {
    pub dim: usize,
}

impl<T: Scalar> RegressionFamily<T> for Affine {
    fn n_params(&self) -> usize {
        self.dim + 1
    }

    fn eval(&self, x: &[T], beta: &[T]) -> T {
        x.iter().zip(&beta[1..]).fold(beta[0], |acc, (&xi, &b)| acc + b * xi)
    }

    fn gradient(&self, x: &[T], _beta: &[T], out: &mut [T]) {
        out[0] = T::one();
        out[1..].copy_from_slice(&x[..self.dim]);
    }

    fn is_linear(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthPolicy {
    /// Re-select the regression bandwidth for every candidate parameter.
    #[default]
    PerTheta,
    /// Select it once, at the midpoint of the search interval.
    Once,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileConfig {
    pub transform: TransformFamily,
    pub interval: (f64, f64),
    pub smoother: Smoother,
    pub regression_bandwidth: BandwidthSpec,
    /// Density values are floored here before taking logs.
    pub density_floor: f64,
    pub tolerance: f64,
    pub policy: BandwidthPolicy,
    /// Points of the coarse scan preceding the local search.
    pub coarse_points: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        let transform = TransformFamily::yeo_johnson();
        Self {
            transform,
            interval: transform.domain,
            smoother: Smoother::LocalLinear,
            regression_bandwidth: BandwidthSpec::cross_validation(Smoother::LocalLinear),
            density_floor: 1e-10,
            tolerance: 1e-6,
            policy: BandwidthPolicy::PerTheta,
            coarse_points: 16,
        }
    }
}

impl ProfileConfig {
    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.interval;
        if !(a <= b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Config(format!("empty search interval [{a}, {b}]")));
        }
        if !(self.density_floor > 0.0) {
            return Err(Error::Config("density floor must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("optimizer tolerance must be positive".into()));
        }
        self.regression_bandwidth.validate()
    }
}

/// Estimated transformation and regression parameters with residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel<T> {
    pub theta: T,
    pub beta: Vec<T>,
    /// `Lambda_theta(Y_i)`.
    pub z: Vec<T>,
    /// `Lambda_theta(Y_i) - m(X_i, beta)`.
    pub param_residuals: Vec<T>,
    /// `Lambda_theta(Y_i) - m_hat(X_i)` from the profile smoother.
    pub nonparam_residuals: Vec<T>,
    /// Mean of the squared parametric residuals.
    pub sigma2: T,
    /// Bandwidth of the profile smoother at `theta`.
    pub smoother_bandwidth: T,
}

/// Profile log-likelihood evaluator with the covariate index and (for
/// [`BandwidthPolicy::Once`]) the bandwidth cached.
pub struct ProfileObjective<'a, T: Scalar> {
    sample: &'a Sample<T>,
    cfg: &'a ProfileConfig,
    kernel: Kernel,
    index: NeighborIndex<T>,
    grid: Option<Vec<T>>,
    fixed_h: Option<T>,
}

impl<'a, T: Scalar> ProfileObjective<'a, T> {
    pub fn new(sample: &'a Sample<T>, cfg: &'a ProfileConfig) -> Result<Self> {
        cfg.validate()?;
        let kernel = Kernel::epanechnikov(sample.dim());
        let index = NeighborIndex::new(&sample.x);
        let grid = match &cfg.regression_bandwidth.mode {
            BandwidthMode::CrossValidation { grid: Some(g), .. } => Some(g.iter().map(|&v| T::lit(v)).collect()),
            BandwidthMode::CrossValidation { grid: None, .. } => Some(default_grid(&sample.x)),
            _ => None,
        };
        let mut obj = Self { sample, cfg, kernel, index, grid, fixed_h: None };
        if cfg.policy == BandwidthPolicy::Once {
            let mid = T::lit(0.5 * (cfg.interval.0 + cfg.interval.1));
            let z = cfg.transform.forward_all(mid, &sample.y)?;
            obj.fixed_h = Some(obj.bandwidth(&z)?);
        }
        Ok(obj)
    }

    fn bandwidth(&self, z: &[T]) -> Result<T> {
        if let Some(h) = self.fixed_h {
            return Ok(h);
        }
        let spec = &self.cfg.regression_bandwidth;
        match (&spec.mode, &self.grid) {
            (BandwidthMode::CrossValidation { smoother, .. }, Some(grid)) => {
                Ok(cv_select(&self.sample.x, z, *smoother, grid, &self.kernel, &self.index)? * T::lit(spec.multiplier))
            }
            _ => spec.resolve(&self.sample.x, z, &self.kernel),
        }
    }

    /// Regression bandwidth and smoother residuals at `theta`.
    pub fn residuals(&self, theta: T) -> Result<(Vec<T>, Vec<T>, T)> {
        let z = self.cfg.transform.forward_all(theta, &self.sample.y)?;
        let h = self.bandwidth(&z)?;
        let m = fitted_values(&self.sample.x, &z, h, &self.kernel, self.cfg.smoother)?;
        let eps: Vec<T> = z.iter().zip(&m).map(|(&a, &b)| a - b).collect();
        Ok((z, eps, h))
    }

    pub fn value(&self, theta: T) -> Result<T> {
        let (z, eps, _) = self.residuals(theta)?;
        let sd = sample_sd(&eps);
        let scale = z.iter().fold(T::one(), |m, &v| m.max(v.abs()));
        if !(sd > T::epsilon().sqrt() * T::lit(1e-4) * scale) {
            return Err(Error::DegenerateData("profile residuals have no spread".into()));
        }
        let g = normal_reference_from_sd(sd, eps.len());
        let dens = kde_at_rows(&Matrix::column(eps), g, &Kernel::epanechnikov(1));
        let floor = T::lit(self.cfg.density_floor);
        let mut total = T::zero();
        for (&f, &y) in dens.iter().zip(&self.sample.y) {
            total += f.max(floor).ln() + self.cfg.transform.d_dy(theta, y)?.ln();
        }
        Ok(total)
    }
}

/// `sum_i log f_eps(Lambda_theta(Y_i) - m_theta(X_i)) + log Lambda'_theta(Y_i)`.
pub fn profile_loglik<T: Scalar>(theta: T, sample: &Sample<T>, cfg: &ProfileConfig) -> Result<T> {
    ProfileObjective::new(sample, cfg)?.value(theta)
}

/// Maximiser of the profile likelihood over `cfg.interval`: a coarse scan
/// followed by Brent's method around the best scan point.
pub fn estimate_theta<T: Scalar>(sample: &Sample<T>, cfg: &ProfileConfig) -> Result<T> {
    if sample.len() < 10 {
        return Err(Error::DegenerateData(format!("need at least 10 observations, got {}", sample.len())));
    }
    let (a, b) = cfg.interval;
    cfg.validate()?;
    if b - a <= cfg.tolerance {
        return Ok(T::lit(a));
    }
    let obj = ProfileObjective::new(sample, cfg)?;
    let mut last_err = None;
    let mut eval = |t: f64| -> f64 {
        match obj.value(T::lit(t)) {
            Ok(v) if v.is_finite() => v.as_f64(),
            Ok(_) => f64::NEG_INFINITY,
            Err(e) => {
                last_err = Some(e);
                f64::NEG_INFINITY
            }
        }
    };
    let m = cfg.coarse_points.max(3);
    let grid: Vec<f64> = (0..m).map(|i| a + (b - a) * i as f64 / (m - 1) as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&t| eval(t)).collect();
    let (best, best_val) = values.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    if best_val == f64::NEG_INFINITY {
        return Err(last_err.unwrap_or_else(|| Error::DegenerateData("profile likelihood undefined".into())));
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(m - 1)];
    let (t, neg) = brent_minimize(|t| -eval(t), lo, hi, cfg.tolerance, 100);
    Ok(T::lit(if -neg > best_val { t } else { grid[best] }))
}

/// Least-squares coefficients for responses `z`; closed form for linear
/// families, Gauss-Newton from `init` otherwise.
pub fn least_squares<T: Scalar, F: RegressionFamily<T> + ?Sized>(x: &Matrix<T>, z: &[T], fam: &F, init: &[T]) -> Result<Vec<T>> {
    let q = fam.n_params();
    if init.len() != q {
        return Err(Error::Config(format!("initial value has length {}, family needs {q}", init.len())));
    }
    if z.len() < q {
        return Err(Error::DegenerateData(format!("need at least {q} observations")));
    }
    if fam.is_linear() {
        let zero = vec![T::zero(); q];
        let (mut a, mut b) = normal_equations(x, z, fam, &zero, |_, zi| zi);
        let mut inv = vec![T::zero(); q * q];
        solve_in_place(&mut a, &mut b, &mut inv, q)?;
        return Ok(b);
    }
    gauss_newton(x, z, fam, init)
}

fn normal_equations<T: Scalar, F: RegressionFamily<T> + ?Sized>(
    x: &Matrix<T>,
    z: &[T],
    fam: &F,
    beta: &[T],
    target: impl Fn(&[T], T) -> T,
) -> (Vec<T>, Vec<T>) {
    let q = fam.n_params();
    let mut a = vec![T::zero(); q * q];
    let mut b = vec![T::zero(); q];
    let mut g = vec![T::zero(); q];
    for (i, &zi) in z.iter().enumerate() {
        let xi = x.row(i);
        fam.gradient(xi, beta, &mut g);
        let r = target(xi, zi);
        for r_ in 0..q {
            b[r_] += g[r_] * r;
            for c in r_..q {
                a[r_ * q + c] += g[r_] * g[c];
            }
        }
    }
    for r_ in 0..q {
        for c in 0..r_ {
            a[r_ * q + c] = a[c * q + r_];
        }
    }
    (a, b)
}

fn sse<T: Scalar, F: RegressionFamily<T> + ?Sized>(x: &Matrix<T>, z: &[T], fam: &F, beta: &[T]) -> T {
    z.iter().enumerate().fold(T::zero(), |s, (i, &zi)| {
        let r = zi - fam.eval(x.row(i), beta);
        s + r * r
    })
}

const GN_MAX_ITER: usize = 200;
const GN_GRAD_TOL: f64 = 1e-8;

fn gauss_newton<T: Scalar, F: RegressionFamily<T> + ?Sized>(x: &Matrix<T>, z: &[T], fam: &F, init: &[T]) -> Result<Vec<T>> {
    let q = fam.n_params();
    let mut beta = init.to_vec();
    let mut current = sse(x, z, fam, &beta);
    let mut inv = vec![T::zero(); q * q];
    for it in 0..GN_MAX_ITER {
        let (mut a, mut step) = normal_equations(x, z, fam, &beta, |xi, zi| zi - fam.eval(xi, &beta));
        let grad_norm = step.iter().fold(T::zero(), |s, &v| s + v * v).sqrt();
        if grad_norm < T::lit(GN_GRAD_TOL) {
            return Ok(beta);
        }
        if solve_in_place(&mut a, &mut step, &mut inv, q).is_err() {
            return Err(Error::NoConvergence { iterations: it, last: beta.iter().map(|v| v.as_f64()).collect() });
        }
        let mut scale = T::one();
        let mut improved = false;
        for _ in 0..40 {
            let trial: Vec<T> = beta.iter().zip(&step).map(|(&b, &s)| b + scale * s).collect();
            let val = sse(x, z, fam, &trial);
            if val <= current {
                let moved = trial.iter().zip(&beta).fold(T::zero(), |s, (&p, &q)| s.max((p - q).abs()));
                beta = trial;
                improved = val < current || moved == T::zero();
                current = val;
                break;
            }
            scale *= T::lit(0.5);
        }
        if !improved {
            // no further decrease possible in floating point
            return Ok(beta);
        }
    }
    Err(Error::NoConvergence { iterations: GN_MAX_ITER, last: beta.iter().map(|v| v.as_f64()).collect() })
}

/// `argmin_beta sum_i (Lambda_theta(Y_i) - m(X_i, beta))^2`.
pub fn least_squares_beta<T: Scalar, F: RegressionFamily<T> + ?Sized>(
    theta: T,
    sample: &Sample<T>,
    transform: &TransformFamily,
    fam: &F,
    init: &[T],
) -> Result<Vec<T>> {
    let z = transform.forward_all(theta, &sample.y)?;
    least_squares(&sample.x, &z, fam, init)
}

/// Full fit: profile-likelihood `theta`, then coefficients and residuals.
pub fn fit<T: Scalar, F: RegressionFamily<T> + ?Sized>(sample: &Sample<T>, fam: &F, cfg: &ProfileConfig) -> Result<FittedModel<T>> {
    let theta = estimate_theta(sample, cfg)?;
    fit_at_theta(theta, sample, fam, cfg)
}

/// Coefficients and residuals with the transformation parameter held at `theta`.
pub fn fit_at_theta<T: Scalar, F: RegressionFamily<T> + ?Sized>(theta: T, sample: &Sample<T>, fam: &F, cfg: &ProfileConfig) -> Result<FittedModel<T>> {
    let obj = ProfileObjective::new(sample, cfg)?;
    let (z, nonparam_residuals, h) = obj.residuals(theta)?;
    let beta = least_squares(&sample.x, &z, fam, &vec![T::zero(); fam.n_params()])?;
    let param_residuals: Vec<T> = z.iter().enumerate().map(|(i, &zi)| zi - fam.eval(sample.x.row(i), &beta)).collect();
    let sigma2 = param_residuals.iter().fold(T::zero(), |s, &e| s + e * e) / T::from_usize_lossy(z.len());
    Ok(FittedModel { theta, beta, z, param_residuals, nonparam_residuals, sigma2, smoother_bandwidth: h })
}
