//! Lack-of-fit tests for the parametric regression function after
//! transformation: the integrated smoothed-residual statistic `T_n`, the
//! kernel U-statistic `V_n`, their plug-in nuisances and five calibrations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Matrix, Sample};
use crate::error::{Error, Result};
use crate::modelfit::{estimate_theta, least_squares, FittedModel, ProfileConfig, RegressionFamily};
use crate::pairs::neighbor_pairs;
use crate::report::{check_alpha, normal_upper_p, normal_upper_quantile, BootstrapPlan, LofStatistic, Method, Nuisance, TestReport, SCHEMA_VERSION};
use crate::resampling::{bootstrap_p_value, draw_multipliers, upper_quantile, Purpose, SmoothedResample, StreamSeed};
use crate::scalar::Scalar;
use crate::smoothing::{fitted_values, BandwidthSpec, Kernel, Smoother};
use crate::transforms::TransformFamily;

/// Default test bandwidth as a multiple of the normal reference rule on `X`.
/// Residuals from the parametric fit bias `V_n` downward by roughly a
/// multiple of `h^{d/2}`, so the default is small.
pub const DEFAULT_BANDWIDTH_SCALE: f64 = 0.075;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LofConfig {
    /// Kernel family; its dimension is taken from the covariates.
    pub kernel: Kernel,
    pub bandwidth: BandwidthSpec,
    pub alpha: f64,
    pub plan: BootstrapPlan,
    /// Used by the transformation bootstrap to re-estimate the parameter.
    pub profile: ProfileConfig,
    /// Evaluate `T_n` by quadrature of its integral form (d = 1 only).
    pub quadrature: bool,
}

impl Default for LofConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::epanechnikov(1),
            bandwidth: BandwidthSpec::normal_reference().scaled(DEFAULT_BANDWIDTH_SCALE),
            alpha: 0.10,
            plan: BootstrapPlan::default(),
            profile: ProfileConfig::default(),
            quadrature: false,
        }
    }
}

impl LofConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        self.bandwidth.validate()?;
        self.profile.validate()
    }

    /// Test bandwidth for covariates `x` and transformed responses `z`.
    pub fn resolve_h<T: Scalar>(&self, x: &Matrix<T>, z: &[T]) -> Result<T> {
        self.bandwidth.resolve(x, z, &self.kernel.with_dim(x.ncols()))
    }
}

/// Plug-in nuisance quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LofNuisance<T> {
    pub sigma2: T,
    /// Estimate of `int f_X^2`.
    pub s_hat: T,
    /// Variance estimate used to studentise `V_n`.
    pub sigma_hat: T,
    pub sigma_tilde: T,
    /// Bias of `T_n`.
    pub b_h: T,
    /// Variance of `T_n`.
    pub v_hat: T,
}

impl<T: Scalar> LofNuisance<T> {
    fn to_report(self) -> Nuisance {
        Nuisance {
            sigma2: Some(self.sigma2.as_f64()),
            s_hat: Some(self.s_hat.as_f64()),
            sigma_hat: Some(self.sigma_hat.as_f64()),
            sigma_tilde: Some(self.sigma_tilde.as_f64()),
            b_h: Some(self.b_h.as_f64()),
            v_hat: Some(self.v_hat.as_f64()),
            tau2: None,
        }
    }
}

/// Kernel weights of all covariate pairs in reach of each other, built once
/// per bandwidth and shared by every statistic and bootstrap replicate.
#[derive(Debug, Clone)]
pub struct LofWeights<T> {
    n: usize,
    h: T,
    kernel: Kernel,
    pairs: Vec<(u32, u32)>,
    /// `K_h(X_i - X_j)`.
    k: Vec<T>,
    /// `(K*K)_h(X_i - X_j)`.
    kk: Vec<T>,
    /// `K((X_i - X_j) / h)^2`.
    k_sq: Vec<T>,
    k0: T,
    kk0: T,
}

impl<T: Scalar> LofWeights<T> {
    pub fn new(x: &Matrix<T>, h: T, kernel: Kernel) -> Self {
        let kernel = kernel.with_dim(x.ncols());
        let reach = kernel.radius::<T>().map(|r| T::lit(2.0) * r * h);
        let hd = h.powi(x.ncols() as i32);
        let zeros = vec![T::zero(); x.ncols()];
        let mut out = Self {
            n: x.nrows(),
            h,
            kernel,
            pairs: Vec::new(),
            k: Vec::new(),
            kk: Vec::new(),
            k_sq: Vec::new(),
            k0: kernel.eval(&zeros) / hd,
            kk0: kernel.selfconv(&zeros) / hd,
        };
        for (i, j) in neighbor_pairs(x, reach) {
            let (a, b) = (x.row(i as usize), x.row(j as usize));
            let kk = kernel.selfconv_scaled(a, b, h);
            if kk == T::zero() {
                continue;
            }
            let w = kernel.weight(a, b, h);
            out.pairs.push((i, j));
            out.kk.push(kk);
            out.k.push(w / hd);
            out.k_sq.push(w * w);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bandwidth(&self) -> T {
        self.h
    }

    fn nf(&self) -> T {
        T::from_usize_lossy(self.n)
    }

    /// `(h^{d/2}/n) sum_i sum_j (K*K)_h(X_i - X_j) e_i e_j`.
    pub fn t(&self, e: &[T]) -> T {
        let diag = e.iter().fold(T::zero(), |s, &v| s + v * v) * self.kk0;
        let off = self.pairs.iter().zip(&self.kk).fold(T::zero(), |s, (&(i, j), &w)| s + w * e[i as usize] * e[j as usize]);
        self.kernel.half_power(self.h) / self.nf() * (diag + T::lit(2.0) * off)
    }

    /// `(n(n-1))^{-1} sum_{i != j} K_h(X_i - X_j) e_i e_j`.
    pub fn v(&self, e: &[T]) -> T {
        let off = self.pairs.iter().zip(&self.k).fold(T::zero(), |s, (&(i, j), &w)| s + w * e[i as usize] * e[j as usize]);
        T::lit(2.0) * off / (self.nf() * (self.nf() - T::one()))
    }

    /// `2/(n(n-1)h^d) sum_{i != j} K^2((X_i - X_j)/h) e_i^2 e_j^2`.
    pub fn sigma_hat(&self, e: &[T]) -> T {
        let off = self.pairs.iter().zip(&self.k_sq).fold(T::zero(), |s, (&(i, j), &w)| {
            let p = e[i as usize] * e[j as usize];
            s + w * p * p
        });
        let hd = self.h.powi(self.kernel.dim as i32);
        T::lit(4.0) * off / (self.nf() * (self.nf() - T::one()) * hd)
    }

    /// `n^{-2} sum_i sum_j K_h(X_i - X_j)`, diagonal included.
    pub fn s_hat(&self) -> T {
        let off = self.k.iter().copied().sum::<T>();
        (self.nf() * self.k0 + T::lit(2.0) * off) / (self.nf() * self.nf())
    }

    /// `n h^{d/2} V_n / sqrt(Sigma_hat)`; NaN when the variance vanishes.
    pub fn v_standardized(&self, e: &[T]) -> T {
        let s = self.sigma_hat(e);
        if s > T::zero() {
            self.nf() * self.kernel.half_power(self.h) * self.v(e) / s.sqrt()
        } else {
            T::nan()
        }
    }

    pub fn nuisance(&self, e: &[T], sigma2: T) -> LofNuisance<T> {
        let (int_k2, int_kk2) = self.kernel.moments::<T>();
        let s_hat = self.s_hat();
        let s4 = sigma2 * sigma2;
        LofNuisance {
            sigma2,
            s_hat,
            sigma_hat: self.sigma_hat(e),
            sigma_tilde: T::lit(2.0) * s4 * s_hat * int_k2,
            b_h: sigma2 * int_k2 / self.kernel.half_power(self.h),
            v_hat: T::lit(2.0) * s4 * s_hat * int_kk2,
        }
    }

    /// Multiplier-bootstrap replicate `(T*, V*)` for weights `xi`; `centered`
    /// subtracts the mean of `e_i xi_i` from every product.
    pub fn mb_replicate(&self, e: &[T], xi: &[T], centered: bool) -> (T, T) {
        let a = multiplied(e, xi, centered);
        (self.t(&a), self.v(&a))
    }
}

fn multiplied<T: Scalar>(e: &[T], xi: &[T], centered: bool) -> Vec<T> {
    let mut a: Vec<T> = e.iter().zip(xi).map(|(&u, &v)| u * v).collect();
    if centered {
        let mean = a.iter().copied().sum::<T>() / T::from_usize_lossy(a.len());
        a.iter_mut().for_each(|v| *v -= mean);
    }
    a
}

/// `T_n` in its double-sum form.
pub fn t_stat<T: Scalar>(e: &[T], x: &Matrix<T>, h: T, kernel: Kernel) -> T {
    LofWeights::new(x, h, kernel).t(e)
}

/// `n h^{d/2} int (n^{-1} sum_i K_h(x - X_i) e_i)^2 dx` by quadrature with
/// about `points` nodes. For compactly supported kernels the range is cut at
/// every `X_i +- h` and each piece gets three-point Gauss-Legendre panels, so a
/// polynomial kernel is integrated exactly; otherwise composite Simpson. One
/// covariate only.
pub fn t_stat_quadrature<T: Scalar>(e: &[T], x: &Matrix<T>, h: T, kernel: Kernel, points: usize) -> Result<T> {
    if x.ncols() != 1 {
        return Err(Error::Config("quadrature form is available for one covariate only".into()));
    }
    let kernel = kernel.with_dim(1);
    let xs = x.column_values(0);
    let nf = T::from_usize_lossy(xs.len());
    let g = |t: T| {
        let m = xs.iter().zip(e).fold(T::zero(), |s, (&xi, &ei)| s + kernel.k1((t - xi) / h) * ei) / (nf * h);
        m * m
    };
    let integral = match kernel.radius::<T>() {
        Some(r) => {
            let mut cuts: Vec<T> = xs.iter().flat_map(|&v| [v - r * h, v + r * h]).collect();
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            cuts.dedup();
            let pieces = cuts.len().saturating_sub(1).max(1);
            let panels = (points / (3 * pieces)).max(1);
            let (node, weight) = ((T::lit(0.6)).sqrt(), [T::lit(5.0 / 9.0), T::lit(8.0 / 9.0), T::lit(5.0 / 9.0)]);
            let mut total = T::zero();
            for w in cuts.windows(2) {
                let step = (w[1] - w[0]) / T::from_usize_lossy(panels);
                for k in 0..panels {
                    let mid = w[0] + step * (T::from_usize_lossy(k) + T::lit(0.5));
                    let half = step / T::lit(2.0);
                    let f = [g(mid - half * node), g(mid), g(mid + half * node)];
                    total += half * (weight[0] * f[0] + weight[1] * f[1] + weight[2] * f[2]);
                }
            }
            total
        }
        None => {
            let (lo, hi) = xs.iter().fold((T::infinity(), T::neg_infinity()), |(a, b), &v| (a.min(v), b.max(v)));
            let (a, b) = (lo - T::lit(20.0) * h, hi + T::lit(20.0) * h);
            let panels = (points.max(3) - 1) & !1;
            let step = (b - a) / T::from_usize_lossy(panels);
            let mut total = g(a) + g(b);
            for i in 1..panels {
                let w = if i % 2 == 1 { T::lit(4.0) } else { T::lit(2.0) };
                total += w * g(a + step * T::from_usize_lossy(i));
            }
            total * step / T::lit(3.0)
        }
    };
    Ok(nf * h.sqrt() * integral)
}

/// `V_n` for residuals `e`.
pub fn v_stat<T: Scalar>(e: &[T], x: &Matrix<T>, h: T, kernel: Kernel) -> T {
    LofWeights::new(x, h, kernel).v(e)
}

/// Nuisance estimates for parametric residuals `e` with variance `sigma2`.
pub fn lof_nuisance<T: Scalar>(e: &[T], sigma2: T, x: &Matrix<T>, h: T, kernel: Kernel) -> LofNuisance<T> {
    LofWeights::new(x, h, kernel).nuisance(e, sigma2)
}

/// Bootstrap replicates of `(T*, standardised V*)`.
#[derive(Debug, Clone, Default)]
pub struct LofReplicates<T> {
    pub t: Vec<T>,
    pub v: Vec<T>,
    pub failed: usize,
    /// Transformation-bootstrap responses clamped into the admissible range.
    pub clamped: usize,
}

/// A fitted model prepared for testing: bandwidth, weights and observed
/// statistics, reusable across calibration methods.
pub struct LofContext<'a, T: Scalar> {
    fm: &'a FittedModel<T>,
    sample: &'a Sample<T>,
    cfg: &'a LofConfig,
    weights: LofWeights<T>,
    nuisance: LofNuisance<T>,
    t_obs: T,
    v_obs: T,
}

impl<'a, T: Scalar> LofContext<'a, T> {
    pub fn new(fm: &'a FittedModel<T>, sample: &'a Sample<T>, cfg: &'a LofConfig) -> Result<Self> {
        cfg.validate()?;
        if sample.len() < 2 || fm.param_residuals.len() != sample.len() {
            return Err(Error::DegenerateData("lack-of-fit test needs at least two fitted observations".into()));
        }
        let h = cfg.resolve_h(&sample.x, &fm.z)?;
        Self::with_bandwidth(fm, sample, cfg, h)
    }

    pub fn with_bandwidth(fm: &'a FittedModel<T>, sample: &'a Sample<T>, cfg: &'a LofConfig, h: T) -> Result<Self> {
        if !(h > T::zero()) {
            return Err(Error::Config(format!("bandwidth must be positive, got {h}")));
        }
        let weights = LofWeights::new(&sample.x, h, cfg.kernel);
        let e = &fm.param_residuals;
        let t_obs = if cfg.quadrature { t_stat_quadrature(e, &sample.x, h, cfg.kernel, 2000)? } else { weights.t(e) };
        Ok(Self { fm, sample, cfg, nuisance: weights.nuisance(e, fm.sigma2), v_obs: weights.v_standardized(e), t_obs, weights })
    }

    pub fn weights(&self) -> &LofWeights<T> {
        &self.weights
    }

    pub fn nuisance(&self) -> &LofNuisance<T> {
        &self.nuisance
    }

    pub fn t_observed(&self) -> T {
        self.t_obs
    }

    /// Studentised `V_n`.
    pub fn v_observed(&self) -> T {
        self.v_obs
    }

    /// Standardised `T_n` for the normal approximation.
    pub fn t_standardized(&self) -> T {
        (self.t_obs - self.nuisance.b_h) / self.nuisance.v_hat.sqrt()
    }

    fn stats(&self, e: &[T]) -> (T, T) {
        (self.weights.t(e), self.weights.v_standardized(e))
    }

    /// Replicates for a bootstrap `method`.
    pub fn replicates<F: RegressionFamily<T> + ?Sized>(&self, method: Method, fam: &F) -> Result<LofReplicates<T>> {
        let plan = &self.cfg.plan;
        plan.validate()?;
        let draws: Vec<Option<(T, T, usize)>> = match method {
            Method::Asym => return Err(Error::Config("the normal approximation has no replicates".into())),
            Method::Mb | Method::Cmb => return self.multiplier_replicates(method == Method::Cmb),
            Method::Swb => {
                let ctx = self.swb_setup(fam)?;
                (0..plan.replicates).into_par_iter().map(|b| self.retry(b, |key| self.swb_once(&ctx, fam, key))).collect()
            }
            Method::Twb => {
                let ctx = self.twb_setup(fam)?;
                (0..plan.replicates).into_par_iter().map(|b| self.retry(b, |key| self.twb_once(&ctx, fam, key))).collect()
            }
        };
        Ok(collect_replicates(draws))
    }

    /// Multiplier-bootstrap replicates; no refitting is involved.
    pub fn multiplier_replicates(&self, centered: bool) -> Result<LofReplicates<T>> {
        let plan = &self.cfg.plan;
        plan.validate()?;
        let draws = (0..plan.replicates)
            .into_par_iter()
            .map(|b| {
                let mut rng = StreamSeed::new(plan.seed, b as u64, Purpose::Multiplier).rng();
                let xi: Vec<T> = draw_multipliers(plan.multiplier_law, self.weights.n, &mut rng);
                let (t, v) = self.stats(&multiplied(&self.fm.param_residuals, &xi, centered));
                Some((t, v, 0))
            })
            .collect();
        Ok(collect_replicates(draws))
    }

    fn retry(&self, b: usize, mut once: impl FnMut(StreamSeed) -> Result<(T, T, usize)>) -> Option<(T, T, usize)> {
        let key = StreamSeed::new(self.cfg.plan.seed, b as u64, Purpose::Wild);
        (0..=self.cfg.plan.max_retries as u64).find_map(|k| once(key.child(k)).ok())
    }

    /// Parametric fit and Nadaraya-Watson residuals at the test bandwidth.
    fn swb_setup<F: RegressionFamily<T> + ?Sized>(&self, fam: &F) -> Result<WildSetup<T>> {
        let x = &self.sample.x;
        let m_hat = fitted_values(x, &self.fm.z, self.weights.h, &self.weights.kernel, Smoother::NadarayaWatson)?;
        let residuals = self.fm.z.iter().zip(&m_hat).map(|(&z, &m)| z - m).collect();
        let fitted = (0..x.nrows()).map(|i| fam.eval(x.row(i), &self.fm.beta)).collect();
        Ok(WildSetup { fitted, residuals })
    }

    fn swb_once<F: RegressionFamily<T> + ?Sized>(&self, s: &WildSetup<T>, fam: &F, key: StreamSeed) -> Result<(T, T, usize)> {
        let u: Vec<T> = draw_multipliers(self.cfg.plan.wild_law, s.fitted.len(), &mut key.rng());
        let z: Vec<T> = s.fitted.iter().zip(&s.residuals).zip(&u).map(|((&m, &r), &w)| m + r * w).collect();
        let e = refit_residuals(&self.sample.x, &z, fam, &self.fm.beta)?;
        let (t, v) = self.stats(&e);
        Ok((t, v, 0))
    }

    fn twb_setup<F: RegressionFamily<T> + ?Sized>(&self, fam: &F) -> Result<TwbSetup<T>> {
        let wild = self.swb_setup(fam)?;
        let resample = SmoothedResample::new(wild.residuals.clone(), T::lit(self.cfg.plan.smoothing))?;
        Ok(TwbSetup { wild, resample })
    }

    fn twb_once<F: RegressionFamily<T> + ?Sized>(&self, s: &TwbSetup<T>, fam: &F, key: StreamSeed) -> Result<(T, T, usize)> {
        let transform = &self.cfg.profile.transform;
        let (y, clamped) = transformation_responses(transform, self.fm.theta, &s.wild.fitted, &s.resample, key)?;
        let boot = self.sample.with_responses(y);
        let theta = estimate_theta(&boot, &self.cfg.profile)?;
        let z = transform.forward_all(theta, &boot.y)?;
        let e = refit_residuals(&boot.x, &z, fam, &self.fm.beta)?;
        let (t, v) = self.stats(&e);
        if !t.is_finite() || !v.is_finite() {
            return Err(Error::DegenerateData("non-finite bootstrap statistic".into()));
        }
        Ok((t, v, clamped))
    }

    /// Runs `method` and reports both statistics.
    pub fn run<F: RegressionFamily<T> + ?Sized>(&self, method: Method, fam: &F) -> Result<(TestReport, TestReport)> {
        if method == Method::Asym {
            return Ok((self.asym_report(LofStatistic::T), self.asym_report(LofStatistic::V)));
        }
        let reps = self.replicates(method, fam)?;
        Ok((self.boot_report(method, LofStatistic::T, &reps), self.boot_report(method, LofStatistic::V, &reps)))
    }

    fn base_report(&self, method: Method, which: LofStatistic) -> TestReport {
        let n = self.sample.len();
        let mut advisories = Vec::new();
        if which == LofStatistic::V && !self.v_obs.is_finite() {
            advisories.push("variance estimate of V_n vanishes".to_string());
        }
        TestReport {
            schema_version: SCHEMA_VERSION.into(),
            statistic: match which {
                LofStatistic::T => "T".into(),
                LofStatistic::V => "V".into(),
            },
            method,
            value: match which {
                LofStatistic::T => self.t_obs.as_f64(),
                LofStatistic::V => self.weights.v(&self.fm.param_residuals).as_f64(),
            },
            standardized: f64::NAN,
            p_value: f64::NAN,
            critical_value: f64::NAN,
            alpha: self.cfg.alpha,
            reject: false,
            n,
            h: self.weights.h.as_f64(),
            g: None,
            theta: self.fm.theta.as_f64(),
            beta: self.fm.beta.iter().map(|b| b.as_f64()).collect(),
            nuisance: self.nuisance.to_report(),
            replicates: 0,
            effective_replicates: 0,
            failed_replicates: 0,
            seed: None,
            advisories,
        }
    }

    /// Normal-approximation report for one statistic.
    pub fn asym_report(&self, which: LofStatistic) -> TestReport {
        let mut r = self.base_report(Method::Asym, which);
        let z = match which {
            LofStatistic::T => self.t_standardized(),
            LofStatistic::V => self.v_obs,
        }
        .as_f64();
        r.standardized = z;
        r.p_value = if z.is_finite() { normal_upper_p(z) } else { f64::NAN };
        r.critical_value = normal_upper_quantile(self.cfg.alpha);
        r.reject = r.p_value < self.cfg.alpha;
        r
    }

    /// Bootstrap report for one statistic given its replicates.
    pub fn boot_report(&self, method: Method, which: LofStatistic, reps: &LofReplicates<T>) -> TestReport {
        let mut r = self.base_report(method, which);
        let (obs, draws) = match which {
            LofStatistic::T => (self.t_obs, &reps.t),
            LofStatistic::V => (self.v_obs, &reps.v),
        };
        let effective = draws.iter().filter(|v| v.is_finite()).count();
        r.standardized = obs.as_f64();
        r.p_value = if obs.is_finite() { bootstrap_p_value(obs, draws) } else { f64::NAN };
        r.critical_value = upper_quantile(draws, self.cfg.alpha);
        r.reject = r.p_value < self.cfg.alpha;
        r.replicates = draws.len();
        r.effective_replicates = effective;
        r.failed_replicates = reps.failed;
        r.seed = Some(self.cfg.plan.seed);
        if reps.failed > 0 {
            r.advisories.push(format!("{} replicates failed and were excluded", reps.failed));
        }
        if reps.clamped > 0 {
            r.advisories.push(format!("{} bootstrap responses clamped into the transformation range", reps.clamped));
        }
        r
    }
}

fn collect_replicates<T: Scalar>(draws: Vec<Option<(T, T, usize)>>) -> LofReplicates<T> {
    let mut out = LofReplicates { t: Vec::with_capacity(draws.len()), v: Vec::with_capacity(draws.len()), ..Default::default() };
    for d in draws {
        match d {
            Some((t, v, c)) => {
                out.t.push(t);
                out.v.push(v);
                out.clamped += c;
            }
            None => {
                out.failed += 1;
                out.t.push(T::nan());
                out.v.push(T::nan());
            }
        }
    }
    out
}

struct WildSetup<T> {
    /// `m(X_i, beta_hat)`.
    fitted: Vec<T>,
    /// `Z_i - m_hat(X_i)`.
    residuals: Vec<T>,
}

struct TwbSetup<T> {
    wild: WildSetup<T>,
    resample: SmoothedResample<T>,
}

fn refit_residuals<T: Scalar, F: RegressionFamily<T> + ?Sized>(x: &Matrix<T>, z: &[T], fam: &F, init: &[T]) -> Result<Vec<T>> {
    let beta = least_squares(x, z, fam, init)?;
    Ok(z.iter().enumerate().map(|(i, &zi)| zi - fam.eval(x.row(i), &beta)).collect())
}

/// Redraws per observation before an out-of-range target is clamped.
pub const MAX_REDRAWS: usize = 100;

/// `Y_i* = Lambda_theta^{-1}(fitted_i + eps_i*)` with resampled errors. Targets
/// outside the image of the transformation are redrawn, and clamped just
/// inside the boundary after [`MAX_REDRAWS`] attempts. Returns the responses
/// and the number of clamped observations.
pub fn transformation_responses<T: Scalar>(
    transform: &TransformFamily,
    theta: T,
    fitted: &[T],
    resample: &SmoothedResample<T>,
    key: StreamSeed,
) -> Result<(Vec<T>, usize)> {
    let range = transform.range(theta);
    let mut rng = StreamSeed { purpose: Purpose::Resample, ..key }.rng();
    let mut clamped = 0;
    let mut y = Vec::with_capacity(fitted.len());
    for &m in fitted {
        let mut target = None;
        let mut last = m;
        for _ in 0..MAX_REDRAWS {
            last = m + resample.draw_one(&mut rng);
            if range.contains(last) {
                target = Some(last);
                break;
            }
        }
        let target = match target {
            Some(t) => t,
            None => {
                clamped += 1;
                let inset = |b: T| T::lit(1e-8) * b.abs().max(T::one());
                if last <= range.lower {
                    range.lower + inset(range.lower)
                } else {
                    range.upper - inset(range.upper)
                }
            }
        };
        y.push(transform.inverse(theta, target)?);
    }
    Ok((y, clamped))
}

/// Normal-approximation test.
pub fn lof_test_asym<T: Scalar>(fm: &FittedModel<T>, sample: &Sample<T>, cfg: &LofConfig, which: LofStatistic) -> Result<TestReport> {
    Ok(LofContext::new(fm, sample, cfg)?.asym_report(which))
}

fn lof_boot<T: Scalar, F: RegressionFamily<T> + ?Sized>(
    fm: &FittedModel<T>,
    sample: &Sample<T>,
    fam: &F,
    cfg: &LofConfig,
    which: LofStatistic,
    method: Method,
) -> Result<TestReport> {
    let ctx = LofContext::new(fm, sample, cfg)?;
    let reps = ctx.replicates(method, fam)?;
    Ok(ctx.boot_report(method, which, &reps))
}

/// Standard wild bootstrap.
pub fn lof_test_swb<T: Scalar, F: RegressionFamily<T> + ?Sized>(
    fm: &FittedModel<T>,
    sample: &Sample<T>,
    fam: &F,
    cfg: &LofConfig,
    which: LofStatistic,
) -> Result<TestReport> {
    lof_boot(fm, sample, fam, cfg, which, Method::Swb)
}

/// Transformation wild bootstrap; the parameter is re-estimated per replicate.
pub fn lof_test_twb<T: Scalar, F: RegressionFamily<T> + ?Sized>(
    fm: &FittedModel<T>,
    sample: &Sample<T>,
    fam: &F,
    cfg: &LofConfig,
    which: LofStatistic,
) -> Result<TestReport> {
    lof_boot(fm, sample, fam, cfg, which, Method::Twb)
}

/// Multiplier bootstrap, plain or centred.
pub fn lof_test_mb<T: Scalar>(fm: &FittedModel<T>, sample: &Sample<T>, cfg: &LofConfig, which: LofStatistic, centered: bool) -> Result<TestReport> {
    let ctx = LofContext::new(fm, sample, cfg)?;
    let reps = ctx.multiplier_replicates(centered)?;
    Ok(ctx.boot_report(if centered { Method::Cmb } else { Method::Mb }, which, &reps))
}
