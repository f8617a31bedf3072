//! Tests for the significance of a covariate block `V` given `W`.

mod ustat;

pub use ustat::{psi, SigWeights};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Matrix, Sample};
use crate::error::{Error, Result};
use crate::lackoffit::transformation_responses;
use crate::modelfit::{estimate_theta, ProfileConfig};
use crate::report::{check_alpha, normal_upper_p, normal_upper_quantile, BootstrapPlan, Method, Nuisance, TestReport, SCHEMA_VERSION};
use crate::resampling::{bootstrap_p_value, draw_multipliers, upper_quantile, Purpose, SmoothedResample, StreamSeed};
use crate::scalar::Scalar;
use crate::smoothing::{fitted_values, BandwidthSpec, Kernel, Smoother};

/// Responses with covariates split into the conditioning block `W` and the
/// tested block `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigSample<T> {
    pub w: Matrix<T>,
    pub v: Matrix<T>,
    pub y: Vec<T>,
}

impl<T: Scalar> SigSample<T> {
    pub fn new(w: Matrix<T>, v: Matrix<T>, y: Vec<T>) -> Result<Self> {
        if w.nrows() != y.len() || v.nrows() != y.len() {
            return Err(Error::DegenerateData(format!("row counts differ: W has {}, V has {}, y has {}", w.nrows(), v.nrows(), y.len())));
        }
        if w.ncols() == 0 || v.ncols() == 0 {
            return Err(Error::DegenerateData("both covariate blocks need at least one column".into()));
        }
        // validates finiteness
        Sample::new(w.hstack(&v)?, y.clone())?;
        Ok(Self { w, v, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Full covariate matrix `X = (W, V)` with the responses.
    pub fn full(&self) -> Sample<T> {
        Sample { x: self.w.hstack(&self.v).expect("row counts checked"), y: self.y.clone() }
    }

    pub fn advisories(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.w.ncols() > 5 {
            out.push(format!("W has {} columns; the asymptotic theory covers at most 5", self.w.ncols()));
        }
        out
    }
}

/// Which statistic the multiplier bootstraps are compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MbObserved {
    /// The two-index statistic the replicates are built from.
    #[default]
    ITilde,
    /// The four-index statistic.
    I,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SigConfig {
    pub kernel_k: Kernel,
    pub kernel_l: Kernel,
    /// Bandwidth of `K`; cross-validated for the smoother on the full covariates.
    pub h: BandwidthSpec,
    /// Bandwidth of `L`; cross-validated for the smoother on `W`.
    pub g: BandwidthSpec,
    /// Variance of the normal weight function.
    pub psi_var: f64,
    pub alpha: f64,
    pub plan: BootstrapPlan,
    pub profile: ProfileConfig,
    pub mb_observed: MbObserved,
}

impl Default for SigConfig {
    fn default() -> Self {
        Self {
            kernel_k: Kernel::epanechnikov(1),
            kernel_l: Kernel::epanechnikov(1),
            h: BandwidthSpec::cross_validation(Smoother::NadarayaWatson),
            g: BandwidthSpec::cross_validation(Smoother::NadarayaWatson),
            psi_var: 0.10,
            alpha: 0.05,
            plan: BootstrapPlan::default(),
            profile: ProfileConfig::default(),
            mb_observed: MbObserved::ITilde,
        }
    }
}

impl SigConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.psi_var > 0.0) {
            return Err(Error::Config("weight-function variance must be positive".into()));
        }
        self.h.validate()?;
        self.g.validate()?;
        self.profile.validate()
    }
}

/// Everything the significance statistics need for a fixed transformation
/// parameter: bandwidths, weights and the two preliminary smoothers.
pub struct SigContext<'a, T: Scalar> {
    s: &'a SigSample<T>,
    cfg: &'a SigConfig,
    theta: T,
    h: T,
    g: T,
    z: Vec<T>,
    weights: SigWeights<T>,
    /// `m0_hat(W_i)`.
    m0: Vec<T>,
    i_obs: T,
    i_tilde_obs: T,
}

impl<'a, T: Scalar> SigContext<'a, T> {
    pub fn new(theta: T, s: &'a SigSample<T>, cfg: &'a SigConfig) -> Result<Self> {
        cfg.validate()?;
        if s.len() < 2 {
            return Err(Error::DegenerateData("significance test needs at least two observations".into()));
        }
        let z = cfg.profile.transform.forward_all(theta, &s.y)?;
        let p = s.w.ncols();
        let g = cfg.g.resolve(&s.w, &z, &cfg.kernel_l.with_dim(p))?;
        let x = s.w.hstack(&s.v)?;
        let h = cfg.h.resolve(&x, &z, &cfg.kernel_k.with_dim(x.ncols()))?;
        Self::with_bandwidths(theta, s, cfg, h, g)
    }

    pub fn with_bandwidths(theta: T, s: &'a SigSample<T>, cfg: &'a SigConfig, h: T, g: T) -> Result<Self> {
        if !(h > T::zero() && g > T::zero()) {
            return Err(Error::Config("bandwidths must be positive".into()));
        }
        let z = cfg.profile.transform.forward_all(theta, &s.y)?;
        let weights = SigWeights::new(&s.w, &s.v, h, g, cfg.kernel_k, cfg.kernel_l, T::lit(cfg.psi_var));
        let m0 = fitted_values(&s.w, &z, g, &cfg.kernel_l.with_dim(s.w.ncols()), Smoother::NadarayaWatson)?;
        let e: Vec<T> = z.iter().zip(&m0).map(|(&a, &b)| a - b).collect();
        let i_obs = weights.i_stat(&z);
        let i_tilde_obs = weights.i_tilde(&e);
        Ok(Self { s, cfg, theta, h, g, z, weights, m0, i_obs, i_tilde_obs })
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn g(&self) -> T {
        self.g
    }

    pub fn weights(&self) -> &SigWeights<T> {
        &self.weights
    }

    pub fn i_observed(&self) -> T {
        self.i_obs
    }

    pub fn i_tilde_observed(&self) -> T {
        self.i_tilde_obs
    }

    pub fn tau2(&self) -> T {
        self.weights.tau2(&self.z)
    }

    /// Residuals `Z_i - m0_hat(W_i)`.
    pub fn residuals(&self) -> Vec<T> {
        self.z.iter().zip(&self.m0).map(|(&a, &b)| a - b).collect()
    }

    fn full_model_residuals(&self) -> Result<Vec<T>> {
        let x = self.s.w.hstack(&self.s.v)?;
        let m = fitted_values(&x, &self.z, self.h, &self.cfg.kernel_k.with_dim(x.ncols()), Smoother::NadarayaWatson)?;
        Ok(self.z.iter().zip(&m).map(|(&a, &b)| a - b).collect())
    }

    /// Bootstrap replicates of the statistic for `method`; failed replicates are NaN.
    pub fn replicates(&self, method: Method) -> Result<(Vec<T>, usize)> {
        let plan = &self.cfg.plan;
        plan.validate()?;
        let b = plan.replicates;
        let out: Vec<Option<(T, usize)>> = match method {
            Method::Asym => return Err(Error::Config("the normal approximation has no replicates".into())),
            Method::Mb | Method::Cmb => {
                let centered = method == Method::Cmb;
                let e = self.residuals();
                (0..b)
                    .into_par_iter()
                    .map(|r| {
                        let mut rng = StreamSeed::new(plan.seed, r as u64, Purpose::Multiplier).rng();
                        let xi: Vec<T> = draw_multipliers(plan.multiplier_law, e.len(), &mut rng);
                        Some((self.weights.i_tilde(&multiplied(&e, &xi, centered)), 0))
                    })
                    .collect()
            }
            Method::Swb => {
                let eps = self.full_model_residuals()?;
                (0..b)
                    .into_par_iter()
                    .map(|r| {
                        let key = StreamSeed::new(plan.seed, r as u64, Purpose::Wild);
                        let u: Vec<T> = draw_multipliers(plan.wild_law, eps.len(), &mut key.rng());
                        let z: Vec<T> = self.m0.iter().zip(&eps).zip(&u).map(|((&m, &e), &w)| m + w * e).collect();
                        let v = self.weights.i_stat(&z);
                        v.is_finite().then_some((v, 0))
                    })
                    .collect()
            }
            Method::Twb => {
                let resample = SmoothedResample::new(self.full_model_residuals()?, T::lit(plan.smoothing))?;
                let full = self.s.full();
                (0..b)
                    .into_par_iter()
                    .map(|r| {
                        let key = StreamSeed::new(plan.seed, r as u64, Purpose::Wild);
                        (0..=plan.max_retries as u64).find_map(|k| self.twb_once(&full, &resample, key.child(k)).ok())
                    })
                    .collect()
            }
        };
        let failed = out.iter().filter(|v| v.is_none()).count();
        Ok((out.into_iter().map(|v| v.map_or(T::nan(), |(s, _)| s)).collect(), failed))
    }

    fn twb_once(&self, full: &Sample<T>, resample: &SmoothedResample<T>, key: StreamSeed) -> Result<(T, usize)> {
        let transform = &self.cfg.profile.transform;
        let (y, clamped) = transformation_responses(transform, self.theta, &self.m0, resample, key)?;
        let boot = full.with_responses(y);
        let theta = estimate_theta(&boot, &self.cfg.profile)?;
        let z = transform.forward_all(theta, &boot.y)?;
        let v = self.weights.i_stat(&z);
        if !v.is_finite() {
            return Err(Error::DegenerateData("non-finite bootstrap statistic".into()));
        }
        Ok((v, clamped))
    }

    fn base_report(&self, method: Method, statistic: &str, value: T) -> TestReport {
        let mut advisories = self.s.advisories();
        if self.h >= self.g {
            advisories.push(format!("h = {} is not smaller than g = {}", self.h, self.g));
        }
        TestReport {
            schema_version: SCHEMA_VERSION.into(),
            statistic: statistic.into(),
            method,
            value: value.as_f64(),
            standardized: f64::NAN,
            p_value: f64::NAN,
            critical_value: f64::NAN,
            alpha: self.cfg.alpha,
            reject: false,
            n: self.s.len(),
            h: self.h.as_f64(),
            g: Some(self.g.as_f64()),
            theta: self.theta.as_f64(),
            beta: Vec::new(),
            nuisance: Nuisance::default(),
            replicates: 0,
            effective_replicates: 0,
            failed_replicates: 0,
            seed: None,
            advisories,
        }
    }

    /// Normal approximation `I_n / tau_hat`.
    pub fn asym_report(&self) -> Result<TestReport> {
        if self.s.len() < 6 {
            return Err(Error::DegenerateData("variance estimate needs at least six observations".into()));
        }
        let tau2 = self.tau2();
        if !(tau2 > T::zero()) {
            return Err(Error::DegenerateVariance(tau2.as_f64()));
        }
        let mut r = self.base_report(Method::Asym, "I", self.i_obs);
        let z = (self.i_obs / tau2.sqrt()).as_f64();
        r.nuisance.tau2 = Some(tau2.as_f64());
        r.standardized = z;
        r.p_value = normal_upper_p(z);
        r.critical_value = normal_upper_quantile(self.cfg.alpha);
        r.reject = r.p_value < self.cfg.alpha;
        Ok(r)
    }

    /// Bootstrap report from precomputed replicates.
    pub fn boot_report(&self, method: Method, reps: &[T], failed: usize) -> TestReport {
        let use_tilde = matches!(method, Method::Mb | Method::Cmb) && self.cfg.mb_observed == MbObserved::ITilde;
        let (name, obs) = if use_tilde { ("I~", self.i_tilde_obs) } else { ("I", self.i_obs) };
        let mut r = self.base_report(method, name, obs);
        r.standardized = obs.as_f64();
        r.p_value = bootstrap_p_value(obs, reps);
        r.critical_value = upper_quantile(reps, self.cfg.alpha);
        r.reject = r.p_value < self.cfg.alpha;
        r.replicates = reps.len();
        r.effective_replicates = reps.iter().filter(|v| v.is_finite()).count();
        r.failed_replicates = failed;
        r.seed = Some(self.cfg.plan.seed);
        if failed > 0 {
            r.advisories.push(format!("{failed} replicates failed and were excluded"));
        }
        r
    }

    pub fn run(&self, method: Method) -> Result<TestReport> {
        if method == Method::Asym {
            return self.asym_report();
        }
        let (reps, failed) = self.replicates(method)?;
        Ok(self.boot_report(method, &reps, failed))
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

/// `I_n(theta)` with bandwidths resolved from `cfg`.
pub fn i_stat<T: Scalar>(theta: T, s: &SigSample<T>, cfg: &SigConfig) -> Result<T> {
    Ok(SigContext::new(theta, s, cfg)?.i_observed())
}

/// Variance estimate of `I_n(theta)`.
pub fn tau2_hat<T: Scalar>(theta: T, s: &SigSample<T>, cfg: &SigConfig) -> Result<T> {
    Ok(SigContext::new(theta, s, cfg)?.tau2())
}

/// Two-index statistic with Nadaraya-Watson residuals on `W`.
pub fn i_tilde_stat<T: Scalar>(theta: T, s: &SigSample<T>, cfg: &SigConfig) -> Result<T> {
    Ok(SigContext::new(theta, s, cfg)?.i_tilde_observed())
}

pub fn sig_test_asym<T: Scalar>(theta: T, s: &SigSample<T>, cfg: &SigConfig) -> Result<TestReport> {
    SigContext::new(theta, s, cfg)?.asym_report()
}

pub fn sig_test_swb<T: Scalar>(theta: T, s: &SigSample<T>, cfg: &SigConfig) -> Result<TestReport> {
    SigContext::new(theta, s, cfg)?.run(Method::Swb)
}

pub fn sig_test_twb<T: Scalar>(theta: T, s: &SigSample<T>, cfg: &SigConfig) -> Result<TestReport> {
    SigContext::new(theta, s, cfg)?.run(Method::Twb)
}

pub fn sig_test_mb<T: Scalar>(theta: T, s: &SigSample<T>, cfg: &SigConfig, centered: bool) -> Result<TestReport> {
    SigContext::new(theta, s, cfg)?.run(if centered { Method::Cmb } else { Method::Mb })
}
