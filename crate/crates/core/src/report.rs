//! Test outcomes and bootstrap plans in a serialisable form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resampling::{MultiplierLaw, DEFAULT_SMOOTHING};

pub const SCHEMA_VERSION: &str = "1";

/// Calibration scheme for a test statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Standard wild bootstrap.
    Swb,
    /// Transformation wild bootstrap.
    Twb,
    /// Multiplier bootstrap.
    Mb,
    /// Centred multiplier bootstrap.
    Cmb,
    /// Normal approximation.
    Asym,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Swb, Method::Twb, Method::Mb, Method::Cmb, Method::Asym];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Swb => "swb",
            Method::Twb => "twb",
            Method::Mb => "mb",
            Method::Cmb => "cmb",
            Method::Asym => "asym",
        }
    }

    pub fn is_bootstrap(self) -> bool {
        self != Method::Asym
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown method `{s}` (expected asym, swb, twb, mb or cmb)")))
    }
}

/// Which lack-of-fit statistic a report refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LofStatistic {
    /// Integrated squared smoothed residual.
    T,
    /// Off-diagonal kernel U-statistic, studentised.
    V,
}

/// Resampling settings shared by all bootstrap calibrations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapPlan {
    pub replicates: usize,
    /// Law of the wild-bootstrap multipliers.
    pub wild_law: MultiplierLaw,
    /// Law of the multiplier-bootstrap weights.
    pub multiplier_law: MultiplierLaw,
    /// Noise scale added to resampled residuals in the transformation bootstrap.
    pub smoothing: f64,
    pub seed: u64,
    /// Attempts per failing replicate before it is recorded as missing.
    pub max_retries: usize,
}

impl Default for BootstrapPlan {
    fn default() -> Self {
        Self {
            replicates: 500,
            wild_law: MultiplierLaw::MammenTwoPoint,
            multiplier_law: MultiplierLaw::Rademacher,
            smoothing: DEFAULT_SMOOTHING,
            seed: 0,
            max_retries: 3,
        }
    }
}

impl BootstrapPlan {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("bootstrap needs at least one replicate".into()));
        }
        if !(self.smoothing >= 0.0) {
            return Err(Error::Config("smoothing constant must be non-negative".into()));
        }
        Ok(())
    }
}

/// Result of one specification test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub schema_version: String,
    /// `"T"`, `"V"`, `"I"` or `"I~"`.
    pub statistic: String,
    pub method: Method,
    /// Raw statistic value.
    pub value: f64,
    /// Value on the scale it is compared on (standardised for asym and for V).
    pub standardized: f64,
    pub p_value: f64,
    /// Upper `alpha` critical value on the `standardized` scale.
    pub critical_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub n: usize,
    pub h: f64,
    pub g: Option<f64>,
    pub theta: f64,
    pub beta: Vec<f64>,
    pub nuisance: Nuisance,
    pub replicates: usize,
    pub effective_replicates: usize,
    pub failed_replicates: usize,
    pub seed: Option<u64>,
    pub advisories: Vec<String>,
}

/// Plug-in quantities reported alongside a statistic.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Nuisance {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_tilde: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau2: Option<f64>,
}

impl TestReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// One-sided upper-tail p-value of a standard normal statistic.
pub fn normal_upper_p(z: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().sf(z)
}

/// `z` with `P(N(0,1) > z) = alpha`.
pub fn normal_upper_quantile(alpha: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(1.0 - alpha)
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("level must lie in (0, 1), got {alpha}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_tail() {
        assert_eq!(normal_upper_p(0.0), 0.5);
        assert!((normal_upper_p(1.6448536269514722) - 0.05).abs() < 1e-9);
        assert!((normal_upper_quantile(0.1) - 1.2815515655446004).abs() < 1e-9);
    }

    #[test]
    fn methods_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            let js = serde_json::to_string(&m).unwrap();
            assert_eq!(js, format!("\"{}\"", m.as_str()));
        }
        assert!("bogus".parse::<Method>().is_err());
    }

    #[test]
    fn empty_plan_is_rejected() {
        let plan = BootstrapPlan { replicates: 0, ..BootstrapPlan::default() };
        assert!(matches!(plan.validate(), Err(Error::Config(_))));
    }
}
