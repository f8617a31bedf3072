//! Specification tests for regression models with a parametric response
//! transformation `Lambda_theta(Y) = m(X) + eps`.
//!
//! The lack-of-fit tests ([`lackoffit`]) check whether `m` belongs to a
//! parametric family; the significance tests ([`significance`]) check whether
//! a covariate block can be dropped. Each statistic can be calibrated by its
//! normal limit or by one of four bootstraps. [`simlab`] holds the Monte Carlo
//! harness and the command-line front end.

// `!(x > 0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod lackoffit;
mod linalg;
pub mod modelfit;
mod optimize;
mod pairs;
pub mod report;
pub mod resampling;
pub mod scalar;
pub mod significance;
pub mod simlab;
pub mod smoothing;
pub mod transforms;

pub use data::{Matrix, Sample};
pub use error::{Error, Result};
pub use lackoffit::{LofConfig, LofContext};
pub use modelfit::{fit, fit_at_theta, FittedModel, ProfileConfig, RegressionFamily};
pub use report::{BootstrapPlan, LofStatistic, Method, TestReport};
pub use scalar::Scalar;
pub use significance::{SigConfig, SigContext, SigSample};

pub type Sample64 = Sample<f64>;
pub type Sample32 = Sample<f32>;
pub type Matrix64 = Matrix<f64>;
pub type FittedModel64 = FittedModel<f64>;
pub type SigSample64 = SigSample<f64>;
