use serde::{Deserialize, Serialize};

use super::estimators::{loo_cv_score_indexed, NeighborIndex, Smoother};
use super::kernel::Kernel;
use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Normal-reference constant for the Epanechnikov kernel.
pub const NORMAL_REFERENCE_CONSTANT: f64 = 2.34;

/// Number of points in the default cross-validation grid.
pub const DEFAULT_GRID_POINTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum BandwidthMode {
    Fixed {
        h: f64,
    },
    /// Leave-one-out cross validation of the given smoother; `grid: None`
    /// uses [`default_grid`].
    CrossValidation {
        smoother: Smoother,
        grid: Option<Vec<f64>>,
    },
    NormalReference,
}

/// How a bandwidth is obtained, plus a scalar multiplier applied afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSpec {
    #[serde(flatten)]
    pub mode: BandwidthMode,
    #[serde(default = "one")]
    pub multiplier: f64,
}

fn one() -> f64 {
    1.0
}

impl BandwidthSpec {
    pub fn fixed(h: f64) -> Self {
        Self { mode: BandwidthMode::Fixed { h }, multiplier: 1.0 }
    }

    pub fn cross_validation(smoother: Smoother) -> Self {
        Self { mode: BandwidthMode::CrossValidation { smoother, grid: None }, multiplier: 1.0 }
    }

    pub fn normal_reference() -> Self {
        Self { mode: BandwidthMode::NormalReference, multiplier: 1.0 }
    }

    pub fn scaled(mut self, multiplier: f64) -> Self {
        self.multiplier *= multiplier;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.multiplier > 0.0) {
            return Err(Error::Config(format!("bandwidth multiplier must be positive, got {}", self.multiplier)));
        }
        match &self.mode {
            BandwidthMode::Fixed { h } if !(*h > 0.0) => Err(Error::Config(format!("bandwidth must be positive, got {h}"))),
            BandwidthMode::CrossValidation { grid: Some(g), .. } if g.is_empty() || g.iter().any(|&v| !(v > 0.0)) => {
                Err(Error::Config("cross-validation grid must be nonempty and positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Resolves the bandwidth for covariates `x` and responses `z`.
    pub fn resolve<T: Scalar>(&self, x: &Matrix<T>, z: &[T], kernel: &Kernel) -> Result<T> {
        self.validate()?;
        let h = match &self.mode {
            BandwidthMode::Fixed { h } => T::lit(*h),
            BandwidthMode::CrossValidation { smoother, grid } => {
                let grid: Vec<T> = match grid {
                    Some(g) => g.iter().map(|&v| T::lit(v)).collect(),
                    None => default_grid(x),
                };
                cv_bandwidth(x, z, *smoother, &grid, kernel)?
            }
            BandwidthMode::NormalReference => {
                let d = x.ncols();
                let mut acc = T::zero();
                for j in 0..d {
                    acc += normal_reference_bandwidth(&x.column_values(j))?;
                }
                acc / T::from_usize_lossy(d)
            }
        };
        Ok(h * T::lit(self.multiplier))
    }
}

/// `2.34 * sd(v) * n^(-1/5)` with the unbiased standard deviation.
pub fn normal_reference_bandwidth<T: Scalar>(v: &[T]) -> Result<T> {
    let n = v.len();
    if n < 2 {
        return Err(Error::DegenerateData("normal reference rule needs at least two values".into()));
    }
    let sd = sample_sd(v);
    if !(sd > T::zero()) {
        return Err(Error::DegenerateData("zero standard deviation".into()));
    }
    Ok(normal_reference_from_sd(sd, n))
}

pub(crate) fn normal_reference_from_sd<T: Scalar>(sd: T, n: usize) -> T {
    T::lit(NORMAL_REFERENCE_CONSTANT) * sd * T::from_usize_lossy(n).powf(T::lit(-0.2))
}

pub(crate) fn sample_sd<T: Scalar>(v: &[T]) -> T {
    let nf = T::from_usize_lossy(v.len());
    let mean = v.iter().copied().sum::<T>() / nf;
    let ss = v.iter().fold(T::zero(), |s, &x| s + (x - mean) * (x - mean));
    (ss / (nf - T::one())).sqrt()
}

/// Log-spaced grid between 5% and 100% of the largest coordinate range.
pub fn default_grid<T: Scalar>(x: &Matrix<T>) -> Vec<T> {
    let range = x.max_range();
    let range = if range > T::zero() { range } else { T::one() };
    let (lo, hi) = ((T::lit(0.05) * range).ln(), range.ln());
    let steps = T::from_usize_lossy(DEFAULT_GRID_POINTS - 1);
    (0..DEFAULT_GRID_POINTS).map(|i| (lo + (hi - lo) * T::from_usize_lossy(i) / steps).exp()).collect()
}

/// Grid element minimising the leave-one-out criterion; ties go to the
/// smaller bandwidth.
pub fn cv_bandwidth<T: Scalar>(x: &Matrix<T>, z: &[T], smoother: Smoother, grid: &[T], kernel: &Kernel) -> Result<T> {
    if grid.is_empty() {
        return Err(Error::Config("empty bandwidth grid".into()));
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    if z.len() < 3 {
        return Err(Error::DegenerateData("cross validation needs at least three observations".into()));
    }
    cv_select(x, z, smoother, grid, kernel, &NeighborIndex::new(x))
}

pub(crate) fn cv_select<T: Scalar>(x: &Matrix<T>, z: &[T], smoother: Smoother, grid: &[T], kernel: &Kernel, index: &NeighborIndex<T>) -> Result<T> {
    if grid.is_empty() {
        return Err(Error::Config("empty bandwidth grid".into()));
    }
    let mut best: Option<(T, T)> = None;
    for &h in grid {
        let score = loo_cv_score_indexed(x, z, h, kernel, smoother, index);
        best = match best {
            Some((bh, bs)) if !(score < bs) && !(score == bs && h < bh) => Some((bh, bs)),
            _ => Some((h, score)),
        };
    }
    Ok(best.map(|(h, _)| h).expect("grid is nonempty"))
}
