//! Parametric, strictly increasing response transformations.
//!
//! Both families are evaluated through `expm1`/`ln1p`, which keeps the power
//! branches accurate right up to the logarithmic seams.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Distance from a seam (0 or 2) below which the logarithmic branch is used.
const SEAM: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    YeoJohnson,
    BoxCox,
}

/// A transformation family together with the parameter interval searched by
/// the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformFamily {
    pub kind: FamilyKind,
    pub domain: (f64, f64),
}

impl Default for TransformFamily {
    fn default() -> Self {
        Self::yeo_johnson()
    }
}

/// Image `(lower, upper)` of `y -> forward(theta, y)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformRange<T> {
    pub lower: T,
    pub upper: T,
}

impl<T: Scalar> TransformRange<T> {
    pub fn contains(&self, z: T) -> bool {
        z > self.lower && z < self.upper
    }

    pub fn is_full(&self) -> bool {
        self.lower.is_infinite() && self.upper.is_infinite()
    }
}

#[inline]
fn near<T: Scalar>(theta: T, seam: f64) -> bool {
    (theta - T::lit(seam)).abs() < T::lit(SEAM)
}

/// Yeo-Johnson transform.
#[inline]
pub fn yeo_johnson<T: Scalar>(theta: T, y: T) -> T {
    let two = T::lit(2.0);
    if y >= T::zero() {
        if near(theta, 0.0) {
            y.ln_1p()
        } else {
            (theta * y.ln_1p()).exp_m1() / theta
        }
    } else if near(theta, 2.0) {
        -(-y).ln_1p()
    } else {
        let p = two - theta;
        -(p * (-y).ln_1p()).exp_m1() / p
    }
}

/// Closed-form inverse of [`yeo_johnson`].
pub fn yeo_johnson_inverse<T: Scalar>(theta: T, z: T) -> Result<T> {
    let range = yeo_johnson_range(theta);
    if !range.contains(z) {
        return Err(domain_error(z, &range));
    }
    let two = T::lit(2.0);
    Ok(if z >= T::zero() {
        if near(theta, 0.0) {
            z.exp_m1()
        } else {
            ((theta * z).ln_1p() / theta).exp_m1()
        }
    } else if near(theta, 2.0) {
        -(-z).exp_m1()
    } else {
        let p = two - theta;
        -((-p * z).ln_1p() / p).exp_m1()
    })
}

/// `d/dy` of [`yeo_johnson`]; always strictly positive.
#[inline]
pub fn yeo_johnson_dy<T: Scalar>(theta: T, y: T) -> T {
    if y >= T::zero() {
        ((theta - T::one()) * y.ln_1p()).exp()
    } else {
        ((T::one() - theta) * (-y).ln_1p()).exp()
    }
}

pub fn yeo_johnson_range<T: Scalar>(theta: T) -> TransformRange<T> {
    let two = T::lit(2.0);
    let mut r = TransformRange { lower: T::neg_infinity(), upper: T::infinity() };
    if theta < T::zero() && !near(theta, 0.0) {
        r.upper = -T::one() / theta;
    }
    if theta > two && !near(theta, 2.0) {
        r.lower = T::one() / (two - theta);
    }
    r
}

fn box_cox<T: Scalar>(theta: T, y: T) -> Result<T> {
    if !(y > T::zero()) {
        return Err(Error::Domain { value: y.as_f64(), lower: 0.0, upper: f64::INFINITY });
    }
    Ok(if near(theta, 0.0) { y.ln() } else { (theta * y.ln()).exp_m1() / theta })
}

fn box_cox_inverse<T: Scalar>(theta: T, z: T) -> Result<T> {
    let range = box_cox_range(theta);
    if !range.contains(z) {
        return Err(domain_error(z, &range));
    }
    Ok(if near(theta, 0.0) { z.exp() } else { ((theta * z).ln_1p() / theta).exp() })
}

fn box_cox_range<T: Scalar>(theta: T) -> TransformRange<T> {
    let mut r = TransformRange { lower: T::neg_infinity(), upper: T::infinity() };
    if near(theta, 0.0) {
        return r;
    }
    if theta > T::zero() {
        r.lower = -T::one() / theta;
    } else {
        r.upper = -T::one() / theta;
    }
    r
}

fn domain_error<T: Scalar>(z: T, range: &TransformRange<T>) -> Error {
    Error::Domain { value: z.as_f64(), lower: range.lower.as_f64(), upper: range.upper.as_f64() }
}

impl TransformFamily {
    /// Yeo-Johnson with the search interval `[-1, 2]`.
    pub const fn yeo_johnson() -> Self {
        Self { kind: FamilyKind::YeoJohnson, domain: (-1.0, 2.0) }
    }

    /// Box-Cox with the search interval `[-1, 2]`; responses must be positive.
    pub const fn box_cox() -> Self {
        Self { kind: FamilyKind::BoxCox, domain: (-1.0, 2.0) }
    }

    pub fn with_domain(mut self, lower: f64, upper: f64) -> Self {
        self.domain = (lower, upper);
        self
    }

    pub fn forward<T: Scalar>(&self, theta: T, y: T) -> Result<T> {
        match self.kind {
            FamilyKind::YeoJohnson => Ok(yeo_johnson(theta, y)),
            FamilyKind::BoxCox => box_cox(theta, y),
        }
    }

    pub fn inverse<T: Scalar>(&self, theta: T, z: T) -> Result<T> {
        match self.kind {
            FamilyKind::YeoJohnson => yeo_johnson_inverse(theta, z),
            FamilyKind::BoxCox => box_cox_inverse(theta, z),
        }
    }

    pub fn d_dy<T: Scalar>(&self, theta: T, y: T) -> Result<T> {
        match self.kind {
            FamilyKind::YeoJohnson => Ok(yeo_johnson_dy(theta, y)),
            FamilyKind::BoxCox => {
                if !(y > T::zero()) {
                    return Err(Error::Domain { value: y.as_f64(), lower: 0.0, upper: f64::INFINITY });
                }
                Ok(((theta - T::one()) * y.ln()).exp())
            }
        }
    }

    pub fn range<T: Scalar>(&self, theta: T) -> TransformRange<T> {
        match self.kind {
            FamilyKind::YeoJohnson => yeo_johnson_range(theta),
            FamilyKind::BoxCox => box_cox_range(theta),
        }
    }

    /// Transforms every response.
    pub fn forward_all<T: Scalar>(&self, theta: T, y: &[T]) -> Result<Vec<T>> {
        y.iter().map(|&v| self.forward(theta, v)).collect()
    }
}
