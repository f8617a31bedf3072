//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the estimators and statistics are written against.
///
/// Implemented for `f32` and `f64`. Random draws are produced in `f64` and
/// converted, so reproducibility guarantees hold per scalar type.
pub trait Scalar: Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `x^(k/2)` for a small non-negative integer `k`, avoiding `powf` when possible.
#[inline]
pub(crate) fn pow_half<T: Scalar>(x: T, k: usize) -> T {
    let whole = x.powi((k / 2) as i32);
    if k % 2 == 1 {
        whole * x.sqrt()
    } else {
        whole
    }
}
