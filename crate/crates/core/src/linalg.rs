//! Small dense linear systems (local polynomial fits, normal equations).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Designs whose 1-norm condition number exceeds this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Solves `A x = b` for a square row-major `A` of order `n` by Gauss-Jordan
/// elimination with partial pivoting. `a` and `b` are overwritten; on success
/// `b` holds the solution.
///
/// The 1-norm condition number is computed from the explicit inverse and
/// reported through [`Error::SingularDesign`] when it exceeds [`MAX_CONDITION`].
pub fn solve_in_place<T: Scalar>(a: &mut [T], b: &mut [T], inv: &mut [T], n: usize) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(inv.len(), n * n);
    let norm_a = one_norm(a, n);
    for (i, v) in inv.iter_mut().enumerate() {
        *v = if i / n == i % n { T::one() } else { T::zero() };
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| a[r * n + col].abs().partial_cmp(&a[s * n + col].abs()).unwrap_or(std::cmp::Ordering::Equal)).unwrap_or(col);
        let p = a[pivot * n + col];
        if p == T::zero() || !p.is_finite() {
            return Err(Error::SingularDesign { condition: f64::INFINITY });
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
                inv.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        let recip = T::one() / p;
        for j in 0..n {
            a[col * n + j] *= recip;
            inv[col * n + j] *= recip;
        }
        b[col] *= recip;
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col];
            if f == T::zero() {
                continue;
            }
            for j in 0..n {
                let (ac, ic) = (a[col * n + j], inv[col * n + j]);
                a[r * n + j] -= f * ac;
                inv[r * n + j] -= f * ic;
            }
            let bc = b[col];
            b[r] -= f * bc;
        }
    }
    let condition = (norm_a * one_norm(inv, n)).as_f64();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularDesign { condition });
    }
    Ok(())
}

fn one_norm<T: Scalar>(a: &[T], n: usize) -> T {
    (0..n).map(|j| (0..n).fold(T::zero(), |s, i| s + a[i * n + j].abs())).fold(T::zero(), T::max)
}

/// Symmetric 2x2 solve `[[a, b], [b, c]] x = r` with the same conditioning rule.
#[inline]
pub fn solve_sym2<T: Scalar>(a: T, b: T, c: T, r0: T, r1: T) -> Result<(T, T)> {
    let det = a * c - b * b;
    let norm = (a.abs() + b.abs()).max(b.abs() + c.abs());
    if det == T::zero() {
        return Err(Error::SingularDesign { condition: f64::INFINITY });
    }
    let condition = (norm * norm / det.abs()).as_f64();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularDesign { condition });
    }
    Ok(((c * r0 - b * r1) / det, (a * r1 - b * r0) / det))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_general_system() {
        let mut a = vec![2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        let x: [f64; 3] = [1.0, -2.0, 0.5];
        let mut b = vec![2.0 * x[0] + x[1], x[0] + 3.0 * x[1] + x[2], x[1] + 4.0 * x[2]];
        let mut inv = vec![0.0; 9];
        solve_in_place(&mut a, &mut b, &mut inv, 3).unwrap();
        for (u, v) in b.iter().zip(x) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn flags_singular() {
        let mut a = vec![1.0, 2.0, 2.0, 4.0];
        let mut b = vec![1.0, 2.0];
        let mut inv = vec![0.0; 4];
        assert!(matches!(solve_in_place(&mut a, &mut b, &mut inv, 2), Err(Error::SingularDesign { .. })));
        assert!(solve_sym2(1.0, 1.0, 1.0 + 1e-15, 0.0, 0.0).is_err());
        let (x, y): (f64, f64) = solve_sym2(2.0, 1.0, 2.0, 3.0, 3.0).unwrap();
        assert!((x - 1.0).abs() < 1e-15 && (y - 1.0).abs() < 1e-15);
    }
}
