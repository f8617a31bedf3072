use serde::{Deserialize, Serialize};

use crate::scalar::{pow_half, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Epanechnikov,
    Gaussian,
}

/// Product kernel on `R^dim` built from a one-dimensional density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub dim: usize,
}

impl Kernel {
    pub const fn epanechnikov(dim: usize) -> Self {
        Self { kind: KernelKind::Epanechnikov, dim }
    }

    pub const fn gaussian(dim: usize) -> Self {
        Self { kind: KernelKind::Gaussian, dim }
    }

    pub fn with_dim(self, dim: usize) -> Self {
        Self { dim, ..self }
    }

    /// Support radius per coordinate, `None` for unbounded support.
    pub fn radius<T: Scalar>(&self) -> Option<T> {
        match self.kind {
            KernelKind::Epanechnikov => Some(T::one()),
            KernelKind::Gaussian => None,
        }
    }

    /// One-dimensional kernel.
    #[inline]
    pub fn k1<T: Scalar>(&self, u: T) -> T {
        match self.kind {
            KernelKind::Epanechnikov => {
                let a = u.abs();
                if a < T::one() {
                    T::lit(0.75) * (T::one() - u * u)
                } else {
                    T::zero()
                }
            }
            KernelKind::Gaussian => (-(u * u) / T::lit(2.0)).exp() / T::lit(2.0 * std::f64::consts::PI).sqrt(),
        }
    }

    /// One-dimensional self-convolution `(K*K)(u)`.
    #[inline]
    pub fn conv1<T: Scalar>(&self, u: T) -> T {
        match self.kind {
            KernelKind::Epanechnikov => {
                let a = u.abs();
                let two = T::lit(2.0);
                if a < two {
                    let c = two - a;
                    T::lit(3.0 / 160.0) * c * c * c * (a * a + T::lit(6.0) * a + T::lit(4.0))
                } else {
                    T::zero()
                }
            }
            // N(0, 2) density
            KernelKind::Gaussian => (-(u * u) / T::lit(4.0)).exp() / (T::lit(2.0) * T::PI().sqrt()),
        }
    }

    pub fn eval<T: Scalar>(&self, u: &[T]) -> T {
        u.iter().fold(T::one(), |acc, &v| acc * self.k1(v))
    }

    pub fn selfconv<T: Scalar>(&self, u: &[T]) -> T {
        u.iter().fold(T::one(), |acc, &v| acc * self.conv1(v))
    }

    /// `K((a - b) / h)` without the `h^-d` normalisation.
    #[inline]
    pub fn weight<T: Scalar>(&self, a: &[T], b: &[T], h: T) -> T {
        let mut w = T::one();
        for (&p, &q) in a.iter().zip(b) {
            w *= self.k1((p - q) / h);
            if w == T::zero() {
                break;
            }
        }
        w
    }

    /// `K_h(a - b) = K((a - b) / h) / h^d`.
    #[inline]
    pub fn scaled<T: Scalar>(&self, a: &[T], b: &[T], h: T) -> T {
        self.weight(a, b, h) / h.powi(a.len() as i32)
    }

    /// `(K*K)_h(a - b) = (K*K)((a - b) / h) / h^d`.
    #[inline]
    pub fn selfconv_scaled<T: Scalar>(&self, a: &[T], b: &[T], h: T) -> T {
        let mut w = T::one();
        for (&p, &q) in a.iter().zip(b) {
            w *= self.conv1((p - q) / h);
            if w == T::zero() {
                break;
            }
        }
        w / h.powi(a.len() as i32)
    }

    /// `(int K^2, int (K*K)^2)` for the `dim`-variate product kernel.
    pub fn moments<T: Scalar>(&self) -> (T, T) {
        let (k2, kk2) = match self.kind {
            KernelKind::Epanechnikov => (T::lit(0.6), T::lit(167.0 / 385.0)),
            KernelKind::Gaussian => {
                let sqrt_pi = T::PI().sqrt();
                (T::one() / (T::lit(2.0) * sqrt_pi), T::one() / (T::lit(2.0) * T::lit(2.0).sqrt() * sqrt_pi))
            }
        };
        (k2.powi(self.dim as i32), kk2.powi(self.dim as i32))
    }

    /// `h^(dim/2)`, used throughout for the statistics' scaling.
    pub fn half_power<T: Scalar>(&self, h: T) -> T {
        pow_half(h, self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Composite Simpson on `[a, b]` with `n` (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    /// Adaptive Simpson, used as the independent quadrature oracle.
    fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
    }

    #[test]
    fn evaluation_examples() {
        let k1 = Kernel::epanechnikov(1);
        assert_eq!(k1.eval(&[0.0f64]), 0.75);
        assert_eq!(k1.eval(&[1.2f64]), 0.0);
        assert_relative_eq!(Kernel::epanechnikov(2).eval(&[0.0f64, 0.0]), 0.5625);
        assert_eq!(k1.selfconv(&[2.5f64]), 0.0);
        assert_relative_eq!(k1.selfconv(&[0.0f64]), 0.6, epsilon = 1e-15);
        let g = Kernel::gaussian(1);
        assert_relative_eq!(g.selfconv(&[0.0f64]), 1.0 / (2.0 * std::f64::consts::PI.sqrt()), epsilon = 1e-15);
    }

    #[test]
    fn squared_kernel_integrals_match_quadrature() {
        let k = Kernel::epanechnikov(1);
        let int_k2 = adaptive(&|u| k.k1(u).powi(2), -1.0, 1.0, 1e-12);
        assert_relative_eq!(int_k2, 0.6, epsilon = 1e-10);
        let (m2, mm2) = k.moments::<f64>();
        assert_relative_eq!(m2, 0.6, epsilon = 1e-15);
        let int_c2 = adaptive(&|u| k.conv1(u).powi(2), -2.0, 2.0, 1e-13);
        assert_relative_eq!(mm2, int_c2, epsilon = 1e-10);
        assert_relative_eq!(Kernel::epanechnikov(2).moments::<f64>().0, 0.36, epsilon = 1e-15);

        let g = Kernel::gaussian(1);
        let (g2, gg2) = g.moments::<f64>();
        assert_relative_eq!(g2, 1.0 / (2.0 * std::f64::consts::PI.sqrt()), epsilon = 1e-15);
        assert_relative_eq!(g2, adaptive(&|u| g.k1(u).powi(2), -12.0, 12.0, 1e-13), epsilon = 1e-10);
        assert_relative_eq!(gg2, adaptive(&|u| g.conv1(u).powi(2), -16.0, 16.0, 1e-13), epsilon = 1e-10);
    }

    #[test]
    fn selfconv_integrates_to_one() {
        for (k, r) in [(Kernel::epanechnikov(1), 2.0), (Kernel::gaussian(1), 14.0)] {
            let total = simpson(|u| k.conv1(u), -r, r, 20_000);
            assert!((total - 1.0).abs() < 1e-6, "{k:?}: {total}");
        }
    }

    #[test]
    fn selfconv_matches_numerical_convolution() {
        for (k, r) in [(Kernel::epanechnikov(1), 1.0f64), (Kernel::gaussian(1), 12.0)] {
            for i in 0..50 {
                let u = -2.0 * r.min(2.0) + 4.0 * r.min(2.0) * i as f64 / 49.0;
                // integrate only over the overlap of the two supports
                let (a, b) = if k.kind == KernelKind::Epanechnikov { ((u - 1.0).max(-1.0), (u + 1.0).min(1.0)) } else { (-r, r) };
                let num = if a < b { adaptive(&|x| k.k1(x) * k.k1(u - x), a, b, 1e-13) } else { 0.0 };
                assert!((num - k.conv1(u)).abs() < 1e-8, "{k:?} u={u}: {num} vs {}", k.conv1(u));
            }
        }
    }

    #[test]
    fn symmetric() {
        let k = Kernel::epanechnikov(1);
        for i in 0..40 {
            let u = i as f64 * 0.07;
            assert_eq!(k.k1(u), k.k1(-u));
            assert_eq!(k.conv1(u), k.conv1(-u));
        }
    }
}
