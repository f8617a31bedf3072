use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::linalg::{solve_in_place, solve_sym2};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Smoother {
    NadarayaWatson,
    #[default]
    LocalLinear,
}

/// Rows sorted by their first coordinate, so that kernel sums only visit
/// rows within one support radius along that axis.
#[derive(Debug, Clone)]
pub struct NeighborIndex<T> {
    order: Vec<usize>,
    keys: Vec<T>,
}

impl<T: Scalar> NeighborIndex<T> {
    pub fn new(x: &Matrix<T>) -> Self {
        let mut order: Vec<usize> = (0..x.nrows()).collect();
        order.sort_by(|&a, &b| x.get(a, 0).partial_cmp(&x.get(b, 0)).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        let keys = order.iter().map(|&i| x.get(i, 0)).collect();
        Self { order, keys }
    }

    /// Row indices whose first coordinate lies in `[center - radius, center + radius]`.
    #[inline]
    pub fn candidates(&self, center: T, radius: Option<T>) -> &[usize] {
        match radius {
            None => &self.order,
            Some(r) => {
                let lo = self.keys.partition_point(|&k| k < center - r);
                let hi = self.keys.partition_point(|&k| k <= center + r);
                &self.order[lo..hi]
            }
        }
    }
}

/// Kernel density estimate `(1/n) sum_i K_h(x - data_i)`.
pub fn kde<T: Scalar>(data: &Matrix<T>, h: T, x: &[T], k: &Kernel) -> T {
    let n = data.nrows();
    let s = (0..n).fold(T::zero(), |acc, i| acc + k.weight(x, data.row(i), h));
    s / (T::from_usize_lossy(n) * h.powi(data.ncols() as i32))
}

/// Density estimate at every row of `data`.
pub fn kde_at_rows<T: Scalar>(data: &Matrix<T>, h: T, k: &Kernel) -> Vec<T> {
    let index = NeighborIndex::new(data);
    let norm = T::from_usize_lossy(data.nrows()) * h.powi(data.ncols() as i32);
    let radius = k.radius::<T>().map(|r| r * h);
    (0..data.nrows())
        .map(|i| {
            let xi = data.row(i);
            index.candidates(xi[0], radius).iter().fold(T::zero(), |acc, &j| acc + k.weight(xi, data.row(j), h)) / norm
        })
        .collect()
}

/// Nadaraya-Watson estimate at `at`.
pub fn nadaraya_watson<T: Scalar>(x: &Matrix<T>, z: &[T], h: T, at: &[T], k: &Kernel) -> Result<T> {
    weighted_mean(x, z, h, at, k, 0..x.nrows(), None)
}

/// Local linear estimate at `at` (intercept of the kernel-weighted fit of
/// `z` on `(1, x - at)`).
pub fn local_linear<T: Scalar>(x: &Matrix<T>, z: &[T], h: T, at: &[T], k: &Kernel) -> Result<T> {
    let mut ws = LocalWorkspace::new(x.ncols());
    ws.local_linear(x, z, h, at, k, 0..x.nrows(), None)
}

/// Local linear with the Nadaraya-Watson fallback for singular designs.
pub fn local_linear_or_nw<T: Scalar>(x: &Matrix<T>, z: &[T], h: T, at: &[T], k: &Kernel) -> Result<T> {
    match local_linear(x, z, h, at, k) {
        Err(Error::SingularDesign { .. }) => nadaraya_watson(x, z, h, at, k),
        other => other,
    }
}

fn weighted_mean<T: Scalar>(x: &Matrix<T>, z: &[T], h: T, at: &[T], k: &Kernel, rows: impl IntoIterator<Item = usize>, exclude: Option<usize>) -> Result<T> {
    let (mut num, mut den) = (T::zero(), T::zero());
    for j in rows {
        if Some(j) == exclude {
            continue;
        }
        let w = k.weight(at, x.row(j), h);
        num += w * z[j];
        den += w;
    }
    if den > T::zero() {
        Ok(num / den)
    } else {
        Err(Error::EmptyNeighborhood)
    }
}

/// Scratch space for local polynomial fits in `d` dimensions.
pub(crate) struct LocalWorkspace<T> {
    d: usize,
    s: Vec<T>,
    t: Vec<T>,
    inv: Vec<T>,
    u: Vec<T>,
}

impl<T: Scalar> LocalWorkspace<T> {
    pub(crate) fn new(d: usize) -> Self {
        let p = d + 1;
        Self { d, s: vec![T::zero(); p * p], t: vec![T::zero(); p], inv: vec![T::zero(); p * p], u: vec![T::zero(); d] }
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn local_linear(
        &mut self,
        x: &Matrix<T>,
        z: &[T],
        h: T,
        at: &[T],
        k: &Kernel,
        rows: impl IntoIterator<Item = usize>,
        exclude: Option<usize>,
    ) -> Result<T> {
        if self.d == 1 {
            return local_linear_1d(x, z, h, at[0], k, rows, exclude);
        }
        let p = self.d + 1;
        self.s.iter_mut().for_each(|v| *v = T::zero());
        self.t.iter_mut().for_each(|v| *v = T::zero());
        let mut any = false;
        for j in rows {
            if Some(j) == exclude {
                continue;
            }
            let xj = x.row(j);
            let w = k.weight(xj, at, h);
            if w == T::zero() {
                continue;
            }
            any = true;
            for (c, u) in self.u.iter_mut().enumerate() {
                *u = (xj[c] - at[c]) / h;
            }
            // row/col 0 is the intercept
            self.s[0] += w;
            self.t[0] += w * z[j];
            for a in 0..self.d {
                let wa = w * self.u[a];
                self.s[a + 1] += wa;
                self.t[a + 1] += wa * z[j];
                for b in a..self.d {
                    self.s[(a + 1) * p + b + 1] += wa * self.u[b];
                }
            }
        }
        if !any {
            return Err(Error::EmptyNeighborhood);
        }
        for a in 0..p {
            for b in 0..a {
                self.s[a * p + b] = self.s[b * p + a];
            }
        }
        solve_in_place(&mut self.s, &mut self.t, &mut self.inv, p)?;
        Ok(self.t[0])
    }
}

fn local_linear_1d<T: Scalar>(x: &Matrix<T>, z: &[T], h: T, at: T, k: &Kernel, rows: impl IntoIterator<Item = usize>, exclude: Option<usize>) -> Result<T> {
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for j in rows {
        if Some(j) == exclude {
            continue;
        }
        let u = (x.get(j, 0) - at) / h;
        let w = k.k1(u);
        if w == T::zero() {
            continue;
        }
        let wu = w * u;
        s0 += w;
        s1 += wu;
        s2 += wu * u;
        t0 += w * z[j];
        t1 += wu * z[j];
    }
    if s0 == T::zero() {
        return Err(Error::EmptyNeighborhood);
    }
    solve_sym2(s0, s1, s2, t0, t1).map(|(a, _)| a)
}

/// Smoother evaluated at every row of `x`; local linear falls back to
/// Nadaraya-Watson where its design is singular.
pub fn fitted_values<T: Scalar>(x: &Matrix<T>, z: &[T], h: T, k: &Kernel, smoother: Smoother) -> Result<Vec<T>> {
    let index = NeighborIndex::new(x);
    let mut ws = LocalWorkspace::new(x.ncols());
    let radius = k.radius::<T>().map(|r| r * h);
    (0..x.nrows())
        .map(|i| {
            let xi = x.row(i);
            let rows = index.candidates(xi[0], radius);
            predict(&mut ws, x, z, h, xi, k, smoother, rows, None)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn predict<T: Scalar>(
    ws: &mut LocalWorkspace<T>,
    x: &Matrix<T>,
    z: &[T],
    h: T,
    at: &[T],
    k: &Kernel,
    smoother: Smoother,
    rows: &[usize],
    exclude: Option<usize>,
) -> Result<T> {
    match smoother {
        Smoother::NadarayaWatson => weighted_mean(x, z, h, at, k, rows.iter().copied(), exclude),
        Smoother::LocalLinear => match ws.local_linear(x, z, h, at, k, rows.iter().copied(), exclude) {
            Err(Error::SingularDesign { .. }) => weighted_mean(x, z, h, at, k, rows.iter().copied(), exclude),
            other => other,
        },
    }
}

/// Leave-one-out squared prediction error. Points whose deleted neighbourhood
/// is empty contribute `(z_i - mean(z))^2`.
pub fn loo_cv_score<T: Scalar>(x: &Matrix<T>, z: &[T], h: T, k: &Kernel, smoother: Smoother) -> T {
    loo_cv_score_indexed(x, z, h, k, smoother, &NeighborIndex::new(x))
}

pub(crate) fn loo_cv_score_indexed<T: Scalar>(x: &Matrix<T>, z: &[T], h: T, k: &Kernel, smoother: Smoother, index: &NeighborIndex<T>) -> T {
    let n = z.len();
    let mean = z.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    let mut ws = LocalWorkspace::new(x.ncols());
    let radius = k.radius::<T>().map(|r| r * h);
    let mut total = T::zero();
    for i in 0..n {
        let xi = x.row(i);
        let rows = index.candidates(xi[0], radius);
        let err = match predict(&mut ws, x, z, h, xi, k, smoother, rows, Some(i)) {
            Ok(m) => z[i] - m,
            Err(_) => z[i] - mean,
        };
        total += err * err;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn col(v: &[f64]) -> Matrix<f64> {
        Matrix::column(v.to_vec())
    }

    #[test]
    fn kde_examples() {
        let k = Kernel::epanechnikov(1);
        assert_relative_eq!(kde(&col(&[0.0]), 1.0, &[0.0], &k), 0.75);
        assert_eq!(kde(&col(&[-5.0, 5.0]), 1.0, &[0.0], &k), 0.0);
        assert_relative_eq!(kde(&col(&[0.0, 0.5]), 1.0, &[0.0], &k), 0.65625, epsilon = 1e-15);
    }

    #[test]
    fn kde_at_rows_matches_pointwise_and_is_permutation_invariant() {
        let data: Vec<f64> = (0..30).map(|i| ((i * 37) % 29) as f64 / 7.0).collect();
        let m = col(&data);
        let k = Kernel::epanechnikov(1);
        let all = kde_at_rows(&m, 0.8, &k);
        for (i, v) in all.iter().enumerate() {
            assert_relative_eq!(*v, kde(&m, 0.8, &[data[i]], &k), epsilon = 1e-14);
        }
        let perm: Vec<usize> = (0..30).rev().collect();
        let pm = m.permuted(&perm);
        for i in 0..30 {
            assert_relative_eq!(kde(&pm, 0.8, &[1.3], &k), kde(&m, 0.8, &[1.3], &k), epsilon = 1e-14);
            let _ = i;
        }
    }

    #[test]
    fn nadaraya_watson_examples() {
        let k = Kernel::epanechnikov(1);
        assert_eq!(nadaraya_watson(&col(&[0.0]), &[7.0], 0.3, &[0.0], &k).unwrap(), 7.0);
        assert_relative_eq!(nadaraya_watson(&col(&[-0.1, 0.1]), &[1.0, 3.0], 1.0, &[0.0], &k).unwrap(), 2.0, epsilon = 1e-15);
        assert_eq!(nadaraya_watson(&col(&[5.0]), &[1.0], 1.0, &[0.0], &k), Err(Error::EmptyNeighborhood));
        let xs = col(&[0.1, 0.4, 0.45, 0.9]);
        assert_relative_eq!(nadaraya_watson(&xs, &[2.5; 4], 0.5, &[0.3], &k).unwrap(), 2.5, epsilon = 1e-15);
    }

    #[test]
    fn local_linear_examples() {
        let k = Kernel::epanechnikov(1);
        let xs = col(&[0.0, 0.2, 0.35, 0.5, 0.9, 1.0]);
        let z: Vec<f64> = xs.as_slice().iter().map(|x| 1.5 - 2.0 * x).collect();
        for at in [0.1, 0.33, 0.77] {
            assert_relative_eq!(local_linear(&xs, &z, 0.4, &[at], &k).unwrap(), 1.5 - 2.0 * at, epsilon = 1e-12);
        }
        // single point: singular design, NW fallback gives the value
        assert!(matches!(local_linear(&col(&[0.0]), &[7.0], 1.0, &[0.0], &k), Err(Error::SingularDesign { .. })));
        assert_eq!(local_linear_or_nw(&col(&[0.0]), &[7.0], 1.0, &[0.0], &k).unwrap(), 7.0);
    }

    #[test]
    fn local_linear_quadratic_by_hand() {
        // weights at u = -0.1, 0, 0.1 with h = 10: 0.75*0.99, 0.75, 0.75*0.99
        // S0 = 0.75*(1 + 2*0.99), S1 = 0, so the intercept is the weighted mean of z.
        let k = Kernel::epanechnikov(1);
        let xs = col(&[-1.0, 0.0, 1.0]);
        let z = [1.0, 0.0, 1.0];
        let w = 0.75 * 0.99;
        let expected = (2.0 * w) / (0.75 + 2.0 * w);
        let got = local_linear(&xs, &z, 10.0, &[0.0], &k).unwrap();
        assert_relative_eq!(got, expected, epsilon = 1e-14);
        assert!((-1.0..=1.0).contains(&got));
    }

    #[test]
    fn local_linear_reproduces_affine_in_two_dimensions() {
        let k = Kernel::epanechnikov(2);
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 7) as f64 / 6.0, (i % 5) as f64 / 4.0]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let z: Vec<f64> = rows.iter().map(|r| 0.5 + 2.0 * r[0] - 3.0 * r[1]).collect();
        let fit = fitted_values(&x, &z, 0.6, &k, Smoother::LocalLinear).unwrap();
        for (f, zz) in fit.iter().zip(&z) {
            assert_relative_eq!(f, zz, epsilon = 1e-10);
        }
        let nw = fitted_values(&x, &[4.0; 40], 0.3, &k, Smoother::NadarayaWatson).unwrap();
        assert!(nw.iter().all(|v| (v - 4.0).abs() < 1e-12));
    }

    #[test]
    fn neighbor_index_window() {
        let x = col(&[0.5, 0.1, 0.9, 0.3]);
        let idx = NeighborIndex::new(&x);
        let mut c = idx.candidates(0.35, Some(0.1)).to_vec();
        c.sort();
        assert_eq!(c, vec![3]);
        assert_eq!(idx.candidates(0.0, None).len(), 4);
    }
}
