use crate::data::Matrix;
use crate::scalar::{pow_half, Scalar};
use crate::smoothing::Kernel;

/// `prod_c phi_v(t_c)` with `phi_v` the centred normal density of variance `v`.
#[inline]
pub fn psi<T: Scalar>(t: &[T], v: T) -> T {
    let norm = T::one() / (T::lit(2.0) * T::PI() * v).sqrt();
    t.iter().fold(T::one(), |acc, &x| acc * norm * (-(x * x) / (T::lit(2.0) * v)).exp())
}

fn psi_between<T: Scalar>(a: &[T], b: &[T], v: T) -> T {
    let norm = T::one() / (T::lit(2.0) * T::PI() * v).sqrt();
    a.iter().zip(b).fold(T::one(), |acc, (&x, &y)| {
        let d = x - y;
        acc * norm * (-(d * d) / (T::lit(2.0) * v)).exp()
    })
}

/// Set partitions of four labelled positions as restricted growth strings.
fn partitions4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(15);
    for b in 0..2 {
        for c in 0..=b + 1 {
            let m = b.max(c);
            for d in 0..=m + 1 {
                out.push([0, b, c, d]);
            }
        }
    }
    out
}

/// Weight matrices of the significance statistics for fixed covariates,
/// bandwidths and weight function. Everything that does not depend on the
/// responses is computed once here; each statistic then costs `O(n^2)`.
#[derive(Debug, Clone)]
pub struct SigWeights<T> {
    n: usize,
    /// `h^{p/2}`.
    hp2: T,
    /// `h^p`.
    hp: T,
    /// `K_h(W_i - W_j) psi(V_i - V_j)`, zero diagonal.
    m: Vec<T>,
    /// `L_g(W_i - W_k)`, zero diagonal.
    l: Vec<T>,
    /// Quadratic form of the `k`-collapsed terms.
    f: Vec<T>,
    /// Pairs with non-zero `m`, `i < j`.
    pairs: Vec<(u32, u32)>,
    /// Kernel density estimate of `W` at each row.
    f_w: Vec<T>,
    partitions: Vec<([usize; 4], T)>,
}

impl<T: Scalar> SigWeights<T> {
    pub fn new(w: &Matrix<T>, v: &Matrix<T>, h: T, g: T, k: Kernel, l: Kernel, psi_var: T) -> Self {
        let n = w.nrows();
        let p = w.ncols();
        let (k, l_kernel) = (k.with_dim(p), l.with_dim(p));
        let hp = h.powi(p as i32);
        let gp = g.powi(p as i32);
        let mut m = vec![T::zero(); n * n];
        let mut lm = vec![T::zero(); n * n];
        let mut pairs = Vec::new();
        let mut f_w = vec![l_kernel.eval(&vec![T::zero(); p]) / gp; n];
        for i in 0..n {
            for j in i + 1..n {
                let kw = k.weight(w.row(i), w.row(j), h);
                if kw != T::zero() {
                    let val = kw / hp * psi_between(v.row(i), v.row(j), psi_var);
                    m[i * n + j] = val;
                    m[j * n + i] = val;
                    if val != T::zero() {
                        pairs.push((i as u32, j as u32));
                    }
                }
                let lw = l_kernel.weight(w.row(i), w.row(j), g) / gp;
                lm[i * n + j] = lw;
                lm[j * n + i] = lw;
                f_w[i] += lw;
                f_w[j] += lw;
            }
        }
        let nf = T::from_usize_lossy(n);
        f_w.iter_mut().for_each(|v| *v /= nf);
        let f = collapsed_form(&m, &lm, n);
        let partitions = partitions4()
            .into_iter()
            .map(|rgs| {
                let blocks = rgs.iter().max().unwrap() + 1;
                let mut mu = T::one();
                for b in 0..blocks {
                    let size = rgs.iter().filter(|&&r| r == b).count();
                    // (-1)^(s-1) (s-1)!
                    let fact = (1..size).product::<usize>();
                    let sign = if size % 2 == 0 { -T::one() } else { T::one() };
                    mu *= sign * T::from_usize_lossy(fact);
                }
                (rgs, mu)
            })
            .collect();
        Self { n, hp2: pow_half(h, p), hp, m, l: lm, f, pairs, f_w, partitions }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn density(&self) -> &[T] {
        &self.f_w
    }

    fn a_row_sums(&self, z: &[T]) -> (Vec<T>, Vec<T>) {
        let n = self.n;
        let mut s = vec![T::zero(); n];
        let mut s2 = vec![T::zero(); n];
        for i in 0..n {
            let row = &self.l[i * n..(i + 1) * n];
            for (k, &lik) in row.iter().enumerate() {
                if lik != T::zero() {
                    let a = (z[i] - z[k]) * lik;
                    s[i] += a;
                    s2[i] += a * a;
                }
            }
        }
        (s, s2)
    }

    /// `I_n` for transformed responses `z`: the distinct-index quadruple sum.
    pub fn i_stat(&self, z: &[T]) -> T {
        let n = self.n;
        if n == 0 {
            return T::zero();
        }
        let (s, _) = self.a_row_sums(z);
        let mut total = T::zero();
        for &(i, j) in &self.pairs {
            let (i, j) = (i as usize, j as usize);
            let mij = self.m[i * n + j];
            let aij = (z[i] - z[j]) * self.l[i * n + j];
            // both orders (i, j) and (j, i); a_ji = -a_ij
            total += mij * (T::lit(2.0) * s[i] * s[j] + T::lit(2.0) * aij * (s[i] - s[j]) - T::lit(2.0) * aij * aij);
        }
        // F annihilates constants, so shifting z leaves the form unchanged
        let zc: Vec<T> = z.iter().map(|&v| v - z[0]).collect();
        let mut quad = T::zero();
        for i in 0..n {
            let row = &self.f[i * n..(i + 1) * n];
            let inner = row.iter().zip(&zc).fold(T::zero(), |acc, (&fik, &zk)| acc + fik * zk);
            quad += zc[i] * inner;
        }
        self.hp2 / T::from_usize_lossy(n).powi(3) * (total - quad)
    }

    /// Variance estimate `tau^2` for responses `z`: the distinct-index
    /// six-fold sum, evaluated per pair by Mobius inversion over set
    /// partitions of the four free indices.
    pub fn tau2(&self, z: &[T]) -> T {
        let n = self.n;
        let a = |i: usize, k: usize| (z[i] - z[k]) * self.l[i * n + k];
        let (s, s2) = self.a_row_sums(z);
        let mut total = T::zero();
        for &(i, j) in &self.pairs {
            let (i, j) = (i as usize, j as usize);
            let mij = self.m[i * n + j];
            let weight = mij * mij;
            let (mut c11, mut c21, mut c12, mut c22) = (T::zero(), T::zero(), T::zero(), T::zero());
            for k in 0..n {
                let (u, v) = (a(i, k), a(j, k));
                if u != T::zero() && v != T::zero() {
                    c11 += u * v;
                    c21 += u * u * v;
                    c12 += u * v * v;
                    c22 += u * u * v * v;
                }
            }
            let aij = a(i, j);
            // power sums P[r][s] = sum_k u_k^r v_k^s over k not in {i, j}
            let mut pw = [[T::zero(); 3]; 3];
            pw[1][0] = s[i] - aij;
            pw[2][0] = s2[i] - aij * aij;
            pw[0][1] = s[j] + aij;
            pw[0][2] = s2[j] - aij * aij;
            pw[1][1] = c11;
            pw[2][1] = c21;
            pw[1][2] = c12;
            pw[2][2] = c22;
            let pair = self.distinct_sum(&pw);
            // both orders of (i, j) give the same value
            total += T::lit(2.0) * weight * pair;
        }
        T::lit(2.0) * self.hp / T::from_usize_lossy(n).powi(6) * total
    }

    fn distinct_sum(&self, pw: &[[T; 3]; 3]) -> T {
        // positions 0, 1 carry u, positions 2, 3 carry v
        let mut out = T::zero();
        for (rgs, mu) in &self.partitions {
            let mut prod = *mu;
            let blocks = rgs.iter().max().unwrap() + 1;
            for b in 0..blocks {
                let r = (0..2).filter(|&p| rgs[p] == b).count();
                let s = (2..4).filter(|&p| rgs[p] == b).count();
                prod *= pw[r][s];
            }
            out += prod;
        }
        out
    }

    /// `(h^{p/2}/n) sum_{i != j} M_ij b_i b_j` for `b_i = f_W(W_i) e_i`.
    pub fn i_tilde(&self, e: &[T]) -> T {
        let b: Vec<T> = e.iter().zip(&self.f_w).map(|(&x, &f)| x * f).collect();
        let n = self.n;
        let sum = self.pairs.iter().fold(T::zero(), |acc, &(i, j)| {
            let (i, j) = (i as usize, j as usize);
            acc + self.m[i * n + j] * b[i] * b[j]
        });
        self.hp2 * T::lit(2.0) * sum / T::from_usize_lossy(n)
    }
}

/// `F` with `z' F z = sum_{i,j,k} M_ij L_ik L_jk (z_i - z_k)(z_j - z_k)`.
fn collapsed_form<T: Scalar>(m: &[T], l: &[T], n: usize) -> Vec<T> {
    let matmul = |a: &[T], b: &[T]| {
        let mut c = vec![T::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let aik = a[i * n + k];
                if aik == T::zero() {
                    continue;
                }
                let (brow, crow) = (&b[k * n..(k + 1) * n], &mut c[i * n..(i + 1) * n]);
                for (cv, &bv) in crow.iter_mut().zip(brow) {
                    *cv += aik * bv;
                }
            }
        }
        c
    };
    let ll = matmul(l, l);
    let hm = matmul(m, l);
    let e: Vec<T> = l.iter().zip(&hm).map(|(&a, &b)| a * b).collect();
    let mut f = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            f[i * n + j] = m[i * n + j] * ll[i * n + j] - e[i * n + j] - e[j * n + i];
        }
    }
    for k in 0..n {
        let g = (0..n).fold(T::zero(), |acc, i| acc + e[i * n + k]);
        f[k * n + k] += g;
    }
    f
}
