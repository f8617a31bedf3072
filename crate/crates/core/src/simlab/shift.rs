//! Theoretical mean shifts of the standardized statistics under local
//! alternatives. Diagnostics only; nothing in the tests depends on them.

use rand::Rng;

use crate::resampling::{Purpose, StreamSeed};
use crate::significance::psi;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn step(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    step(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 48)
}

/// `E[Delta_n(X)^2 f_X(X)] = int Delta_n(x)^2 f_X(x)^2 dx` over `support`.
pub fn theoretical_shift_lof(delta: impl Fn(f64) -> f64, density: impl Fn(f64) -> f64, support: (f64, f64)) -> f64 {
    let g = |x: f64| {
        let (d, f) = (delta(x), density(x));
        d * d * f * f
    };
    adaptive_simpson(&g, support.0, support.1, 1e-12)
}

/// Monte Carlo estimate and standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
}

/// `E[int d(w,V1) d(w,V2) dw * k(V1 - V2)]` for independent uniform `W, V1, V2`,
/// where all densities are one. `k` is the weight on `V1 - V2`.
pub fn shift_sig_with(d: impl Fn(f64, f64) -> f64, k: impl Fn(f64) -> f64, draws: usize, seed: u64) -> McEstimate {
    let mut rng = StreamSeed::new(seed, 0, Purpose::Custom(0x5348_4946)).rng();
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        let (w, v1, v2): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let x = d(w, v1) * d(w, v2) * k(v1 - v2);
        s1 += x;
        s2 += x * x;
    }
    let n = draws as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    McEstimate { mean, se: (var / n).sqrt() }
}

/// Shift of the significance statistic with weight `psi` of variance `psi_var`,
/// from `10^6` draws.
pub fn theoretical_shift_sig(d: impl Fn(f64, f64) -> f64, psi_var: f64, seed: u64) -> McEstimate {
    shift_sig_with(d, |t| psi(&[t], psi_var), 1_000_000, seed)
}
