//! Multiplier laws, residual resampling and the counter-based stream contract.
//!
//! Every random draw in the crate comes from a generator keyed by
//! `(master seed, index, purpose)`. Streams are materialised independently of
//! each other, so results do not depend on scheduling or worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type Stream = ChaCha8Rng;

/// What a stream is used for; part of the stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Purpose {
    /// Synthetic data generation.
    Data,
    /// Wild-bootstrap multipliers `U_i`.
    Wild,
    /// Multiplier-bootstrap weights `xi_i`.
    Multiplier,
    /// Smoothed residual resampling for the transformation bootstrap.
    Resample,
    /// Per Monte Carlo run.
    Run,
    Custom(u64),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Data => 0x6461_7461,
            Purpose::Wild => 0x7769_6c64,
            Purpose::Multiplier => 0x6d75_6c74,
            Purpose::Resample => 0x7265_7361,
            Purpose::Run => 0x7275_6e73,
            Purpose::Custom(t) => t.rotate_left(17) ^ 0x6375_7374_6f6d,
        }
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamSeed {
    pub master: u64,
    pub index: u64,
    pub purpose: Purpose,
}

impl StreamSeed {
    pub fn new(master: u64, index: u64, purpose: Purpose) -> Self {
        Self { master, index, purpose }
    }

    /// 64-bit digest of the key, usable as the master seed of a nested family
    /// of streams.
    pub fn digest(&self) -> u64 {
        let mut h = splitmix64(self.master ^ 0x5851_F42D_4C95_7F2D);
        h = splitmix64(h ^ self.index);
        splitmix64(h ^ self.purpose.tag())
    }

    /// Same index and purpose, keyed additionally by `k` (e.g. a retry count).
    pub fn child(&self, k: u64) -> Self {
        Self { master: splitmix64(self.digest() ^ k.wrapping_mul(0xD1B5_4A32_D192_ED03)), ..*self }
    }

    pub fn rng(&self) -> Stream {
        let mut seed = [0u8; 32];
        let mut h = self.digest();
        for chunk in seed.chunks_mut(8) {
            h = splitmix64(h);
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MultiplierLaw {
    /// Two-point law with mean 0, variance 1 and third moment 1.
    MammenTwoPoint,
    Rademacher,
    StandardNormal,
}

impl MultiplierLaw {
    /// Probability of the negative atom `(1 - sqrt 5) / 2` of the two-point law.
    pub fn mammen_low_probability() -> f64 {
        let s5 = 5f64.sqrt();
        (s5 + 1.0) / (2.0 * s5)
    }

    #[inline]
    pub fn draw(self, rng: &mut impl Rng) -> f64 {
        match self {
            MultiplierLaw::MammenTwoPoint => {
                let s5 = 5f64.sqrt();
                if rng.random::<f64>() < Self::mammen_low_probability() {
                    (1.0 - s5) / 2.0
                } else {
                    (1.0 + s5) / 2.0
                }
            }
            MultiplierLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            MultiplierLaw::StandardNormal => rng.sample(StandardNormal),
        }
    }
}

/// `n` independent multipliers from `law`.
pub fn draw_multipliers<T: Scalar>(law: MultiplierLaw, n: usize, rng: &mut impl Rng) -> Vec<T> {
    (0..n).map(|_| T::lit(law.draw(rng))).collect()
}

/// Residuals resampled with replacement and perturbed by `a_n` times a
/// standard normal.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedResample<T> {
    source: Vec<T>,
    smoothing: T,
}

/// Smoothing constant used by the transformation bootstrap unless overridden.
pub const DEFAULT_SMOOTHING: f64 = 0.1;

impl<T: Scalar> SmoothedResample<T> {
    pub fn new(source: Vec<T>, smoothing: T) -> Result<Self> {
        if source.is_empty() {
            return Err(Error::Config("cannot resample from an empty residual vector".into()));
        }
        if !(smoothing >= T::zero()) {
            return Err(Error::Config("smoothing constant must be non-negative".into()));
        }
        Ok(Self { source, smoothing })
    }

    pub fn smoothing(&self) -> T {
        self.smoothing
    }

    #[inline]
    pub fn draw_one(&self, rng: &mut impl Rng) -> T {
        let zeta = self.source[rng.random_range(0..self.source.len())];
        if self.smoothing == T::zero() {
            zeta
        } else {
            zeta + self.smoothing * T::lit(rng.sample(StandardNormal))
        }
    }

    pub fn draw(&self, n: usize, rng: &mut impl Rng) -> Vec<T> {
        (0..n).map(|_| self.draw_one(rng)).collect()
    }
}

/// Free-function form of [`SmoothedResample::draw`].
pub fn smoothed_resample<T: Scalar>(cfg: &SmoothedResample<T>, n: usize, rng: &mut impl Rng) -> Vec<T> {
    cfg.draw(n, rng)
}

/// `(1 + #{replicates >= observed}) / (B + 1)` over the finite replicates.
pub fn bootstrap_p_value<T: Scalar>(observed: T, replicates: &[T]) -> f64 {
    let finite = replicates.iter().filter(|v| v.is_finite());
    let (mut exceed, mut total) = (0usize, 0usize);
    for &r in finite {
        total += 1;
        if r >= observed {
            exceed += 1;
        }
    }
    (1 + exceed) as f64 / (total + 1) as f64
}

/// Empirical `(1 - alpha)` quantile (type 1, inverse of the ECDF) of the
/// finite replicates.
pub fn upper_quantile<T: Scalar>(replicates: &[T], alpha: f64) -> f64 {
    let mut v: Vec<f64> = replicates.iter().map(|r| r.as_f64()).filter(|r| r.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let k = ((1.0 - alpha) * v.len() as f64).ceil() as usize;
    v[k.clamp(1, v.len()) - 1]
}
