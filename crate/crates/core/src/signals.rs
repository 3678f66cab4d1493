//! Test signals: random coefficient vectors on a basis, linear chirps,
//! inspiral-style chirps, and the chirp bandwidth model.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recon::Coefficients;
use crate::scalar::{snapped_ceil, Scalar};
use crate::wilson::{BandwidthSeq, BasisSet};

/// Draws `u·10⁻²` with `u` uniform on the integers `-200..=200`.
fn draw<T: Scalar>(rng: &mut ChaCha20Rng) -> T {
    T::from_int(rng.gen_range(-200i64..=200)) * T::lit(0.01)
}

/// Random coefficients on the top frequency of every modulated slot:
/// `c_{n,b(n)} = u·10⁻²`, everything else zero.
///
/// Slots are visited in increasing `n`, one draw each, from a ChaCha20
/// stream seeded with `seed`.
pub fn sparse_random_signal<T: Scalar>(basis: &BasisSet, seed: u64) -> Coefficients<T> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut c = vec![T::zero(); basis.len()];
    for &(_, first, b) in basis.modulated_slots() {
        c[first + b as usize - 1] = draw(&mut rng);
    }
    Coefficients::new(c)
}

/// Every coefficient drawn as `u·10⁻²`, in column order.
pub fn full_random_signal<T: Scalar>(basis: &BasisSet, seed: u64) -> Coefficients<T> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Coefficients::new((0..basis.len()).map(|_| draw(&mut rng)).collect())
}

/// Linear chirp on `[0, T]` with instantaneous frequency running from
/// `ω(0)` to `ω(T)` (in Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpParams<T> {
    pub duration: T,
    pub phi0: T,
    pub omega0: T,
    pub omega_t: T,
}

impl<T: Scalar> ChirpParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > T::zero()) {
            return Err(Error::InvalidParameter(format!("chirp duration must be positive, got {}", self.duration)));
        }
        Ok(())
    }

    /// Frequency slope `(ω(T) - ω(0))/T`.
    pub fn rate(&self) -> T {
        (self.omega_t - self.omega0) / self.duration
    }

    /// `ω(t) = rate·t + ω(0)`.
    pub fn inst_freq(&self, t: T) -> T {
        self.rate() * t + self.omega0
    }

    /// `φ(x) = φ(0) + π·rate·x² + 2π·ω(0)·x`.
    pub fn phase(&self, x: T) -> T {
        self.phi0 + T::PI() * self.rate() * x * x + T::lit(2.0) * T::PI() * self.omega0 * x
    }

    pub fn eval(&self, x: T) -> T {
        self.phase(x).sin()
    }
}

/// `x ↦ sin(φ(x))` for the chirp `p`.
pub fn linear_chirp<T: Scalar>(p: ChirpParams<T>) -> impl Fn(T) -> T + Send + Sync {
    move |x| p.eval(x)
}

/// `s(t) = c·|t - t₀|^{-1/4}·cos(ω·|t - t₀|^{5/8} + φ)` for `t < t₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct GwChirp<T> {
    pub amplitude: T,
    pub omega: T,
    pub t0: T,
    #[serde(default = "zero")]
    pub phi: T,
}

fn zero<T: Scalar>() -> T {
    T::zero()
}

impl<T: Scalar> GwChirp<T> {
    pub fn new(amplitude: T, omega: T, t0: T) -> Self {
        Self { amplitude, omega, t0, phi: T::zero() }
    }

    pub fn with_phase(mut self, phi: T) -> Self {
        self.phi = phi;
        self
    }

    pub fn eval(&self, t: T) -> Result<T> {
        if !(t < self.t0) {
            return Err(Error::Domain { t: t.to_f64_lossy(), t0: self.t0.to_f64_lossy() });
        }
        let tau = self.t0 - t;
        Ok(self.amplitude * tau.powf(T::lit(-0.25)) * (self.omega * tau.powf(T::lit(0.625)) + self.phi).cos())
    }

    /// Frequency proxy `ω·|t - t₀|^{-3/8}`.
    pub fn freq_proxy(&self, t: T) -> Result<T> {
        if !(t < self.t0) {
            return Err(Error::Domain { t: t.to_f64_lossy(), t0: self.t0.to_f64_lossy() });
        }
        Ok(self.omega * (self.t0 - t).powf(T::lit(-0.375)))
    }
}

pub fn gw_chirp<T: Scalar>(amplitude: T, omega: T, t0: T) -> GwChirp<T> {
    GwChirp::new(amplitude, omega, t0)
}

/// `b(n) = ⌈ω(n/2 + 1/2) + margin⌉` on `n_range`, zero elsewhere.
///
/// Values within a few ulps of an integer are taken as that integer, so
/// that exact model values are not pushed up by rounding noise.
pub fn chirp_bandwidth_model<T: Scalar>(p: &ChirpParams<T>, margin: u32, n_range: RangeInclusive<i64>) -> BandwidthSeq {
    let half = T::lit(0.5);
    let offset = *n_range.start();
    let values = n_range
        .map(|n| {
            let v = p.inst_freq(T::from_int(n) * half + half) + T::from_int(margin as i64);
            snapped_ceil(v).max(T::zero()).to_u32().unwrap_or(0)
        })
        .collect();
    BandwidthSeq::new(offset, values)
}
