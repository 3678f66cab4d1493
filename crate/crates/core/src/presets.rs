//! Realized bandwidth sequences and spaces used by the reference experiments.

use crate::scalar::Scalar;
use crate::signals::{chirp_bandwidth_model, ChirpParams};
use crate::wilson::{BandwidthSeq, SpaceMode, SpaceSpec};
use crate::window::Window;

/// Bandwidths on `n = 1..=11` for the in-space experiment on `[0, 6]`.
pub const SPARSE_BANDWIDTHS: [u32; 11] = [102, 35, 499, 444, 341, 111, 197, 241, 492, 95, 431];

/// Bandwidths on `n = 0..=12` for the overlapping experiment on `[0, 6]`.
pub const EXTENDED_BANDWIDTHS: [u32; 13] = [331, 281, 366, 271, 497, 125, 70, 72, 50, 214, 235, 195, 387];

/// Bandwidths on `n = 1..=5` for the scaled-down in-space experiment on `[0, 3]`.
pub const SMALL_BANDWIDTHS: [u32; 5] = [42, 17, 50, 38, 49];

/// Bandwidths on `n = 0..=6` for the scaled-down overlapping experiment on `[0, 3]`.
pub const SMALL_EXTENDED_BANDWIDTHS: [u32; 7] = [31, 44, 18, 37, 26, 49, 17];

/// Safety margin added to the chirp's instantaneous frequency.
pub const CHIRP_MARGIN: u32 = 30;

pub fn sparse_bandwidths() -> BandwidthSeq {
    BandwidthSeq::new(1, SPARSE_BANDWIDTHS.to_vec())
}

pub fn extended_bandwidths() -> BandwidthSeq {
    BandwidthSeq::new(0, EXTENDED_BANDWIDTHS.to_vec())
}

pub fn small_bandwidths() -> BandwidthSeq {
    BandwidthSeq::new(1, SMALL_BANDWIDTHS.to_vec())
}

pub fn small_extended_bandwidths() -> BandwidthSeq {
    BandwidthSeq::new(0, SMALL_EXTENDED_BANDWIDTHS.to_vec())
}

/// `T = 6`, `φ(0) = 0`, `ω(0) = 40`, `ω(T) = 300`.
pub fn paper_chirp<T: Scalar>() -> ChirpParams<T> {
    ChirpParams { duration: T::lit(6.0), phi0: T::zero(), omega0: T::lit(40.0), omega_t: T::lit(300.0) }
}

pub fn chirp_bandwidths() -> BandwidthSeq {
    chirp_bandwidth_model(&paper_chirp::<f64>(), CHIRP_MARGIN, 0..=12)
}

/// `T = 3`, `φ(0) = 0`, `ω(0) = 10`, `ω(T) = 40`.
pub fn small_chirp<T: Scalar>() -> ChirpParams<T> {
    ChirpParams { duration: T::lit(3.0), phi0: T::zero(), omega0: T::lit(10.0), omega_t: T::lit(40.0) }
}

pub fn small_chirp_bandwidths() -> BandwidthSeq {
    chirp_bandwidth_model(&small_chirp::<f64>(), 10, 0..=6)
}

pub fn paper_sparse_space<T: Scalar>() -> SpaceSpec<T> {
    SpaceSpec::new(Window::cosine(), sparse_bandwidths(), (T::zero(), T::lit(6.0)), SpaceMode::Interior)
}

pub fn paper_extended_space<T: Scalar>() -> SpaceSpec<T> {
    SpaceSpec::new(Window::cosine(), extended_bandwidths(), (T::zero(), T::lit(6.0)), SpaceMode::Overlapping)
}

pub fn paper_chirp_space<T: Scalar>() -> SpaceSpec<T> {
    SpaceSpec::new(Window::cosine(), chirp_bandwidths(), (T::zero(), T::lit(6.0)), SpaceMode::Overlapping)
}

pub fn small_sparse_space<T: Scalar>() -> SpaceSpec<T> {
    SpaceSpec::new(Window::cosine(), small_bandwidths(), (T::zero(), T::lit(3.0)), SpaceMode::Interior)
}

pub fn small_extended_space<T: Scalar>() -> SpaceSpec<T> {
    SpaceSpec::new(Window::cosine(), small_extended_bandwidths(), (T::zero(), T::lit(3.0)), SpaceMode::Overlapping)
}

pub fn small_chirp_space<T: Scalar>() -> SpaceSpec<T> {
    SpaceSpec::new(Window::cosine(), small_chirp_bandwidths(), (T::zero(), T::lit(3.0)), SpaceMode::Overlapping)
}
