//! Variable-bandwidth spaces spanned by a finite piece of a Wilson basis,
//! with sampling-set construction and reconstruction from nonuniform samples.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the usual `f64` choice.
//!
//! ```
//! use vbwilson::{presets, sampling};
//!
//! let spec = presets::paper_sparse_space::<f64>();
//! assert_eq!(spec.dim().unwrap(), 2993);
//! let set = sampling::gen_gap_set(&spec, sampling::coverage(spec.interval, 0.0)).unwrap();
//! assert_eq!(set.len(), 12121);
//! ```

pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod presets;
pub mod quadrature;
pub mod recon;
pub mod sampling;
pub mod scalar;
pub mod signals;
pub mod space;
pub mod wilson;
pub mod window;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use wilson::{enumerate_basis, eval_psi, BandwidthSeq, BasisSet, SpaceDoc, SpaceMode, SpaceSpec, WilsonIndex};
pub use window::{Window, WindowKind};

pub type Window64 = window::Window<f64>;
pub type SpaceSpec64 = wilson::SpaceSpec<f64>;
pub type SamplingSet64 = sampling::SamplingSet<f64>;
pub type CellWeights64 = sampling::CellWeights<f64>;
pub type DenseMatrix64 = linalg::DenseMatrix<f64>;
pub type Coefficients64 = recon::Coefficients<f64>;
pub type SampledData64 = recon::SampledData<f64>;
pub type KernelEvaluator64 = space::KernelEvaluator<f64>;
pub type ChirpParams64 = signals::ChirpParams<f64>;

pub type Window32 = window::Window<f32>;
pub type SpaceSpec32 = wilson::SpaceSpec<f32>;
pub type SamplingSet32 = sampling::SamplingSet<f32>;
pub type DenseMatrix32 = linalg::DenseMatrix<f32>;
