//! Simultaneous source separation and phase retrieval (S³PR).
//!
//! Recovers `L` real images `x_1..x_L` from mixed intensity measurements
//! `y = Σ_l |A x_l|² + w`, either by alternating latent-space descent over a
//! fixed generative network ([`deep_solver`]) or by the sequential
//! dictionary-separation + phase-retrieval pipeline ([`baseline`]).
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below pin the `f64` instantiation used by the solvers, the CLI,
//! and all tolerance-sensitive checks.

pub mod baseline;
pub mod datasets;
pub mod deep_solver;
pub mod error;
pub mod experiment;
pub mod generator;
pub mod measurement;
pub mod metrics;
pub mod ndcore;
mod scalar;
pub mod selfcheck;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use num_complex::Complex;

/// Real image, `f64`.
pub type Image = ndcore::Image<f64>;
/// Complex image, `f64`.
pub type ComplexImage = ndcore::ComplexImage<f64>;
/// Generator network, `f64`.
pub type Generator = generator::GeneratorNetwork<f64>;
/// Generator network, `f32`.
pub type GeneratorF32 = generator::GeneratorNetwork<f32>;
/// Measurement operator, `f64`.
pub type Operator = measurement::MeasurementOperator<f64>;
/// Measurement operator, `f32`.
pub type OperatorF32 = measurement::MeasurementOperator<f32>;
/// Observation, `f64`.
pub type Observation = measurement::Observation<f64>;
/// Learned dictionary, `f64`.
pub type Dictionary = baseline::DictionaryModel<f64>;
/// Solver output, `f64`.
pub type Reconstruction = deep_solver::ReconstructionResult<f64>;
