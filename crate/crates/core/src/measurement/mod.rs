//! Measurement operators `A ∈ ℂ^{m×n}` (Gaussian, coded diffraction,
//! oversampled Fourier), the mixed-intensity forward model and
//! SNR-controlled noise.

mod io;
mod observe;
mod operator;

pub use io::{decode_operator, encode_operator, load_operator, save_operator, OPERATOR_MAGIC};
pub use observe::{observe, NoiseSpec, Observation};
pub use operator::{MeasurementOperator, OperatorMode, CDP_MASKS, OVERSAMPLING};
