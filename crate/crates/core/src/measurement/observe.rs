use crate::datasets::SourceSet;
use crate::ndcore::RngStream;
use crate::{Error, Result, Scalar};

use super::MeasurementOperator;

/// Additive white Gaussian noise at a linear power SNR: `σ² = mean(ȳ²) / snr`.
/// `snr = ∞` disables noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    snr: f64,
    seed: u64,
}

impl NoiseSpec {
    pub fn new(snr: f64, seed: u64) -> Result<Self> {
        if snr.is_nan() || snr <= 0.0 {
            return Err(Error::invalid(format!("snr must be positive, got {snr}")));
        }
        Ok(Self { snr, seed })
    }

    pub fn noiseless() -> Self {
        Self { snr: f64::INFINITY, seed: 0 }
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr.is_infinite()
    }
}

/// Measured intensities plus their provenance.
#[derive(Clone, Debug)]
pub struct Observation<T> {
    pub y: Vec<T>,
    /// Noiseless `Σ_l |A x_l|²`.
    pub clean: Vec<T>,
    pub noise: NoiseSpec,
    pub truth: Option<SourceSet<T>>,
}

impl<T: Scalar> Observation<T> {
    /// Wraps externally measured data.
    pub fn measured(y: Vec<T>) -> Self {
        Self { clean: y.clone(), y, noise: NoiseSpec::noiseless(), truth: None }
    }

    /// `‖y − ȳ‖²`.
    pub fn noise_energy(&self) -> T {
        self.y.iter().zip(&self.clean).map(|(&a, &b)| (a - b) * (a - b)).sum()
    }
}

/// `y = Σ_l |A x_l|² + w` with `w ~ N(0, σ² I)`.
pub fn observe<T: Scalar>(a: &MeasurementOperator<T>, sources: &SourceSet<T>, noise: NoiseSpec) -> Result<Observation<T>> {
    if sources.is_empty() {
        return Err(Error::invalid("no sources to observe"));
    }
    let mut clean = vec![T::zero(); a.m()];
    for x in &sources.sources {
        for (c, v) in clean.iter_mut().zip(a.intensity(x.as_slice())?) {
            *c = *c + v;
        }
    }
    let mut y = clean.clone();
    if !noise.is_noiseless() {
        let power = clean.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>() / clean.len() as f64;
        let sigma = (power / noise.snr).sqrt();
        let mut stream = RngStream::new(noise.seed);
        for v in y.iter_mut() {
            *v = *v + T::lit(sigma * stream.standard_normal());
        }
    }
    Ok(Observation { y, clean, noise, truth: Some(sources.clone()) })
}
