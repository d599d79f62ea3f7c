use num_complex::Complex;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Scalar;

/// SplitMix64 finalizer; used to derive independent seeds from a master seed.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seeded random stream.
///
/// Backed by ChaCha8 (`rand_chacha`) keyed with `seed` (via `seed_from_u64`)
/// on stream id `stream`. Uniform doubles take the top 53 bits of a `u64`
/// draw; normals come from the basic Box–Muller transform, emitted in pairs
/// (cosine branch first). Equal `(seed, stream)` pairs yield identical draws
/// on every platform.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng, spare: None }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Independent child stream; does not advance `self`.
    pub fn fork(&self, id: u64) -> Self {
        Self::with_stream(self.seed, splitmix64(self.stream ^ splitmix64(id.wrapping_add(1))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(radius * theta.sin());
        radius * theta.cos()
    }

    /// `len` i.i.d. N(0, 1) draws.
    pub fn randn<T: Scalar>(&mut self, len: usize) -> Vec<T> {
        (0..len).map(|_| T::lit(self.standard_normal())).collect()
    }

    /// `len` i.i.d. circular complex normals with E|z|² = 1 (each part N(0, 1/2)).
    pub fn randn_complex<T: Scalar>(&mut self, len: usize) -> Vec<Complex<T>> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        (0..len)
            .map(|_| {
                let re = self.standard_normal() * s;
                let im = self.standard_normal() * s;
                Complex::new(T::lit(re), T::lit(im))
            })
            .collect()
    }

    /// Point drawn uniformly from the complex unit circle.
    pub fn unit_phase<T: Scalar>(&mut self) -> Complex<T> {
        let theta = std::f64::consts::TAU * self.uniform();
        Complex::new(T::lit(theta.cos()), T::lit(theta.sin()))
    }

    /// `k` distinct indices from `0..len`, by partial Fisher–Yates.
    pub fn sample_indices(&mut self, len: usize, k: usize) -> Vec<usize> {
        assert!(k <= len, "sample of {k} from {len}");
        let mut pool: Vec<usize> = (0..len).collect();
        for i in 0..k {
            let j = self.rng.random_range(i..len);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_draws() {
        let a: Vec<f64> = RngStream::new(17).randn(4);
        let b: Vec<f64> = RngStream::new(17).randn(4);
        assert_eq!(a, b);
        let c: Vec<f64> = RngStream::new(18).randn(4);
        assert_ne!(a, c);
    }

    #[test]
    fn forks_are_distinct_and_reproducible() {
        let base = RngStream::new(5);
        let mut f1 = base.fork(1);
        let mut f1b = base.fork(1);
        let mut f2 = base.fork(2);
        let (x, y, z) = (f1.next_u64(), f1b.next_u64(), f2.next_u64());
        assert_eq!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn normal_moments() {
        let n = 1_000_000;
        let v: Vec<f64> = RngStream::new(2024).randn(n);
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn complex_second_moment() {
        let n = 1_000_000;
        let v: Vec<Complex<f64>> = RngStream::new(99).randn_complex(n);
        let m2 = v.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        assert!((m2 - 1.0).abs() < 0.02, "E|z|^2 = {m2}");
        let re_var = v.iter().map(|z| z.re * z.re).sum::<f64>() / n as f64;
        assert!((re_var - 0.5).abs() < 0.01);
    }

    #[test]
    fn unit_phase_is_unimodular() {
        let mut s = RngStream::new(3);
        for _ in 0..100 {
            let p: Complex<f64> = s.unit_phase();
            assert!((p.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sampled_indices_distinct() {
        let mut s = RngStream::new(8);
        let mut idx = s.sample_indices(10, 10);
        idx.sort_unstable();
        assert_eq!(idx, (0..10).collect::<Vec<_>>());
    }
}
