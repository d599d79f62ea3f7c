use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::ComplexImage;
use crate::{Error, Result, Scalar};

/// Planned unitary 2-D DFT for a fixed `rows × cols` shape.
///
/// Forward and inverse both scale by `1/√(rows·cols)`, so the transform is
/// an isometry and its inverse is its adjoint.
#[derive(Clone)]
pub struct Fft2<T: Scalar> {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
    scale: T,
}

impl<T: Scalar> fmt::Debug for Fft2<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2").field("rows", &self.rows).field("cols", &self.cols).finish()
    }
}

impl<T: Scalar> Fft2<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty FFT shape");
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
            scale: T::one() / T::lit((rows * cols) as f64).sqrt(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// In-place forward transform of a row-major buffer.
    pub fn forward(&self, buf: &mut [Complex<T>]) {
        self.run(buf, &*self.row_fwd, &*self.col_fwd);
    }

    /// In-place inverse transform of a row-major buffer.
    pub fn inverse(&self, buf: &mut [Complex<T>]) {
        self.run(buf, &*self.row_inv, &*self.col_inv);
    }

    fn run(&self, buf: &mut [Complex<T>], row: &dyn Fft<T>, col: &dyn Fft<T>) {
        assert_eq!(buf.len(), self.len(), "FFT buffer length");
        row.process(buf);
        if self.rows > 1 {
            let mut t = vec![Complex::new(T::zero(), T::zero()); buf.len()];
            transpose(buf, &mut t, self.rows, self.cols);
            col.process(&mut t);
            transpose(&t, buf, self.cols, self.rows);
        }
        for v in buf.iter_mut() {
            *v = *v * self.scale;
        }
    }
}

fn transpose<T: Copy>(src: &[T], dst: &mut [T], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

/// Unitary 2-D DFT of `img`.
pub fn fft2_unitary<T: Scalar>(img: &ComplexImage<T>) -> Result<ComplexImage<T>> {
    if !img.is_finite() {
        return Err(Error::NonFinite("fft2 input"));
    }
    let mut out = img.clone();
    Fft2::new(img.rows(), img.cols()).forward(out.as_mut_slice());
    Ok(out)
}

/// Inverse of [`fft2_unitary`].
pub fn ifft2_unitary<T: Scalar>(img: &ComplexImage<T>) -> Result<ComplexImage<T>> {
    if !img.is_finite() {
        return Err(Error::NonFinite("ifft2 input"));
    }
    let mut out = img.clone();
    Fft2::new(img.rows(), img.cols()).inverse(out.as_mut_slice());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndcore::RngStream;
    use std::f64::consts::PI;

    fn random_image(rows: usize, cols: usize, seed: u64) -> ComplexImage<f64> {
        let mut s = RngStream::new(seed);
        ComplexImage::new(rows, cols, s.randn_complex(rows * cols)).unwrap()
    }

    // O(N⁴) textbook DFT, unitary scaling.
    fn brute_dft(img: &ComplexImage<f64>, sign: f64) -> ComplexImage<f64> {
        let (rows, cols) = (img.rows(), img.cols());
        let scale = 1.0 / ((rows * cols) as f64).sqrt();
        ComplexImage::from_fn(rows, cols, |u, v| {
            let mut acc = Complex::new(0.0, 0.0);
            for r in 0..rows {
                for c in 0..cols {
                    let phase = sign
                        * 2.0
                        * PI
                        * ((u * r) as f64 / rows as f64 + (v * c) as f64 / cols as f64);
                    acc += img.get(r, c) * Complex::from_polar(1.0, phase);
                }
            }
            acc * scale
        })
    }

    fn max_diff(a: &ComplexImage<f64>, b: &ComplexImage<f64>) -> f64 {
        a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn impulse_maps_to_constant() {
        let mut img = ComplexImage::<f64>::zeros(8, 8);
        img.set(0, 0, Complex::new(1.0, 0.0));
        let f = fft2_unitary(&img).unwrap();
        for v in f.as_slice() {
            assert!((v - Complex::new(1.0 / 8.0, 0.0)).norm() < 1e-15);
        }
        let back = ifft2_unitary(&f).unwrap();
        assert!(max_diff(&back, &img) < 1e-15);
    }

    #[test]
    fn constant_inverts_to_impulse() {
        let img = ComplexImage::from_fn(8, 8, |_, _| Complex::new(1.0 / 8.0, 0.0));
        let d = ifft2_unitary(&img).unwrap();
        assert!((d.get(0, 0) - Complex::new(1.0, 0.0)).norm() < 1e-14);
        assert!(d.as_slice()[1..].iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn matches_brute_force_dft() {
        for (rows, cols, seed) in [(8, 8, 1), (6, 10, 2), (1, 7, 3)] {
            let img = random_image(rows, cols, seed);
            let fast = fft2_unitary(&img).unwrap();
            assert!(max_diff(&fast, &brute_dft(&img, -1.0)) < 1e-10);
            let inv = ifft2_unitary(&img).unwrap();
            assert!(max_diff(&inv, &brute_dft(&img, 1.0)) < 1e-10);
        }
    }

    #[test]
    fn round_trip() {
        let img = random_image(32, 32, 9);
        let back = ifft2_unitary(&fft2_unitary(&img).unwrap()).unwrap();
        assert!(max_diff(&back, &img) < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let mut img = ComplexImage::<f64>::zeros(4, 4);
        img.set(1, 2, Complex::new(f64::NAN, 0.0));
        assert!(matches!(fft2_unitary(&img), Err(Error::NonFinite(_))));
        assert!(ifft2_unitary(&img).is_err());
    }

    #[test]
    fn single_precision_round_trip() {
        let mut s = RngStream::new(4);
        let img = ComplexImage::<f32>::new(16, 16, s.randn_complex(256)).unwrap();
        let back = ifft2_unitary(&fft2_unitary(&img).unwrap()).unwrap();
        let err = img.as_slice().iter().zip(back.as_slice()).map(|(a, b)| (a - b).norm()).fold(0.0f32, f32::max);
        assert!(err < 1e-5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn parseval(rows in 1usize..12, cols in 1usize..12, seed in any::<u64>()) {
                let img = random_image(rows, cols, seed);
                let f = fft2_unitary(&img).unwrap();
                let (a, b) = (img.norm_sq(), f.norm_sq());
                prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
            }

            #[test]
            fn linearity(seed in any::<u64>(), ar in -3.0f64..3.0, ai in -3.0f64..3.0, br in -3.0f64..3.0) {
                let x = random_image(8, 6, seed);
                let y = random_image(8, 6, seed.wrapping_add(1));
                let (a, b) = (Complex::new(ar, ai), Complex::new(br, 0.5));
                let combo = ComplexImage::new(8, 6, x.as_slice().iter().zip(y.as_slice()).map(|(p, q)| a * p + b * q).collect()).unwrap();
                let lhs = fft2_unitary(&combo).unwrap();
                let (fx, fy) = (fft2_unitary(&x).unwrap(), fft2_unitary(&y).unwrap());
                let rhs = ComplexImage::new(8, 6, fx.as_slice().iter().zip(fy.as_slice()).map(|(p, q)| a * p + b * q).collect()).unwrap();
                let scale = lhs.norm_sq().sqrt().max(1.0);
                prop_assert!(max_diff(&lhs, &rhs) <= 1e-12 * scale);
            }
        }
    }
}
