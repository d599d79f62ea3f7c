use std::fmt;
use std::str::FromStr;

use num_complex::Complex;

use crate::ndcore::{Fft2, RngStream};
use crate::{Error, Result, Scalar};

/// Ratio `m / n` for every mode.
pub const OVERSAMPLING: usize = 4;
/// Number of coded-diffraction masks.
pub const CDP_MASKS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OperatorMode {
    Gaussian,
    Cdp,
    Fourier,
}

impl OperatorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            OperatorMode::Gaussian => "gaussian",
            OperatorMode::Cdp => "cdp",
            OperatorMode::Fourier => "fourier",
        }
    }

    fn tag(self) -> u8 {
        match self {
            OperatorMode::Gaussian => 0,
            OperatorMode::Cdp => 1,
            OperatorMode::Fourier => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        [OperatorMode::Gaussian, OperatorMode::Cdp, OperatorMode::Fourier].into_iter().find(|m| m.tag() == tag)
    }

    pub(crate) fn to_tag(self) -> u8 {
        self.tag()
    }
}

impl fmt::Display for OperatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OperatorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(OperatorMode::Gaussian),
            "cdp" => Ok(OperatorMode::Cdp),
            "fourier" => Ok(OperatorMode::Fourier),
            other => Err(Error::invalid(format!("unknown operator mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum OperatorData<T> {
    /// Row-major `m × n`, real and imaginary parts split.
    Gaussian { re: Vec<T>, im: Vec<T> },
    /// `CDP_MASKS` unimodular masks, each `side × side` row-major.
    Cdp { masks: Vec<Complex<T>> },
    Fourier,
}

/// Linear map from a real (or complex) `side × side` image to `m = 4n` complex
/// measurements. Images are flattened row-major.
///
/// * Gaussian: dense i.i.d. `CN(0, 1/m)` entries.
/// * CDP: `[F D_1; …; F D_4]` with unitary 2-D DFT `F` and masks uniform on the unit circle.
/// * Fourier: zero-pad to `2·side × 2·side` (image in the top-left corner), then unitary DFT.
#[derive(Clone, Debug)]
pub struct MeasurementOperator<T: Scalar> {
    mode: OperatorMode,
    side: usize,
    seed: Option<u64>,
    pub(crate) data: OperatorData<T>,
    fft: Fft2<T>,
}

fn side_of(n: usize) -> Result<usize> {
    let side = (n as f64).sqrt().round() as usize;
    if n == 0 || side * side != n {
        return Err(Error::invalid(format!("signal length {n} is not a perfect square")));
    }
    Ok(side)
}

impl<T: Scalar> MeasurementOperator<T> {
    /// Dense circular Gaussian operator; requires `m = 4n`.
    pub fn gaussian(n: usize, m: usize, seed: u64) -> Result<Self> {
        let side = side_of(n)?;
        if m != OVERSAMPLING * n {
            return Err(Error::invalid(format!("m = {m} must equal {OVERSAMPLING}·n = {}", OVERSAMPLING * n)));
        }
        let mut stream = RngStream::new(seed);
        let scale = T::one() / T::lit(m as f64).sqrt();
        let (re, im) = stream.randn_complex::<T>(m * n).into_iter().map(|z| (z.re * scale, z.im * scale)).unzip();
        Ok(Self { mode: OperatorMode::Gaussian, side, seed: Some(seed), data: OperatorData::Gaussian { re, im }, fft: Fft2::new(side, side) })
    }

    pub fn cdp(n: usize, seed: u64) -> Result<Self> {
        let side = side_of(n)?;
        let mut stream = RngStream::new(seed);
        let masks = (0..CDP_MASKS * n).map(|_| stream.unit_phase()).collect();
        Ok(Self { mode: OperatorMode::Cdp, side, seed: Some(seed), data: OperatorData::Cdp { masks }, fft: Fft2::new(side, side) })
    }

    pub fn fourier(n: usize) -> Result<Self> {
        let side = side_of(n)?;
        Ok(Self { mode: OperatorMode::Fourier, side, seed: None, data: OperatorData::Fourier, fft: Fft2::new(2 * side, 2 * side) })
    }

    /// Builds an operator of `mode` for `side × side` images; `seed` is ignored for Fourier.
    pub fn build(mode: OperatorMode, side: usize, seed: u64) -> Result<Self> {
        let n = side * side;
        match mode {
            OperatorMode::Gaussian => Self::gaussian(n, OVERSAMPLING * n, seed),
            OperatorMode::Cdp => Self::cdp(n, seed),
            OperatorMode::Fourier => Self::fourier(n),
        }
    }

    pub(crate) fn from_parts(mode: OperatorMode, side: usize, seed: Option<u64>, data: OperatorData<T>) -> Self {
        let fft = match mode {
            OperatorMode::Fourier => Fft2::new(2 * side, 2 * side),
            _ => Fft2::new(side, side),
        };
        Self { mode, side, seed, data, fft }
    }

    pub fn mode(&self) -> OperatorMode {
        self.mode
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn n(&self) -> usize {
        self.side * self.side
    }

    pub fn m(&self) -> usize {
        OVERSAMPLING * self.n()
    }

    /// Seed the random parts were drawn from (`None` for Fourier).
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Side of the padded Fourier grid (`2·side`), for Fourier mode.
    pub fn fourier_side(&self) -> Option<usize> {
        (self.mode == OperatorMode::Fourier).then_some(2 * self.side)
    }

    pub fn cdp_masks(&self) -> Option<&[Complex<T>]> {
        match &self.data {
            OperatorData::Cdp { masks } => Some(masks),
            _ => None,
        }
    }

    /// Gaussian matrix as `(re, im)` row-major `m × n` blocks.
    pub fn gaussian_matrix(&self) -> Option<(&[T], &[T])> {
        match &self.data {
            OperatorData::Gaussian { re, im } => Some((re, im)),
            _ => None,
        }
    }

    fn check_len(&self, what: &str, got: usize, want: usize) -> Result<()> {
        if got != want {
            return Err(Error::shape(format!("{what}: expected length {want}, got {got}")));
        }
        Ok(())
    }

    /// `A x` for real `x` of length `n`.
    pub fn apply(&self, x: &[T]) -> Result<Vec<Complex<T>>> {
        self.check_len("apply", x.len(), self.n())?;
        Ok(self.apply_real_unchecked(x))
    }

    /// `A x` for complex `x` of length `n`.
    pub fn apply_complex(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        self.check_len("apply", x.len(), self.n())?;
        Ok(self.apply_complex_unchecked(x))
    }

    /// `Aᴴ v` for `v` of length `m`.
    pub fn adjoint_apply(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        self.check_len("adjoint", v.len(), self.m())?;
        Ok(self.adjoint_unchecked(v))
    }

    /// `|A x|²` elementwise.
    pub fn intensity(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.apply(x)?.iter().map(|v| v.norm_sqr()).collect())
    }

    /// Gradient of `‖y − Σ_m |A x_m|²‖²` with respect to `x_l`:
    /// `−4·Re(Aᴴ(r ∘ A x_l))` with `r = y − Σ_m |A x_m|²`.
    pub fn residual_gradient(&self, y: &[T], estimates: &[&[T]], l: usize) -> Result<Vec<T>> {
        self.check_len("observation", y.len(), self.m())?;
        if l >= estimates.len() {
            return Err(Error::invalid(format!("source index {l} out of {}", estimates.len())));
        }
        let mut r = y.to_vec();
        let mut own = Vec::new();
        for (k, x) in estimates.iter().enumerate() {
            let ax = self.apply(x)?;
            for (ri, a) in r.iter_mut().zip(&ax) {
                *ri = *ri - a.norm_sqr();
            }
            if k == l {
                own = ax;
            }
        }
        Ok(self.intensity_gradient(&r, &own))
    }

    /// `−4·Re(Aᴴ(r ∘ ax))`, the gradient of `‖r‖²` through `|A x|²` given `ax = A x`.
    pub fn intensity_gradient(&self, r: &[T], ax: &[Complex<T>]) -> Vec<T> {
        let w: Vec<Complex<T>> = r.iter().zip(ax).map(|(&ri, &a)| a * ri).collect();
        let minus_four = T::lit(-4.0);
        self.adjoint_real_unchecked(&w).into_iter().map(|v| v * minus_four).collect()
    }

    pub(crate) fn apply_real_unchecked(&self, x: &[T]) -> Vec<Complex<T>> {
        match &self.data {
            OperatorData::Gaussian { re, im } => {
                let n = self.n();
                re.chunks_exact(n)
                    .zip(im.chunks_exact(n))
                    .map(|(rr, ir)| Complex::new(dot(rr, x), dot(ir, x)))
                    .collect()
            }
            _ => {
                let xc: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
                self.apply_complex_unchecked(&xc)
            }
        }
    }

    pub(crate) fn apply_complex_unchecked(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.n();
        match &self.data {
            OperatorData::Gaussian { re, im } => re
                .chunks_exact(n)
                .zip(im.chunks_exact(n))
                .map(|(rr, ir)| {
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for ((&a, &b), v) in rr.iter().zip(ir).zip(x) {
                        acc = acc + Complex::new(a, b) * v;
                    }
                    acc
                })
                .collect(),
            OperatorData::Cdp { masks } => {
                let mut out = Vec::with_capacity(self.m());
                for mask in masks.chunks_exact(n) {
                    let start = out.len();
                    out.extend(mask.iter().zip(x).map(|(d, v)| d * v));
                    self.fft.forward(&mut out[start..]);
                }
                out
            }
            OperatorData::Fourier => {
                let (side, big) = (self.side, 2 * self.side);
                let mut buf = vec![Complex::new(T::zero(), T::zero()); big * big];
                for r in 0..side {
                    buf[r * big..r * big + side].copy_from_slice(&x[r * side..(r + 1) * side]);
                }
                self.fft.forward(&mut buf);
                buf
            }
        }
    }

    pub(crate) fn adjoint_unchecked(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.n();
        match &self.data {
            OperatorData::Gaussian { re, im } => {
                let mut out = vec![Complex::new(T::zero(), T::zero()); n];
                for ((rr, ir), &vi) in re.chunks_exact(n).zip(im.chunks_exact(n)).zip(v) {
                    for ((o, &a), &b) in out.iter_mut().zip(rr).zip(ir) {
                        *o = *o + Complex::new(a, -b) * vi;
                    }
                }
                out
            }
            OperatorData::Cdp { masks } => {
                let mut out = vec![Complex::new(T::zero(), T::zero()); n];
                let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
                for (mask, block) in masks.chunks_exact(n).zip(v.chunks_exact(n)) {
                    buf.copy_from_slice(block);
                    self.fft.inverse(&mut buf);
                    for ((o, d), b) in out.iter_mut().zip(mask).zip(&buf) {
                        *o = *o + d.conj() * b;
                    }
                }
                out
            }
            OperatorData::Fourier => {
                let (side, big) = (self.side, 2 * self.side);
                let mut buf = v.to_vec();
                self.fft.inverse(&mut buf);
                let mut out = Vec::with_capacity(n);
                for r in 0..side {
                    out.extend_from_slice(&buf[r * big..r * big + side]);
                }
                out
            }
        }
    }

    /// `Re(Aᴴ w)`.
    pub(crate) fn adjoint_real_unchecked(&self, w: &[Complex<T>]) -> Vec<T> {
        match &self.data {
            OperatorData::Gaussian { re, im } => {
                let n = self.n();
                let mut out = vec![T::zero(); n];
                for ((rr, ir), wi) in re.chunks_exact(n).zip(im.chunks_exact(n)).zip(w) {
                    let (wr, wim) = (wi.re, wi.im);
                    for ((o, &a), &b) in out.iter_mut().zip(rr).zip(ir) {
                        *o = *o + a * wr + b * wim;
                    }
                }
                out
            }
            _ => self.adjoint_unchecked(w).into_iter().map(|c| c.re).collect(),
        }
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    type C = Complex<f64>;

    fn cdot(a: &[C], b: &[C]) -> C {
        a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
    }

    fn operators(side: usize, seed: u64) -> Vec<MeasurementOperator<f64>> {
        let n = side * side;
        vec![
            MeasurementOperator::gaussian(n, 4 * n, seed).unwrap(),
            MeasurementOperator::cdp(n, seed).unwrap(),
            MeasurementOperator::fourier(n).unwrap(),
        ]
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(MeasurementOperator::<f64>::gaussian(1024, 2048, 1).is_err());
        assert!(MeasurementOperator::<f64>::gaussian(1000, 4000, 1).is_err());
        assert!(MeasurementOperator::<f64>::cdp(30, 1).is_err());
        assert!(MeasurementOperator::<f64>::fourier(0).is_err());
        let a = MeasurementOperator::<f64>::fourier(64).unwrap();
        assert!(a.apply(&[0.0; 63]).is_err());
        assert!(a.adjoint_apply(&[C::new(0.0, 0.0); 255]).is_err());
    }

    #[test]
    fn cdp_masks_unimodular() {
        let a = MeasurementOperator::<f64>::cdp(1024, 5).unwrap();
        let masks = a.cdp_masks().unwrap();
        assert_eq!(masks.len(), 4 * 1024);
        assert!(masks.iter().all(|d| (d.norm() - 1.0).abs() < 1e-15));
        assert_eq!(a.m(), 4096);
    }

    #[test]
    fn gaussian_energy_preserved_in_expectation() {
        let mut s = RngStream::new(1);
        let x: Vec<f64> = s.randn(64);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x: Vec<f64> = x.iter().map(|v| v / norm).collect();
        let mean = (0..200)
            .map(|k| {
                let a = MeasurementOperator::<f64>::gaussian(64, 256, 1000 + k).unwrap();
                a.intensity(&x).unwrap().iter().sum::<f64>()
            })
            .sum::<f64>()
            / 200.0;
        assert!((mean - 1.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn fourier_delta_is_flat() {
        let a = MeasurementOperator::<f64>::fourier(1024).unwrap();
        let mut x = vec![0.0; 1024];
        x[0] = 1.0;
        let i = a.intensity(&x).unwrap();
        assert_eq!(i.len(), 4096);
        assert!(i.iter().all(|v| (v - 1.0 / 4096.0).abs() < 1e-15));
    }

    #[test]
    fn zero_and_linearity() {
        let mut s = RngStream::new(2);
        for a in operators(8, 3) {
            assert!(a.apply(&[0.0; 64]).unwrap().iter().all(|v| v.norm() == 0.0));
            assert!(a.adjoint_apply(&vec![C::new(0.0, 0.0); 256]).unwrap().iter().all(|v| v.norm() == 0.0));
            let x: Vec<f64> = s.randn(64);
            let ax = a.apply(&x).unwrap();
            let x3: Vec<f64> = x.iter().map(|v| -2.5 * v).collect();
            let ax3 = a.apply(&x3).unwrap();
            for (p, q) in ax.iter().zip(&ax3) {
                assert!((p * -2.5 - q).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn adjoint_identity_all_modes() {
        let mut s = RngStream::new(4);
        for a in operators(8, 5) {
            for _ in 0..5 {
                let x: Vec<C> = s.randn_complex(64);
                let v: Vec<C> = s.randn_complex(256);
                let lhs = cdot(&a.apply_complex(&x).unwrap(), &v);
                let rhs = cdot(&x, &a.adjoint_apply(&v).unwrap());
                assert!((lhs - rhs).norm() < 1e-10, "{:?}", a.mode());
            }
        }
    }

    #[test]
    fn cdp_gram_is_four_identity() {
        let a = MeasurementOperator::<f64>::cdp(1024, 6).unwrap();
        let mut s = RngStream::new(7);
        for _ in 0..5 {
            let x: Vec<C> = s.randn_complex(1024);
            let back = a.adjoint_apply(&a.apply_complex(&x).unwrap()).unwrap();
            for (b, v) in back.iter().zip(&x) {
                assert!((b - v * 4.0).norm() < 1e-10);
            }
        }
    }

    // Explicit dense CDP matrix from the textbook DFT definition.
    fn dense_cdp(a: &MeasurementOperator<f64>) -> Vec<Vec<C>> {
        let side = a.side();
        let n = side * side;
        let masks = a.cdp_masks().unwrap();
        let scale = 1.0 / side as f64;
        let mut rows = Vec::with_capacity(4 * n);
        for k in 0..4 {
            for u in 0..side {
                for v in 0..side {
                    let row = (0..n)
                        .map(|j| {
                            let (r, c) = (j / side, j % side);
                            let phase = -2.0 * PI * ((u * r + v * c) as f64) / side as f64;
                            C::from_polar(scale, phase) * masks[k * n + j]
                        })
                        .collect();
                    rows.push(row);
                }
            }
        }
        rows
    }

    #[test]
    fn cdp_matches_dense_matrix() {
        let a = MeasurementOperator::<f64>::cdp(64, 8).unwrap();
        let dense = dense_cdp(&a);
        let x: Vec<f64> = RngStream::new(9).randn(64);
        let fast = a.apply(&x).unwrap();
        let slow: Vec<C> = dense.iter().map(|row| row.iter().zip(&x).map(|(a, v)| a * v).sum()).collect();
        let err: f64 = fast.iter().zip(&slow).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        let norm: f64 = slow.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt();
        assert!(err / norm < 1e-12);
    }

    #[test]
    fn intensity_sign_and_flip_invariance() {
        let mut s = RngStream::new(10);
        let x: Vec<f64> = s.randn(64);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        for a in operators(8, 11) {
            let (i1, i2) = (a.intensity(&x).unwrap(), a.intensity(&neg).unwrap());
            assert!(i1.iter().zip(&i2).all(|(p, q)| (p - q).abs() < 1e-12));
            assert!(i1.iter().all(|&v| v >= 0.0));
        }
        let f = MeasurementOperator::<f64>::fourier(64).unwrap();
        let flipped: Vec<f64> = (0..64).map(|j| x[63 - j]).collect();
        let (i1, i2) = (f.intensity(&x).unwrap(), f.intensity(&flipped).unwrap());
        assert!(i1.iter().zip(&i2).all(|(p, q)| (p - q).abs() < 1e-12));
        let total: f64 = i1.iter().sum();
        assert!((total - x.iter().map(|v| v * v).sum::<f64>()).abs() < 1e-10);
    }

    fn loss(a: &MeasurementOperator<f64>, y: &[f64], xs: &[Vec<f64>]) -> f64 {
        let mut r = y.to_vec();
        for x in xs {
            for (ri, v) in r.iter_mut().zip(a.intensity(x).unwrap()) {
                *ri -= v;
            }
        }
        r.iter().map(|v| v * v).sum()
    }

    #[test]
    fn residual_gradient_matches_finite_differences() {
        let mut s = RngStream::new(12);
        for a in operators(8, 13) {
            let xs: Vec<Vec<f64>> = (0..2).map(|_| s.randn(64)).collect();
            let y: Vec<f64> = s.randn::<f64>(256).iter().map(|v| v.abs()).collect();
            let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
            let g = a.residual_gradient(&y, &refs, 1).unwrap();
            let h = 1e-5;
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for i in 0..64 {
                let mut p = xs.clone();
                let mut m = xs.clone();
                p[1][i] += h;
                m[1][i] -= h;
                let fd = (loss(&a, &y, &p) - loss(&a, &y, &m)) / (2.0 * h);
                num = num.max((fd - g[i]).abs());
                den = den.max(fd.abs());
            }
            assert!(num / den < 1e-6, "{:?}: {}", a.mode(), num / den);
        }
    }

    #[test]
    fn gradient_vanishes_at_exact_fit() {
        let mut s = RngStream::new(14);
        for a in operators(8, 15) {
            let x: Vec<f64> = s.randn(64);
            let y = a.intensity(&x).unwrap();
            let g = a.residual_gradient(&y, &[&x], 0).unwrap();
            assert!(g.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn gradient_homogeneity() {
        // L = 1: y → c·y and x → √c·x scales the residual by c and A x by √c,
        // so the gradient scales by c^{3/2}.
        let a = MeasurementOperator::<f64>::gaussian(64, 256, 16).unwrap();
        let mut s = RngStream::new(17);
        let x: Vec<f64> = s.randn(64);
        let y: Vec<f64> = s.randn::<f64>(256).iter().map(|v| v.abs()).collect();
        let c = 2.25f64;
        let g1 = a.residual_gradient(&y, &[&x], 0).unwrap();
        let yc: Vec<f64> = y.iter().map(|v| v * c).collect();
        let xc: Vec<f64> = x.iter().map(|v| v * c.sqrt()).collect();
        let g2 = a.residual_gradient(&yc, &[&xc], 0).unwrap();
        for (p, q) in g1.iter().zip(&g2) {
            assert!((p * c.powf(1.5) - q).abs() < 1e-9 * (1.0 + q.abs()));
        }
    }
}
