use crate::ndcore::RngStream;
use crate::{Error, Result, Scalar};

use super::BATCHNORM_EPS;

/// Fully connected layer, weight stored `(out, in)` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    in_dim: usize,
    out_dim: usize,
    weight: Vec<T>,
    bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(in_dim: usize, out_dim: usize, weight: Vec<T>, bias: Vec<T>) -> Result<Self> {
        if weight.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(Error::shape(format!("dense {in_dim}->{out_dim}")));
        }
        Ok(Self { in_dim, out_dim, weight, bias })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self { in_dim, out_dim, weight: vec![T::zero(); in_dim * out_dim], bias: vec![T::zero(); out_dim] }
    }

    pub fn random(in_dim: usize, out_dim: usize, stream: &mut RngStream) -> Self {
        let scale = T::lit((1.0 / in_dim as f64).sqrt());
        let weight = stream.randn::<T>(in_dim * out_dim).into_iter().map(|v| v * scale).collect();
        let bias = stream.randn::<T>(out_dim).into_iter().map(|v| v * T::lit(0.1)).collect();
        Self { in_dim, out_dim, weight, bias }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weight(&self) -> &[T] {
        &self.weight
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        self.weight
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, &b)| b + row.iter().zip(x).map(|(&w, &v)| w * v).sum::<T>())
            .collect()
    }

    /// `Wᵀ g`.
    pub fn backward_input(&self, g: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.in_dim];
        for (row, &gi) in self.weight.chunks_exact(self.in_dim).zip(g) {
            for (o, &w) in out.iter_mut().zip(row) {
                *o = *o + w * gi;
            }
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> Dense<U> {
        Dense { in_dim: self.in_dim, out_dim: self.out_dim, weight: cast_vec(&self.weight), bias: cast_vec(&self.bias) }
    }
}

/// Inference-mode batch normalization over channel-major activations.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm<T> {
    gamma: Vec<T>,
    beta: Vec<T>,
    running_mean: Vec<T>,
    running_var: Vec<T>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(gamma: Vec<T>, beta: Vec<T>, running_mean: Vec<T>, running_var: Vec<T>) -> Result<Self> {
        let c = gamma.len();
        if beta.len() != c || running_mean.len() != c || running_var.len() != c {
            return Err(Error::shape("batch norm parameter lengths differ"));
        }
        if running_var.iter().any(|&v| !(v > T::zero())) {
            return Err(Error::invalid("non-positive running variance"));
        }
        Ok(Self { gamma, beta, running_mean, running_var })
    }

    pub fn identity(channels: usize) -> Self {
        Self {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
        }
    }

    pub fn random(channels: usize, stream: &mut RngStream) -> Self {
        let tenth = T::lit(0.1);
        let gamma = stream.randn::<T>(channels).into_iter().map(|v| T::one() + tenth * v).collect();
        let beta = stream.randn::<T>(channels).into_iter().map(|v| tenth * v).collect();
        let running_mean = stream.randn::<T>(channels).into_iter().map(|v| tenth * v).collect();
        let running_var = stream.randn::<T>(channels).into_iter().map(|v| T::one() + tenth * v.abs()).collect();
        Self { gamma, beta, running_mean, running_var }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[T] {
        &self.gamma
    }

    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    pub fn running_mean(&self) -> &[T] {
        &self.running_mean
    }

    pub fn running_var(&self) -> &[T] {
        &self.running_var
    }

    fn scale(&self, c: usize) -> T {
        self.gamma[c] / (self.running_var[c] + T::lit(BATCHNORM_EPS)).sqrt()
    }

    pub(crate) fn apply(&self, x: &mut [T], plane: usize) {
        for (c, chunk) in x.chunks_exact_mut(plane).enumerate() {
            let (s, m, b) = (self.scale(c), self.running_mean[c], self.beta[c]);
            for v in chunk {
                *v = (*v - m) * s + b;
            }
        }
    }

    pub(crate) fn scale_only(&self, g: &mut [T], plane: usize) {
        for (c, chunk) in g.chunks_exact_mut(plane).enumerate() {
            let s = self.scale(c);
            for v in chunk {
                *v = *v * s;
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> BatchNorm<U> {
        BatchNorm {
            gamma: cast_vec(&self.gamma),
            beta: cast_vec(&self.beta),
            running_mean: cast_vec(&self.running_mean),
            running_var: cast_vec(&self.running_var),
        }
    }
}

/// 3×3 cross-correlation, stride 1, zero padding 1. Kernel `(out, in, 3, 3)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv3x3<T> {
    in_ch: usize,
    out_ch: usize,
    weight: Vec<T>,
    bias: Vec<T>,
}

impl<T: Scalar> Conv3x3<T> {
    pub fn new(in_ch: usize, out_ch: usize, weight: Vec<T>, bias: Vec<T>) -> Result<Self> {
        if weight.len() != out_ch * in_ch * 9 || bias.len() != out_ch {
            return Err(Error::shape(format!("conv {in_ch}->{out_ch}")));
        }
        Ok(Self { in_ch, out_ch, weight, bias })
    }

    pub fn zeros(in_ch: usize, out_ch: usize) -> Self {
        Self { in_ch, out_ch, weight: vec![T::zero(); in_ch * out_ch * 9], bias: vec![T::zero(); out_ch] }
    }

    /// Kernel entries `N(0, gain / (9·in))`.
    pub fn random(in_ch: usize, out_ch: usize, gain: f64, stream: &mut RngStream) -> Self {
        let scale = T::lit((gain / (9 * in_ch) as f64).sqrt());
        let weight = stream.randn::<T>(in_ch * out_ch * 9).into_iter().map(|v| v * scale).collect();
        let bias = stream.randn::<T>(out_ch).into_iter().map(|v| v * T::lit(0.05)).collect();
        Self { in_ch, out_ch, weight, bias }
    }

    pub fn in_ch(&self) -> usize {
        self.in_ch
    }

    pub fn out_ch(&self) -> usize {
        self.out_ch
    }

    pub fn weight(&self) -> &[T] {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut [T] {
        &mut self.weight
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn forward(&self, x: &[T], h: usize, w: usize) -> Vec<T> {
        let plane = h * w;
        debug_assert_eq!(x.len(), self.in_ch * plane);
        let mut out = vec![T::zero(); self.out_ch * plane];
        for (o, dst) in out.chunks_exact_mut(plane).enumerate() {
            dst.fill(self.bias[o]);
            for (c, src) in x.chunks_exact(plane).enumerate() {
                let k = &self.weight[(o * self.in_ch + c) * 9..][..9];
                for (tap, &wv) in k.iter().enumerate() {
                    if wv != T::zero() {
                        shifted_axpy(dst, src, wv, h, w, tap / 3, tap % 3);
                    }
                }
            }
        }
        out
    }

    /// Adjoint with respect to the input: correlation with flipped kernels.
    pub fn backward_input(&self, g: &[T], h: usize, w: usize) -> Vec<T> {
        let plane = h * w;
        debug_assert_eq!(g.len(), self.out_ch * plane);
        let mut out = vec![T::zero(); self.in_ch * plane];
        for (o, src) in g.chunks_exact(plane).enumerate() {
            for (c, dst) in out.chunks_exact_mut(plane).enumerate() {
                let k = &self.weight[(o * self.in_ch + c) * 9..][..9];
                for (tap, &wv) in k.iter().enumerate() {
                    if wv != T::zero() {
                        shifted_axpy(dst, src, wv, h, w, 2 - tap / 3, 2 - tap % 3);
                    }
                }
            }
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> Conv3x3<U> {
        Conv3x3 { in_ch: self.in_ch, out_ch: self.out_ch, weight: cast_vec(&self.weight), bias: cast_vec(&self.bias) }
    }
}

/// `dst[y, x] += a · src[y + ky - 1, x + kx - 1]` over in-bounds positions.
#[inline]
fn shifted_axpy<T: Scalar>(dst: &mut [T], src: &[T], a: T, h: usize, w: usize, ky: usize, kx: usize) {
    let (y0, y1) = (usize::from(ky == 0), if ky == 2 { h - 1 } else { h });
    let (x0, x1) = (usize::from(kx == 0), if kx == 2 { w - 1 } else { w });
    if x0 >= x1 {
        return;
    }
    for y in y0..y1 {
        let sy = y + ky - 1;
        let d = &mut dst[y * w + x0..y * w + x1];
        let s = &src[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
        for (dv, &sv) in d.iter_mut().zip(s) {
            *dv = *dv + a * sv;
        }
    }
}

/// Nearest-neighbour 2× upsampling of `ch` planes of `h × w`.
pub(crate) fn upsample2<T: Scalar>(x: &[T], ch: usize, h: usize, w: usize) -> Vec<T> {
    let (h2, w2) = (2 * h, 2 * w);
    let mut out = vec![T::zero(); ch * h2 * w2];
    for c in 0..ch {
        let src = &x[c * h * w..(c + 1) * h * w];
        let dst = &mut out[c * h2 * w2..(c + 1) * h2 * w2];
        for y in 0..h2 {
            let row = &src[(y / 2) * w..(y / 2 + 1) * w];
            for (xx, d) in dst[y * w2..(y + 1) * w2].iter_mut().enumerate() {
                *d = row[xx / 2];
            }
        }
    }
    out
}

/// Adjoint of [`upsample2`]: 2×2 block sums back onto `h × w` planes.
pub(crate) fn upsample2_adjoint<T: Scalar>(g: &[T], ch: usize, h: usize, w: usize) -> Vec<T> {
    let (h2, w2) = (2 * h, 2 * w);
    let mut out = vec![T::zero(); ch * h * w];
    for c in 0..ch {
        let src = &g[c * h2 * w2..(c + 1) * h2 * w2];
        let dst = &mut out[c * h * w..(c + 1) * h * w];
        for y in 0..h2 {
            for xx in 0..w2 {
                let d = &mut dst[(y / 2) * w + xx / 2];
                *d = *d + src[y * w2 + xx];
            }
        }
    }
    out
}

#[inline]
pub(crate) fn leaky<T: Scalar>(v: T, slope: T) -> T {
    if v > T::zero() {
        v
    } else {
        v * slope
    }
}

#[inline]
pub(crate) fn leaky_grad<T: Scalar>(v: T, slope: T) -> T {
    if v > T::zero() {
        T::one()
    } else {
        slope
    }
}

fn cast_vec<T: Scalar, U: Scalar>(v: &[T]) -> Vec<U> {
    v.iter().map(|x| U::lit(x.as_f64())).collect()
}
