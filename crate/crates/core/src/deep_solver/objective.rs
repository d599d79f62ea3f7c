//! Data-fit objectives over latent vectors and their gradients.

use num_complex::Complex;

use crate::generator::{GeneratorNetwork, LatentVector};
use crate::measurement::MeasurementOperator;
use crate::ndcore::Fft2;
use crate::{Error, Result, Scalar};

pub(crate) fn check_inputs<T: Scalar>(a: &MeasurementOperator<T>, y: &[T], g: &GeneratorNetwork<T>, latents: &[LatentVector<T>]) -> Result<()> {
    if latents.is_empty() {
        return Err(Error::invalid("need at least one latent vector"));
    }
    if y.len() != a.m() {
        return Err(Error::shape(format!("observation length {} != m = {}", y.len(), a.m())));
    }
    if g.output_side() != a.side() {
        return Err(Error::shape(format!("generator emits {0}x{0} images, operator expects {1}x{1}", g.output_side(), a.side())));
    }
    if let Some(z) = latents.iter().find(|z| z.len() != g.latent_dim()) {
        return Err(Error::shape(format!("latent length {} != {}", z.len(), g.latent_dim())));
    }
    Ok(())
}

/// `‖y − Σ_l |A G(z_l)|²‖²`.
pub fn loss<T: Scalar>(a: &MeasurementOperator<T>, y: &[T], g: &GeneratorNetwork<T>, latents: &[LatentVector<T>]) -> Result<T> {
    check_inputs(a, y, g, latents)?;
    let mut r = y.to_vec();
    for z in latents {
        let x = g.forward_cached(z.as_slice());
        for (ri, v) in r.iter_mut().zip(a.apply_real_unchecked(x.output())) {
            *ri = *ri - v.norm_sqr();
        }
    }
    Ok(r.iter().map(|&v| v * v).sum())
}

/// `∇_{z_l}` of [`loss`]: the generator VJP of the image-space residual gradient.
pub fn loss_gradient<T: Scalar>(
    a: &MeasurementOperator<T>,
    y: &[T],
    g: &GeneratorNetwork<T>,
    latents: &[LatentVector<T>],
    l: usize,
) -> Result<Vec<T>> {
    check_inputs(a, y, g, latents)?;
    if l >= latents.len() {
        return Err(Error::invalid(format!("latent index {l} out of {}", latents.len())));
    }
    let caches: Vec<_> = latents.iter().map(|z| g.forward_cached(z.as_slice())).collect();
    let images: Vec<&[T]> = caches.iter().map(|c| c.output()).collect();
    let dx = a.residual_gradient(y, &images, l)?;
    Ok(g.vjp_cached(&caches[l], &dx))
}

/// Circular autocorrelation on the padded Fourier grid, `x ⋆ x = F⁻¹(|F P x|²)`
/// under the unitary DFT, for an image already padded to `fft`'s shape.
pub fn autocorrelation<T: Scalar>(fft: &Fft2<T>, padded: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut buf = padded.to_vec();
    fft.forward(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex::new(v.norm_sqr(), T::zero());
    }
    fft.inverse(&mut buf);
    buf
}

fn require_fourier<T: Scalar>(a: &MeasurementOperator<T>) -> Result<Fft2<T>> {
    match a.fourier_side() {
        Some(s) => Ok(Fft2::new(s, s)),
        None => Err(Error::invalid(format!("autocorrelation objective needs a Fourier operator, got {}", a.mode()))),
    }
}

/// Autocorrelation-domain target `F⁻¹ y`.
pub(crate) fn autocorrelation_target<T: Scalar>(fft: &Fft2<T>, y: &[T]) -> Vec<Complex<T>> {
    let mut buf: Vec<Complex<T>> = y.iter().map(|&v| Complex::new(v, T::zero())).collect();
    fft.inverse(&mut buf);
    buf
}

pub(crate) fn pad_to<T: Scalar>(x: &[T], side: usize, big: usize) -> Vec<Complex<T>> {
    let mut buf = vec![Complex::new(T::zero(), T::zero()); big * big];
    for r in 0..side {
        for c in 0..side {
            buf[r * big + c] = Complex::new(x[r * side + c], T::zero());
        }
    }
    buf
}

/// `‖F⁻¹ y − Σ_l G(z_l) ⋆ G(z_l)‖²`; Fourier operators only.
pub fn autocorrelation_loss<T: Scalar>(
    a: &MeasurementOperator<T>,
    y: &[T],
    g: &GeneratorNetwork<T>,
    latents: &[LatentVector<T>],
) -> Result<T> {
    let fft = require_fourier(a)?;
    check_inputs(a, y, g, latents)?;
    let mut r = autocorrelation_target(&fft, y);
    for z in latents {
        let x = g.forward_cached(z.as_slice());
        let ac = autocorrelation(&fft, &pad_to(x.output(), a.side(), fft.rows()));
        for (ri, v) in r.iter_mut().zip(ac) {
            *ri = *ri - v;
        }
    }
    Ok(r.iter().map(|v| v.norm_sqr()).sum())
}

/// `∇_{z_l}` of [`autocorrelation_loss`].
pub fn autocorrelation_loss_gradient<T: Scalar>(
    a: &MeasurementOperator<T>,
    y: &[T],
    g: &GeneratorNetwork<T>,
    latents: &[LatentVector<T>],
    l: usize,
) -> Result<Vec<T>> {
    let fft = require_fourier(a)?;
    check_inputs(a, y, g, latents)?;
    if l >= latents.len() {
        return Err(Error::invalid(format!("latent index {l} out of {}", latents.len())));
    }
    let caches: Vec<_> = latents.iter().map(|z| g.forward_cached(z.as_slice())).collect();
    let mut r = autocorrelation_target(&fft, y);
    for c in &caches {
        let ac = autocorrelation(&fft, &pad_to(c.output(), a.side(), fft.rows()));
        for (ri, v) in r.iter_mut().zip(ac) {
            *ri = *ri - v;
        }
    }
    let r_meas = autocorrelation_residual_to_measurement(&fft, r);
    let ax = a.apply_real_unchecked(caches[l].output());
    let dx = a.intensity_gradient(&r_meas, &ax);
    Ok(g.vjp_cached(&caches[l], &dx))
}

/// Maps an autocorrelation-domain residual `R` to `Re(F R)`, the
/// measurement-domain weights of the gradient.
pub(crate) fn autocorrelation_residual_to_measurement<T: Scalar>(fft: &Fft2<T>, mut r: Vec<Complex<T>>) -> Vec<T> {
    fft.forward(&mut r);
    r.into_iter().map(|v| v.re).collect()
}
