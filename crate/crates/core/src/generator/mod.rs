//! Fixed DC-GAN style decoder `G: ℝ^k → (-1, 1)^{s×s}` with inference-mode
//! forward evaluation and a hand-derived vector-Jacobian product in `z`.
//!
//! Layer sequence (channel-major activations):
//!
//! ```text
//! Dense(k → c0·b·b) · Reshape(c0, b, b) · BatchNorm
//!   · Upsample×2 · Conv3×3(c0 → c1) · BatchNorm · LeakyReLU
//!   · Upsample×2 · Conv3×3(c1 → c2) · BatchNorm · LeakyReLU
//!   · Conv3×3(c2 → 1) · Tanh
//! ```
//!
//! The standard instance is `k = 100, b = 8, (c0, c1, c2) = (128, 128, 64)`,
//! giving 32×32 images. Smaller instances of the same sequence are used as
//! cheap fixtures.

mod layers;
mod weights;

pub use layers::{BatchNorm, Conv3x3, Dense};
pub use weights::{decode_weights, encode_weights, load_weights, load_weights_as, save_weights, LayerKind, WEIGHT_MAGIC, WEIGHT_VERSION};

use crate::ndcore::{Image, RngStream};
use crate::{Error, Result, Scalar};

pub const LATENT_DIM: usize = 100;
pub const LEAKY_SLOPE: f64 = 0.2;
pub const BATCHNORM_EPS: f64 = 1e-5;

/// Widths of one instance of the fixed layer sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GeneratorArch {
    pub latent_dim: usize,
    /// Side of the feature map after the reshape.
    pub base_side: usize,
    pub dense_channels: usize,
    pub mid_channels: usize,
    pub last_channels: usize,
}

impl GeneratorArch {
    /// 100 → 8×8×128 → 16×16×128 → 32×32×64 → 32×32.
    pub const fn standard() -> Self {
        Self { latent_dim: LATENT_DIM, base_side: 8, dense_channels: 128, mid_channels: 128, last_channels: 64 }
    }

    /// 100 → 4×4×16 → 8×8×16 → 16×16×8 → 16×16.
    pub const fn toy() -> Self {
        Self { latent_dim: LATENT_DIM, base_side: 4, dense_channels: 16, mid_channels: 16, last_channels: 8 }
    }

    pub fn output_side(&self) -> usize {
        4 * self.base_side
    }

    pub fn output_len(&self) -> usize {
        self.output_side() * self.output_side()
    }

    pub fn dense_out(&self) -> usize {
        self.dense_channels * self.base_side * self.base_side
    }

    /// Activation sizes along the chain, latent to image.
    pub fn shape_chain(&self) -> [usize; 5] {
        let b = self.base_side;
        [
            self.latent_dim,
            self.dense_out(),
            self.mid_channels * 4 * b * b,
            self.last_channels * 16 * b * b,
            self.output_len(),
        ]
    }
}

/// Latent vector of fixed length.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentVector<T>(Vec<T>);

impl<T: Scalar> LatentVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("latent vector"));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![T::zero(); dim])
    }

    /// i.i.d. N(0, 1) entries.
    pub fn random(dim: usize, stream: &mut RngStream) -> Self {
        Self(stream.randn(dim))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }
}

/// Intermediate values retained by [`GeneratorNetwork::forward_cached`] for the VJP.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    pre_act1: Vec<T>,
    pre_act2: Vec<T>,
    output: Vec<T>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn output(&self) -> &[T] {
        &self.output
    }
}

/// Generator with frozen weights and batch-norm running statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorNetwork<T> {
    arch: GeneratorArch,
    pub(crate) dense: Dense<T>,
    pub(crate) bn0: BatchNorm<T>,
    pub(crate) conv1: Conv3x3<T>,
    pub(crate) bn1: BatchNorm<T>,
    pub(crate) conv2: Conv3x3<T>,
    pub(crate) bn2: BatchNorm<T>,
    pub(crate) conv3: Conv3x3<T>,
}

impl<T: Scalar> GeneratorNetwork<T> {
    /// Assembles a network, checking every layer against `arch`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_layers(
        arch: GeneratorArch,
        dense: Dense<T>,
        bn0: BatchNorm<T>,
        conv1: Conv3x3<T>,
        bn1: BatchNorm<T>,
        conv2: Conv3x3<T>,
        bn2: BatchNorm<T>,
        conv3: Conv3x3<T>,
    ) -> Result<Self> {
        let net = Self { arch, dense, bn0, conv1, bn1, conv2, bn2, conv3 };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        let a = &self.arch;
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(Error::shape(format!("{what} does not match {a:?}"))) };
        check(self.dense.in_dim() == a.latent_dim && self.dense.out_dim() == a.dense_out(), "dense layer")?;
        check(self.bn0.channels() == a.dense_channels, "first batch norm")?;
        check(self.conv1.in_ch() == a.dense_channels && self.conv1.out_ch() == a.mid_channels, "first conv")?;
        check(self.bn1.channels() == a.mid_channels, "second batch norm")?;
        check(self.conv2.in_ch() == a.mid_channels && self.conv2.out_ch() == a.last_channels, "second conv")?;
        check(self.bn2.channels() == a.last_channels, "third batch norm")?;
        check(self.conv3.in_ch() == a.last_channels && self.conv3.out_ch() == 1, "output conv")?;
        Ok(())
    }

    /// Zero weights and biases, identity batch norms: `G(z) = 0` for every `z`.
    pub fn zeros(arch: GeneratorArch) -> Self {
        Self {
            arch,
            dense: Dense::zeros(arch.latent_dim, arch.dense_out()),
            bn0: BatchNorm::identity(arch.dense_channels),
            conv1: Conv3x3::zeros(arch.dense_channels, arch.mid_channels),
            bn1: BatchNorm::identity(arch.mid_channels),
            conv2: Conv3x3::zeros(arch.mid_channels, arch.last_channels),
            bn2: BatchNorm::identity(arch.last_channels),
            conv3: Conv3x3::zeros(arch.last_channels, 1),
        }
    }

    /// Random weights (variance-preserving scales) and perturbed batch-norm
    /// statistics. Used for planted-signal experiments and gradient checks.
    pub fn random(arch: GeneratorArch, stream: &mut RngStream) -> Self {
        Self {
            arch,
            dense: Dense::random(arch.latent_dim, arch.dense_out(), stream),
            bn0: BatchNorm::random(arch.dense_channels, stream),
            conv1: Conv3x3::random(arch.dense_channels, arch.mid_channels, 2.0, stream),
            bn1: BatchNorm::random(arch.mid_channels, stream),
            conv2: Conv3x3::random(arch.mid_channels, arch.last_channels, 2.0, stream),
            bn2: BatchNorm::random(arch.last_channels, stream),
            conv3: Conv3x3::random(arch.last_channels, 1, 1.0, stream),
        }
    }

    pub fn arch(&self) -> GeneratorArch {
        self.arch
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim
    }

    pub fn output_side(&self) -> usize {
        self.arch.output_side()
    }

    pub fn forward(&self, z: &LatentVector<T>) -> Image<T> {
        let side = self.output_side();
        Image::new(side, side, self.forward_cached(z.as_slice()).output).expect("output shape")
    }

    /// Forward pass returning the values the VJP needs.
    pub fn forward_cached(&self, z: &[T]) -> ForwardCache<T> {
        assert_eq!(z.len(), self.arch.latent_dim, "latent length");
        let b = self.arch.base_side;
        let slope = T::lit(LEAKY_SLOPE);

        let mut h = self.dense.forward(z);
        self.bn0.apply(&mut h, b * b);
        let h = layers::upsample2(&h, self.arch.dense_channels, b, b);

        let mut pre1 = self.conv1.forward(&h, 2 * b, 2 * b);
        self.bn1.apply(&mut pre1, 4 * b * b);
        let act1: Vec<T> = pre1.iter().map(|&v| layers::leaky(v, slope)).collect();
        let h = layers::upsample2(&act1, self.arch.mid_channels, 2 * b, 2 * b);

        let mut pre2 = self.conv2.forward(&h, 4 * b, 4 * b);
        self.bn2.apply(&mut pre2, 16 * b * b);
        let act2: Vec<T> = pre2.iter().map(|&v| layers::leaky(v, slope)).collect();

        let mut out = self.conv3.forward(&act2, 4 * b, 4 * b);
        for v in out.iter_mut() {
            *v = v.tanh();
        }
        ForwardCache { pre_act1: pre1, pre_act2: pre2, output: out }
    }

    /// `Jᵀ·cotangent`, where `J = ∂G/∂z` at `z`.
    pub fn vjp(&self, z: &LatentVector<T>, cotangent: &Image<T>) -> Vec<T> {
        let cache = self.forward_cached(z.as_slice());
        self.vjp_cached(&cache, cotangent.as_slice())
    }

    /// VJP reusing a forward pass at the same `z`.
    pub fn vjp_cached(&self, cache: &ForwardCache<T>, cotangent: &[T]) -> Vec<T> {
        let b = self.arch.base_side;
        let slope = T::lit(LEAKY_SLOPE);
        assert_eq!(cotangent.len(), self.arch.output_len(), "cotangent length");

        let g: Vec<T> =
            cotangent.iter().zip(&cache.output).map(|(&c, &y)| c * (T::one() - y * y)).collect();
        let mut g = self.conv3.backward_input(&g, 4 * b, 4 * b);

        for (gi, &p) in g.iter_mut().zip(&cache.pre_act2) {
            *gi = *gi * layers::leaky_grad(p, slope);
        }
        self.bn2.scale_only(&mut g, 16 * b * b);
        let g = self.conv2.backward_input(&g, 4 * b, 4 * b);
        let mut g = layers::upsample2_adjoint(&g, self.arch.mid_channels, 2 * b, 2 * b);

        for (gi, &p) in g.iter_mut().zip(&cache.pre_act1) {
            *gi = *gi * layers::leaky_grad(p, slope);
        }
        self.bn1.scale_only(&mut g, 4 * b * b);
        let g = self.conv1.backward_input(&g, 2 * b, 2 * b);
        let mut g = layers::upsample2_adjoint(&g, self.arch.dense_channels, b, b);

        self.bn0.scale_only(&mut g, b * b);
        self.dense.backward_input(&g)
    }

    pub fn cast<U: Scalar>(&self) -> GeneratorNetwork<U> {
        GeneratorNetwork {
            arch: self.arch,
            dense: self.dense.cast(),
            bn0: self.bn0.cast(),
            conv1: self.conv1.cast(),
            bn1: self.bn1.cast(),
            conv2: self.conv2.cast(),
            bn2: self.bn2.cast(),
            conv3: self.conv3.cast(),
        }
    }
}
