//! `DS3PRW1` weight container.
//!
//! Little-endian layout:
//!
//! ```text
//! magic   b"DS3PRW1\0"
//! u32     version (= 1)
//! u32     layer_count
//! layer*  u8 kind, u32 param_count, param*
//! param   u8 rank, u32 dims[rank], f32 data[prod(dims)] (row-major)
//! ```
//!
//! Kinds: 0 Dense (weight `(out, in)`, bias), 1 BatchNorm (γ, β, running
//! mean, running var), 2 Conv (kernel `(out, in, 3, 3)`, bias), 3 Upsample,
//! 4 LeakyReLU, 5 Tanh, 6 Reshape. Parameter-free layers store
//! `param_count = 0`.

use std::fs;
use std::path::Path;

use super::{BatchNorm, Conv3x3, Dense, GeneratorArch, GeneratorNetwork};
use crate::{Error, Result, Scalar};

pub const WEIGHT_MAGIC: &[u8; 8] = b"DS3PRW1\0";
pub const WEIGHT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum LayerKind {
    Dense = 0,
    BatchNorm = 1,
    Conv = 2,
    Upsample = 3,
    LeakyRelu = 4,
    Tanh = 5,
    Reshape = 6,
}

impl LayerKind {
    fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            0 => LayerKind::Dense,
            1 => LayerKind::BatchNorm,
            2 => LayerKind::Conv,
            3 => LayerKind::Upsample,
            4 => LayerKind::LeakyRelu,
            5 => LayerKind::Tanh,
            6 => LayerKind::Reshape,
            _ => return None,
        })
    }
}

const SEQUENCE: [LayerKind; 13] = [
    LayerKind::Dense,
    LayerKind::Reshape,
    LayerKind::BatchNorm,
    LayerKind::Upsample,
    LayerKind::Conv,
    LayerKind::BatchNorm,
    LayerKind::LeakyRelu,
    LayerKind::Upsample,
    LayerKind::Conv,
    LayerKind::BatchNorm,
    LayerKind::LeakyRelu,
    LayerKind::Conv,
    LayerKind::Tanh,
];

struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

struct RawLayer {
    kind: LayerKind,
    params: Vec<Tensor>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(format!("unexpected EOF at byte {}", self.buf.len())));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn expected_shapes(arch: &GeneratorArch, index: usize) -> Vec<Vec<usize>> {
    let a = arch;
    let bn = |c: usize| vec![vec![c]; 4];
    let conv = |i: usize, o: usize| vec![vec![o, i, 3, 3], vec![o]];
    match index {
        0 => vec![vec![a.dense_out(), a.latent_dim], vec![a.dense_out()]],
        2 => bn(a.dense_channels),
        4 => conv(a.dense_channels, a.mid_channels),
        5 => bn(a.mid_channels),
        8 => conv(a.mid_channels, a.last_channels),
        9 => bn(a.last_channels),
        11 => conv(a.last_channels, 1),
        _ => Vec::new(),
    }
}

/// Reads the architecture widths implied by the layer shapes.
fn infer_arch(layers: &[RawLayer]) -> Result<GeneratorArch> {
    let dims = |layer: usize, param: usize, axis: usize| -> Result<usize> {
        layers[layer]
            .params
            .get(param)
            .and_then(|t| t.dims.get(axis).copied())
            .ok_or_else(|| Error::format(format!("layer {layer} shape mismatch: missing parameter {param}")))
    };
    let latent_dim = dims(0, 0, 1)?;
    let dense_out = dims(0, 0, 0)?;
    let dense_channels = dims(2, 0, 0)?;
    let mid_channels = dims(4, 0, 0)?;
    let last_channels = dims(8, 0, 0)?;
    let plane = dense_out.checked_div(dense_channels).unwrap_or(0);
    let base_side = (plane as f64).sqrt().round() as usize;
    if base_side == 0 || dense_channels * base_side * base_side != dense_out {
        return Err(Error::format(format!(
            "layer 1 shape mismatch: cannot reshape {dense_out} features into {dense_channels} square planes"
        )));
    }
    Ok(GeneratorArch { latent_dim, base_side, dense_channels, mid_channels, last_channels })
}

fn parse(bytes: &[u8]) -> Result<Vec<RawLayer>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8).map_err(|_| Error::format("unexpected EOF in header"))? != WEIGHT_MAGIC {
        return Err(Error::format("bad magic (expected DS3PRW1)"));
    }
    let version = r.u32()?;
    if version != WEIGHT_VERSION {
        return Err(Error::format(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    if count != SEQUENCE.len() {
        return Err(Error::format(format!("expected {} layers, file declares {count}", SEQUENCE.len())));
    }
    let mut layers = Vec::with_capacity(count);
    for (i, want) in SEQUENCE.iter().enumerate() {
        let byte = r.u8()?;
        let kind = LayerKind::from_byte(byte)
            .ok_or_else(|| Error::format(format!("layer {i}: unknown kind {byte}")))?;
        if kind != *want {
            return Err(Error::format(format!("layer {i}: expected {want:?}, found {kind:?}")));
        }
        let n_params = r.u32()? as usize;
        let mut params = Vec::with_capacity(n_params.min(8));
        for _ in 0..n_params {
            let rank = r.u8()? as usize;
            let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let len = dims.iter().product::<usize>();
            let raw = r.take(len.checked_mul(4).ok_or_else(|| Error::format("parameter too large"))?)?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            params.push(Tensor { dims, data });
        }
        layers.push(RawLayer { kind, params });
    }
    if r.pos != bytes.len() {
        return Err(Error::format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(layers)
}

fn build<T: Scalar>(layers: Vec<RawLayer>, arch: GeneratorArch) -> Result<GeneratorNetwork<T>> {
    for (i, layer) in layers.iter().enumerate() {
        let want = expected_shapes(&arch, i);
        let found: Vec<Vec<usize>> = layer.params.iter().map(|t| t.dims.clone()).collect();
        if want != found {
            return Err(Error::format(format!(
                "layer {i} shape mismatch ({:?}): expected {want:?}, found {found:?}",
                layer.kind
            )));
        }
        if layer.params.iter().any(|t| t.data.iter().any(|v| !v.is_finite())) {
            return Err(Error::format(format!("layer {i} ({:?}): non-finite parameter", layer.kind)));
        }
    }
    let mut it = layers.into_iter().enumerate();
    let mut next = |want: LayerKind| -> (usize, Vec<Vec<T>>) {
        loop {
            let (i, layer) = it.next().expect("sequence already validated");
            if layer.kind == want && !layer.params.is_empty() {
                return (i, layer.params.into_iter().map(|t| t.data.into_iter().map(T::from_storage).collect()).collect());
            }
        }
    };
    let shape_err = |i: usize, e: Error| Error::format(format!("layer {i}: {e}"));

    let (i, mut p) = next(LayerKind::Dense);
    let (bias, weight) = (p.pop().unwrap(), p.pop().unwrap());
    let dense = Dense::new(arch.latent_dim, arch.dense_out(), weight, bias).map_err(|e| shape_err(i, e))?;

    let batchnorm = |next: &mut dyn FnMut(LayerKind) -> (usize, Vec<Vec<T>>)| -> Result<BatchNorm<T>> {
        let (i, mut p) = next(LayerKind::BatchNorm);
        let (var, mean, beta, gamma) = (p.pop().unwrap(), p.pop().unwrap(), p.pop().unwrap(), p.pop().unwrap());
        BatchNorm::new(gamma, beta, mean, var)
            .map_err(|_| Error::format(format!("layer {i} (BatchNorm): non-positive running variance")))
    };
    let conv = |next: &mut dyn FnMut(LayerKind) -> (usize, Vec<Vec<T>>), cin: usize, cout: usize| -> Result<Conv3x3<T>> {
        let (i, mut p) = next(LayerKind::Conv);
        let (bias, weight) = (p.pop().unwrap(), p.pop().unwrap());
        Conv3x3::new(cin, cout, weight, bias).map_err(|e| shape_err(i, e))
    };

    let bn0 = batchnorm(&mut next)?;
    let conv1 = conv(&mut next, arch.dense_channels, arch.mid_channels)?;
    let bn1 = batchnorm(&mut next)?;
    let conv2 = conv(&mut next, arch.mid_channels, arch.last_channels)?;
    let bn2 = batchnorm(&mut next)?;
    let conv3 = conv(&mut next, arch.last_channels, 1)?;
    GeneratorNetwork::from_layers(arch, dense, bn0, conv1, bn1, conv2, bn2, conv3)
}

/// Decodes a weight file. With `arch = None` the widths are inferred from
/// the stored shapes; otherwise every shape must match `arch`.
pub fn decode_weights<T: Scalar>(bytes: &[u8], arch: Option<GeneratorArch>) -> Result<GeneratorNetwork<T>> {
    let layers = parse(bytes)?;
    let arch = match arch {
        Some(a) => a,
        None => infer_arch(&layers)?,
    };
    build(layers, arch)
}

/// Loads a standard-architecture generator.
pub fn load_weights<T: Scalar>(path: impl AsRef<Path>) -> Result<GeneratorNetwork<T>> {
    decode_weights(&fs::read(path)?, Some(GeneratorArch::standard()))
}

/// Loads a generator of whatever width the file declares.
pub fn load_weights_as<T: Scalar>(path: impl AsRef<Path>, arch: Option<GeneratorArch>) -> Result<GeneratorNetwork<T>> {
    decode_weights(&fs::read(path)?, arch)
}

fn put_tensor<T: Scalar>(out: &mut Vec<u8>, dims: &[usize], data: &[T]) {
    out.push(dims.len() as u8);
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_storage().to_le_bytes());
    }
}

pub fn encode_weights<T: Scalar>(g: &GeneratorNetwork<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(WEIGHT_MAGIC);
    out.extend_from_slice(&WEIGHT_VERSION.to_le_bytes());
    out.extend_from_slice(&(SEQUENCE.len() as u32).to_le_bytes());
    let arch = g.arch();
    let bns = [&g.bn0, &g.bn1, &g.bn2];
    let convs = [&g.conv1, &g.conv2, &g.conv3];
    let (mut bn_i, mut conv_i) = (0, 0);
    for (i, kind) in SEQUENCE.iter().enumerate() {
        out.push(*kind as u8);
        let shapes = expected_shapes(&arch, i);
        out.extend_from_slice(&(shapes.len() as u32).to_le_bytes());
        match kind {
            LayerKind::Dense => {
                put_tensor(&mut out, &shapes[0], g.dense.weight());
                put_tensor(&mut out, &shapes[1], g.dense.bias());
            }
            LayerKind::BatchNorm => {
                let bn = bns[bn_i];
                bn_i += 1;
                for (shape, data) in shapes.iter().zip([bn.gamma(), bn.beta(), bn.running_mean(), bn.running_var()]) {
                    put_tensor(&mut out, shape, data);
                }
            }
            LayerKind::Conv => {
                let c = convs[conv_i];
                conv_i += 1;
                put_tensor(&mut out, &shapes[0], c.weight());
                put_tensor(&mut out, &shapes[1], c.bias());
            }
            _ => {}
        }
    }
    out
}

pub fn save_weights<T: Scalar>(g: &GeneratorNetwork<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_weights(g))?;
    Ok(())
}
