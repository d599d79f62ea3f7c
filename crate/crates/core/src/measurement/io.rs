//! Operator container.
//!
//! Little-endian layout:
//!
//! ```text
//! magic    b"DS3PROP\0"
//! u32      version (= 1)
//! u8       mode (0 Gaussian, 1 CDP, 2 Fourier)
//! u32      image side
//! u8       has_seed, u64 seed
//! u8       has_payload
//! payload  f64 (re, im) pairs: the m×n matrix (Gaussian) or the 4 masks (CDP)
//! ```
//!
//! Without a payload the operator is regenerated from its seed.

use std::fs;
use std::path::Path;

use num_complex::Complex;

use super::operator::OperatorData;
use super::{MeasurementOperator, OperatorMode};
use crate::{Error, Result, Scalar};

pub const OPERATOR_MAGIC: &[u8; 8] = b"DS3PROP\0";
const VERSION: u32 = 1;

pub fn encode_operator<T: Scalar>(a: &MeasurementOperator<T>, with_payload: bool) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(OPERATOR_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(a.mode().to_tag());
    out.extend_from_slice(&(a.side() as u32).to_le_bytes());
    out.push(u8::from(a.seed().is_some()));
    out.extend_from_slice(&a.seed().unwrap_or(0).to_le_bytes());
    let payload: Vec<Complex<T>> = match &a.data {
        OperatorData::Gaussian { re, im } => re.iter().zip(im).map(|(&r, &i)| Complex::new(r, i)).collect(),
        OperatorData::Cdp { masks } => masks.clone(),
        OperatorData::Fourier => Vec::new(),
    };
    let with_payload = with_payload && !payload.is_empty();
    out.push(u8::from(with_payload));
    if with_payload {
        for z in payload {
            out.extend_from_slice(&z.re.as_f64().to_le_bytes());
            out.extend_from_slice(&z.im.as_f64().to_le_bytes());
        }
    }
    out
}

pub fn decode_operator<T: Scalar>(bytes: &[u8]) -> Result<MeasurementOperator<T>> {
    const HEADER: usize = 8 + 4 + 1 + 4 + 1 + 8 + 1;
    if bytes.len() < HEADER {
        return Err(Error::format("unexpected EOF in operator header"));
    }
    if &bytes[..8] != OPERATOR_MAGIC {
        return Err(Error::format("bad magic (expected DS3PROP)"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = u32_at(8);
    if version != VERSION {
        return Err(Error::format(format!("unsupported operator version {version}")));
    }
    let mode = OperatorMode::from_tag(bytes[12]).ok_or_else(|| Error::format(format!("unknown mode tag {}", bytes[12])))?;
    let side = u32_at(13) as usize;
    let has_seed = bytes[17] != 0;
    let seed = u64::from_le_bytes(bytes[18..26].try_into().unwrap());
    let has_payload = bytes[26] != 0;
    let body = &bytes[HEADER..];
    if side == 0 {
        return Err(Error::format("zero image side"));
    }
    let n = side * side;

    if !has_payload {
        if !body.is_empty() {
            return Err(Error::format("trailing bytes after operator header"));
        }
        return match (mode, has_seed) {
            (OperatorMode::Fourier, _) => MeasurementOperator::fourier(n),
            (_, true) => MeasurementOperator::build(mode, side, seed),
            (_, false) => Err(Error::format("random operator stored without seed or payload")),
        };
    }
    let count = match mode {
        OperatorMode::Gaussian => 4 * n * n,
        OperatorMode::Cdp => 4 * n,
        OperatorMode::Fourier => return Err(Error::format("Fourier operator carries no payload")),
    };
    if body.len() != count * 16 {
        return Err(Error::format(format!("payload is {} bytes, expected {}", body.len(), count * 16)));
    }
    let vals: Vec<Complex<T>> = body
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex::new(T::lit(re), T::lit(im))
        })
        .collect();
    let data = match mode {
        OperatorMode::Gaussian => {
            let (re, im) = vals.into_iter().map(|z| (z.re, z.im)).unzip();
            OperatorData::Gaussian { re, im }
        }
        _ => OperatorData::Cdp { masks: vals },
    };
    Ok(MeasurementOperator::from_parts(mode, side, has_seed.then_some(seed), data))
}

pub fn save_operator<T: Scalar>(a: &MeasurementOperator<T>, path: impl AsRef<Path>, with_payload: bool) -> Result<()> {
    fs::write(path, encode_operator(a, with_payload))?;
    Ok(())
}

pub fn load_operator<T: Scalar>(path: impl AsRef<Path>) -> Result<MeasurementOperator<T>> {
    decode_operator(&fs::read(path)?)
}
