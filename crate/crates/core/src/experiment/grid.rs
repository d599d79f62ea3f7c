//! Binary PGM image grids.

use std::path::Path;

use crate::ndcore::Image;
use crate::{Error, Result, Scalar};

pub const SEPARATOR: usize = 2;

fn to_byte<T: Scalar>(v: T) -> u8 {
    let v = v.as_f64();
    if v.is_nan() {
        return 0;
    }
    ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

/// Encodes rows of equally sized images as a P5 graymap, mapping `[−1, 1]`
/// to `[0, 255]` with white separators between cells.
pub fn encode_pgm<T: Scalar>(rows: &[Vec<Image<T>>]) -> Result<Vec<u8>> {
    let first = rows.first().and_then(|r| r.first()).ok_or_else(|| Error::invalid("image grid is empty"))?;
    let (h, w) = (first.rows(), first.cols());
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::shape("image grid rows differ in length"));
    }
    if rows.iter().flatten().any(|img| img.rows() != h || img.cols() != w) {
        return Err(Error::shape("image grid cells differ in shape"));
    }
    let height = rows.len() * h + (rows.len() - 1) * SEPARATOR;
    let width = cols * w + (cols - 1) * SEPARATOR;
    let mut pixels = vec![255u8; height * width];
    for (gr, row) in rows.iter().enumerate() {
        for (gc, img) in row.iter().enumerate() {
            let (top, left) = (gr * (h + SEPARATOR), gc * (w + SEPARATOR));
            for r in 0..h {
                for c in 0..w {
                    pixels[(top + r) * width + left + c] = to_byte(img.get(r, c));
                }
            }
        }
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(&pixels);
    Ok(out)
}

pub fn emit_image_grid<T: Scalar>(rows: &[Vec<Image<T>>], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_pgm(rows)?)?;
    Ok(())
}
