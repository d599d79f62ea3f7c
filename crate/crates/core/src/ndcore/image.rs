use num_complex::Complex;

use crate::{Error, Result, Scalar};

/// Dense row-major real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexImage<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

fn check_dims(rows: usize, cols: usize, len: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::shape(format!("empty image {rows}x{cols}")));
    }
    if rows * cols != len {
        return Err(Error::shape(format!(
            "{rows}x{cols} image needs {} entries, got {len}",
            rows * cols
        )));
    }
    Ok(())
}

impl<T: Scalar> Image<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        check_dims(rows, cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::zero())
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        assert!(rows > 0 && cols > 0, "empty image");
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(rows > 0 && cols > 0, "empty image");
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Square image from a flat row-major vector.
    pub fn square(data: Vec<T>) -> Result<Self> {
        let side = (data.len() as f64).sqrt().round() as usize;
        Self::new(side, side, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn norm_sq(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// Mirror across the vertical axis (reverse each row).
    pub fn flip_lr(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |r, c| self.get(r, self.cols - 1 - c))
    }

    /// Mirror across the horizontal axis (reverse row order).
    pub fn flip_ud(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |r, c| self.get(self.rows - 1 - r, c))
    }

    pub fn to_complex(&self) -> ComplexImage<T> {
        ComplexImage {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| Complex::new(v, T::zero())).collect(),
        }
    }

    /// Copies into the top-left corner of a zero `rows × cols` canvas.
    pub fn zero_pad(&self, rows: usize, cols: usize) -> Result<Self> {
        if rows < self.rows || cols < self.cols {
            return Err(Error::shape(format!(
                "cannot pad {}x{} into {rows}x{cols}",
                self.rows, self.cols
            )));
        }
        let mut out = Self::zeros(rows, cols);
        for r in 0..self.rows {
            out.data[r * cols..r * cols + self.cols]
                .copy_from_slice(&self.data[r * self.cols..(r + 1) * self.cols]);
        }
        Ok(out)
    }

    pub fn cast<U: Scalar>(&self) -> Image<U> {
        Image {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

impl<T: Scalar> ComplexImage<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        check_dims(rows, cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty image");
        Self { rows, cols, data: vec![Complex::new(T::zero(), T::zero()); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        assert!(rows > 0 && cols > 0, "empty image");
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex<T> {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex<T>) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex<T>> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn norm_sq(&self) -> T {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn re(&self) -> Image<T> {
        Image { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v.re).collect() }
    }

    /// Entrywise squared magnitude.
    pub fn intensity(&self) -> Image<T> {
        Image {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.norm_sqr()).collect(),
        }
    }
}
