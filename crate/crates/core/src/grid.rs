//! Square complex grids in the image and k-space domains, and the centered
//! unitary 2-D Fourier transform between them.
//!
//! Both domains share the same storage (`n * n` row-major `Complex64`
//! samples) and differ only by a zero-sized marker type, so the elementwise
//! algebra is written once. The k-space DC sample lives at `(n/2, n/2)`.

use std::fmt;
use std::marker::PhantomData;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Marker for spatial-domain grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Image;

/// Marker for frequency-domain grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KSpace;

#[derive(Clone, PartialEq)]
pub struct Grid<D> {
    n: usize,
    data: Vec<Complex64>,
    _domain: PhantomData<D>,
}

/// N x N complex spatial image.
pub type ComplexImage = Grid<Image>;

/// N x N complex k-space grid with centered DC.
pub type KSpaceGrid = Grid<KSpace>;

impl<D> fmt::Debug for Grid<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("domain", &std::any::type_name::<D>())
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

fn check_size(n: usize) -> Result<()> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidSize(n));
    }
    Ok(())
}

fn check_finite(data: &[Complex64]) -> Result<()> {
    match data
        .iter()
        .position(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

impl<D> Grid<D> {
    /// Builds a grid from row-major samples, validating size and finiteness.
    pub fn new(n: usize, data: Vec<Complex64>) -> Result<Self> {
        check_size(n)?;
        if data.len() != n * n {
            return Err(Error::ShapeMismatch(format!(
                "expected {} samples for n={n}, got {}",
                n * n,
                data.len()
            )));
        }
        check_finite(&data)?;
        Ok(Self::from_raw(n, data))
    }

    pub fn from_real(n: usize, values: &[f64]) -> Result<Self> {
        Self::new(n, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(n: usize) -> Result<Self> {
        check_size(n)?;
        Ok(Self::from_raw(n, vec![Complex64::new(0.0, 0.0); n * n]))
    }

    pub(crate) fn from_raw(n: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self {
            n,
            data,
            _domain: PhantomData,
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        check_size(n)?;
        let mut data = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                data.push(f(r, c));
            }
        }
        check_finite(&data)?;
        Ok(Self::from_raw(n, data))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[cfg(test)]
    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.n + col]
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::ShapeMismatch(format!(
                "grid sizes {} and {} differ",
                self.n, other.n
            )));
        }
        Ok(())
    }

    fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        self.check_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::from_raw(self.n, data))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::from_raw(self.n, self.data.iter().map(|&z| z * factor).collect())
    }

    /// Elementwise product `a * b`.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Elementwise product `conj(a) * b`.
    pub fn conj_hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.conj() * b)
    }

    /// `<a, b> = sum(conj(a) * b)`; conjugates `self`.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64> {
        self.check_shape(other)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn l2_norm(&self) -> f64 {
        norm(&self.data)
    }

    /// In-place `self += factor * other`.
    pub(crate) fn axpy(&mut self, factor: Complex64, other: &Self) {
        debug_assert_eq!(self.n, other.n);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }
}

pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Centered unitary forward transform: image -> k-space.
pub fn fft2c(img: &ComplexImage) -> Result<KSpaceGrid> {
    check_finite(img.data())?;
    let mut data = img.data.clone();
    transform(img.n, &mut data, Direction::Forward);
    Ok(KSpaceGrid::from_raw(img.n, data))
}

/// Centered unitary inverse transform: k-space -> image.
pub fn ifft2c(k: &KSpaceGrid) -> Result<ComplexImage> {
    check_finite(k.data())?;
    let mut data = k.data.clone();
    transform(k.n, &mut data, Direction::Inverse);
    Ok(ComplexImage::from_raw(k.n, data))
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Inverse,
}

/// Swaps quadrants. For even `n` this is its own inverse, so it serves as
/// both fftshift and ifftshift.
fn shift(n: usize, data: &mut [Complex64]) {
    let h = n / 2;
    for r in 0..h {
        for c in 0..n {
            let c2 = (c + h) % n;
            data.swap(r * n + c, (r + h) * n + c2);
        }
    }
}

fn transform(n: usize, data: &mut [Complex64], dir: Direction) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = match dir {
        Direction::Forward => planner.plan_fft_forward(n),
        Direction::Inverse => planner.plan_fft_inverse(n),
    };
    shift(n, data);
    fft_rows(fft.as_ref(), n, data);
    transpose(n, data);
    fft_rows(fft.as_ref(), n, data);
    transpose(n, data);
    shift(n, data);
    let s = 1.0 / n as f64;
    for z in data.iter_mut() {
        *z *= s;
    }
}

fn fft_rows(fft: &dyn Fft<f64>, n: usize, data: &mut [Complex64]) {
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for row in data.chunks_exact_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
}

fn transpose(n: usize, data: &mut [Complex64]) {
    for r in 0..n {
        for c in (r + 1)..n {
            data.swap(r * n + c, c * n + r);
        }
    }
}
