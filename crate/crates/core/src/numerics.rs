//! Complex 2D images, coil stacks, and the centered orthonormal Fourier pair.
//!
//! The transform convention is `fft2c(x) = fftshift(fft2(ifftshift(x))) / sqrt(H*W)`,
//! so the DC bin sits at `(H/2, W/2)` and both directions are unitary.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Result, SmrdError};

/// A 2D complex image stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    height: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl ComplexImage {
    pub fn new(height: usize, width: usize, data: Vec<Complex64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(SmrdError::EmptyShape { height, width });
        }
        if data.len() != height * width {
            return Err(SmrdError::DataLength {
                len: data.len(),
                height,
                width,
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Unchecked constructor for shapes already validated by the caller.
    pub(crate) fn from_parts(height: usize, width: usize, data: Vec<Complex64>) -> Self {
        debug_assert!(height > 0 && width > 0 && data.len() == height * width);
        Self {
            height,
            width,
            data,
        }
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![Complex64::new(0.0, 0.0); height * width])
    }

    pub fn zeros_like(other: &ComplexImage) -> Self {
        Self::from_parts(
            other.height,
            other.width,
            vec![Complex64::new(0.0, 0.0); other.len()],
        )
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Self::new(height, width, data)
    }

    /// Real-valued image from row-major samples.
    pub fn from_real(height: usize, width: usize, values: &[f64]) -> Result<Self> {
        Self::new(
            height,
            width,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
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

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[row * self.width + col] = value;
    }

    pub fn check_shape(&self, other: &ComplexImage) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(SmrdError::ShapeMismatch {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Squared Euclidean norm.
    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> ComplexImage {
        Self::from_parts(
            self.height,
            self.width,
            self.data.iter().map(|&z| f(z)).collect(),
        )
    }

    pub fn scaled(&self, factor: f64) -> ComplexImage {
        self.map(|z| z * factor)
    }

    /// `self += alpha * other`. Shapes must match (checked only in debug builds).
    pub fn axpy(&mut self, alpha: Complex64, other: &ComplexImage) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    /// `self += alpha * other` with a real coefficient; shapes must match.
    pub fn axpy_real(&mut self, alpha: f64, other: &ComplexImage) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b * alpha;
        }
    }

    pub fn add(&self, other: &ComplexImage) -> Result<ComplexImage> {
        self.check_shape(other)?;
        let mut out = self.clone();
        out.axpy_real(1.0, other);
        Ok(out)
    }

    pub fn sub(&self, other: &ComplexImage) -> Result<ComplexImage> {
        self.check_shape(other)?;
        let mut out = self.clone();
        out.axpy_real(-1.0, other);
        Ok(out)
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &ComplexImage) -> Result<ComplexImage> {
        self.check_shape(other)?;
        Ok(Self::from_parts(
            self.height,
            self.width,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a * b)
                .collect(),
        ))
    }

    /// Squared distance `‖self − other‖²`; shapes must match.
    pub fn dist_sqr(&self, other: &ComplexImage) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).norm_sqr())
            .sum()
    }
}

/// A stack of equally shaped images, one per receiver coil.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilStack {
    coils: Vec<ComplexImage>,
}

impl CoilStack {
    pub fn new(coils: Vec<ComplexImage>) -> Result<Self> {
        let first = coils
            .first()
            .ok_or_else(|| SmrdError::InvalidParameter("coil stack needs at least one coil".into()))?;
        for c in &coils[1..] {
            first.check_shape(c)?;
        }
        Ok(Self { coils })
    }

    pub(crate) fn from_parts(coils: Vec<ComplexImage>) -> Self {
        Self { coils }
    }

    pub fn num_coils(&self) -> usize {
        self.coils.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.coils[0].shape()
    }

    pub fn coils(&self) -> &[ComplexImage] {
        &self.coils
    }

    pub fn coil(&self, c: usize) -> &ComplexImage {
        &self.coils[c]
    }

    pub fn coils_mut(&mut self) -> &mut [ComplexImage] {
        &mut self.coils
    }

    pub fn into_coils(self) -> Vec<ComplexImage> {
        self.coils
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coils.iter().map(ComplexImage::norm_sqr).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.coils.iter().all(ComplexImage::is_finite)
    }
}

/// `Σ conj(a_i) · b_i`.
pub fn inner(a: &ComplexImage, b: &ComplexImage) -> Result<Complex64> {
    a.check_shape(b)?;
    Ok(inner_unchecked(a, b))
}

pub(crate) fn inner_unchecked(a: &ComplexImage, b: &ComplexImage) -> Complex64 {
    a.data
        .iter()
        .zip(&b.data)
        .map(|(x, &y)| x.conj() * y)
        .sum()
}

/// Inner product summed over coils.
pub fn inner_stack(a: &CoilStack, b: &CoilStack) -> Result<Complex64> {
    if a.num_coils() != b.num_coils() {
        return Err(SmrdError::CoilMismatch {
            expected: a.num_coils(),
            found: b.num_coils(),
        });
    }
    a.coils
        .iter()
        .zip(&b.coils)
        .map(|(x, y)| inner(x, y))
        .sum()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    static SCRATCH: RefCell<(Vec<Complex64>, Vec<Complex64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

/// Circular shift: `out[(i + dr) % h][(j + dc) % w] = data[i][j]`.
fn roll(data: &[Complex64], height: usize, width: usize, dr: usize, dc: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for i in 0..height {
        let oi = (i + dr) % height;
        let src = &data[i * width..(i + 1) * width];
        let dst = &mut out[oi * width..(oi + 1) * width];
        dst[dc..].copy_from_slice(&src[..width - dc]);
        dst[..dc].copy_from_slice(&src[width - dc..]);
    }
    out
}

fn transpose_into(src: &[Complex64], dst: &mut [Complex64], height: usize, width: usize) {
    for i in 0..height {
        for j in 0..width {
            dst[j * height + i] = src[i * width + j];
        }
    }
}

/// Unnormalized 2D DFT in place.
fn fft2_in_place(data: &mut [Complex64], height: usize, width: usize, direction: FftDirection) {
    let rows = plan(width, direction);
    let cols = plan(height, direction);
    SCRATCH.with(|cell| {
        let (t, scratch) = &mut *cell.borrow_mut();
        let need = rows.get_inplace_scratch_len().max(cols.get_inplace_scratch_len());
        if scratch.len() < need {
            scratch.resize(need, Complex64::new(0.0, 0.0));
        }
        t.resize(data.len(), Complex64::new(0.0, 0.0));
        rows.process_with_scratch(data, &mut scratch[..rows.get_inplace_scratch_len()]);
        transpose_into(data, t, height, width);
        cols.process_with_scratch(t, &mut scratch[..cols.get_inplace_scratch_len()]);
        transpose_into(t, data, width, height);
    });
}

/// `(−1)^(i+j)`, which for even sizes turns the shifts around a DFT into modulations.
fn checkerboard(data: &mut [Complex64], width: usize, extra: f64) {
    for (row, chunk) in data.chunks_mut(width).enumerate() {
        let mut sign = if row % 2 == 0 { extra } else { -extra };
        for z in chunk {
            *z *= sign;
            sign = -sign;
        }
    }
}

/// Centered orthonormal 2D DFT in place on a row-major `height × width` buffer.
pub(crate) fn centered_in_place(data: &mut [Complex64], height: usize, width: usize, direction: FftDirection) {
    let scale = 1.0 / ((height * width) as f64).sqrt();
    if height.is_multiple_of(2) && width.is_multiple_of(2) {
        // fftshift(F(ifftshift(x)))[k] = (−1)^(k + n/2) F((−1)^j x)[k] per axis
        checkerboard(data, width, 1.0);
        fft2_in_place(data, height, width, direction);
        let parity = if (height / 2 + width / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
        checkerboard(data, width, parity * scale);
    } else {
        let mut buf = roll(data, height, width, height - height / 2, width - width / 2);
        fft2_in_place(&mut buf, height, width, direction);
        let out = roll(&buf, height, width, height / 2, width / 2);
        for (d, z) in data.iter_mut().zip(out) {
            *d = z * scale;
        }
    }
}

fn centered(img: &ComplexImage, direction: FftDirection) -> ComplexImage {
    let mut out = img.clone();
    centered_in_place(&mut out.data, img.height, img.width, direction);
    out
}

/// Centered orthonormal forward 2D DFT.
pub fn fft2c(img: &ComplexImage) -> ComplexImage {
    centered(img, FftDirection::Forward)
}

/// Centered orthonormal inverse 2D DFT.
pub fn ifft2c(ksp: &ComplexImage) -> ComplexImage {
    centered(ksp, FftDirection::Inverse)
}
