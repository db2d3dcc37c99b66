//! The multicoil undersampled Fourier operator `A = Ω F S`, sampling masks,
//! k-space noise, and optional density compensation.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftDirection;

use crate::error::{Result, SmrdError};
use crate::numerics::{centered_in_place, fft2c, ifft2c, CoilStack, ComplexImage};
use crate::rng;

/// Relative tolerance on realized acceleration.
pub const ACCEL_TOLERANCE: f64 = 0.10;

const MAX_RADIUS_BISECTIONS: usize = 30;
/// Local radius grows linearly from `r0` at the k-space center to `(1 + slope) r0` at the corners.
const RADIUS_SLOPE: f64 = 2.0;
const DENSITY_WINDOW: usize = 7;

/// Binary k-space sampling pattern Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    height: usize,
    width: usize,
    keep: Vec<bool>,
    accel: f64,
}

impl SamplingMask {
    pub fn new(height: usize, width: usize, keep: Vec<bool>, accel: f64) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(SmrdError::EmptyShape { height, width });
        }
        if keep.len() != height * width {
            return Err(SmrdError::DataLength {
                len: keep.len(),
                height,
                width,
            });
        }
        if !(accel >= 1.0) {
            return Err(SmrdError::InvalidParameter(format!(
                "declared acceleration must be >= 1, got {accel}"
            )));
        }
        Ok(Self {
            height,
            width,
            keep,
            accel,
        })
    }

    pub fn full(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![true; height * width], 1.0)
    }

    /// Rebuilds a mask from 0/1 bytes; the declared acceleration becomes the realized one.
    pub fn from_bytes(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        let keep: Vec<bool> = bytes.iter().map(|&b| b != 0).collect();
        let kept = keep.iter().filter(|&&k| k).count();
        if kept == 0 {
            return Err(SmrdError::Mask("mask keeps no samples".into()));
        }
        let accel = (height * width) as f64 / kept as f64;
        Self::new(height, width, keep, accel)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.keep.iter().map(|&k| k as u8).collect()
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

    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    pub fn is_kept(&self, row: usize, col: usize) -> bool {
        self.keep[row * self.width + col]
    }

    pub fn declared_accel(&self) -> f64 {
        self.accel
    }

    pub fn kept_count(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    pub fn realized_accel(&self) -> f64 {
        (self.height * self.width) as f64 / self.kept_count() as f64
    }

    /// Zeroes every masked-out sample.
    pub fn apply(&self, ksp: &ComplexImage) -> Result<ComplexImage> {
        self.check_image(ksp)?;
        Ok(self.apply_unchecked(ksp))
    }

    fn apply_unchecked(&self, ksp: &ComplexImage) -> ComplexImage {
        let mut out = ksp.clone();
        self.apply_in_place(&mut out);
        out
    }

    fn apply_in_place(&self, ksp: &mut ComplexImage) {
        for (z, &k) in ksp.data_mut().iter_mut().zip(&self.keep) {
            if !k {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }

    fn check_image(&self, img: &ComplexImage) -> Result<()> {
        if img.shape() != self.shape() {
            return Err(SmrdError::ShapeMismatch {
                expected: self.shape(),
                found: img.shape(),
            });
        }
        Ok(())
    }

    fn check_realized(self) -> Result<Self> {
        let realized = self.realized_accel();
        if (realized - self.accel).abs() > ACCEL_TOLERANCE * self.accel + 1e-12 {
            return Err(SmrdError::Mask(format!(
                "realized acceleration {realized:.3} is not within {:.0}% of {}",
                ACCEL_TOLERANCE * 100.0,
                self.accel
            )));
        }
        Ok(self)
    }
}

fn validate_accel(accel: f64) -> Result<()> {
    if !accel.is_finite() || accel < 1.0 {
        return Err(SmrdError::Mask(format!(
            "acceleration {accel} is infeasible: it would need more samples than pixels"
        )));
    }
    Ok(())
}

/// Number of fully sampled center columns for an ACS fraction.
pub fn acs_columns(width: usize, acs_fraction: f64) -> usize {
    // guard against 0.04 * 400 = 16.000000000000004
    ((acs_fraction * width as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Equispaced column positions for a spacing and integer phase offset.
pub fn equispaced_columns(width: usize, spacing: f64, offset: usize) -> Vec<usize> {
    let mut cols = Vec::new();
    for k in 0.. {
        let col = (offset as f64 + k as f64 * spacing).round() as usize;
        if col >= width {
            break;
        }
        cols.push(col);
    }
    cols
}

/// 1D equispaced column undersampling with a centered fully sampled ACS block.
///
/// The column spacing is stretched so that the ACS block plus the equispaced
/// lines together keep about `width / accel` columns.
pub fn make_equispaced_mask(
    height: usize,
    width: usize,
    accel: f64,
    acs_fraction: f64,
    seed: u64,
) -> Result<SamplingMask> {
    validate_accel(accel)?;
    if height == 0 || width == 0 {
        return Err(SmrdError::EmptyShape { height, width });
    }
    if accel > width as f64 {
        return Err(SmrdError::Mask(format!(
            "acceleration {accel} exceeds the number of columns {width}"
        )));
    }
    if !(0.0..1.0).contains(&acs_fraction) {
        return Err(SmrdError::InvalidParameter(format!(
            "acs_fraction must be in [0, 1), got {acs_fraction}"
        )));
    }
    if accel == 1.0 {
        return SamplingMask::full(height, width);
    }

    let acs = acs_columns(width, acs_fraction);
    let target = ((width as f64 / accel).round() as usize).max(1);
    let mut columns = vec![false; width];
    let start = width / 2 - acs / 2;
    columns[start..start + acs].iter_mut().for_each(|c| *c = true);

    if target > acs {
        let spacing = (width - acs) as f64 / (target - acs) as f64;
        // Offsets whose lines (after merging with the ACS block) come closest to the target.
        let kept_with = |offset: usize| {
            let mut cols = columns.clone();
            equispaced_columns(width, spacing, offset)
                .into_iter()
                .for_each(|c| cols[c] = true);
            cols.iter().filter(|&&c| c).count()
        };
        let offsets: Vec<usize> = (0..(spacing.ceil() as usize).max(1)).collect();
        let best = offsets
            .iter()
            .map(|&o| kept_with(o).abs_diff(target))
            .min()
            .unwrap_or(0);
        let candidates: Vec<usize> = offsets
            .into_iter()
            .filter(|&o| kept_with(o).abs_diff(target) == best)
            .collect();
        let mut rng = rng::stream(seed, "equispaced-offset");
        let offset = candidates[rng.random_range(0..candidates.len())];
        for col in equispaced_columns(width, spacing, offset) {
            columns[col] = true;
        }
    }

    let keep = (0..height * width).map(|p| columns[p % width]).collect();
    SamplingMask::new(height, width, keep, accel)?.check_realized()
}

/// A variable-density Poisson-disc mask together with the base radius that produced it.
#[derive(Debug, Clone)]
pub struct PoissonDisc {
    pub mask: SamplingMask,
    pub base_radius: f64,
    pub calib: usize,
}

impl PoissonDisc {
    /// Exclusion radius enforced around a sample placed at `(row, col)`.
    pub fn local_radius(&self, row: usize, col: usize) -> f64 {
        local_radius(self.mask.height, self.mask.width, self.base_radius, row, col)
    }

    pub fn in_calibration(&self, row: usize, col: usize) -> bool {
        in_calib(self.mask.height, self.mask.width, self.calib, row, col)
    }
}

fn local_radius(height: usize, width: usize, base: f64, row: usize, col: usize) -> f64 {
    let dy = (row as f64 - (height / 2) as f64) / (height as f64 / 2.0);
    let dx = (col as f64 - (width / 2) as f64) / (width as f64 / 2.0);
    let d = ((dx * dx + dy * dy) / 2.0).sqrt();
    base * (1.0 + RADIUS_SLOPE * d)
}

fn in_calib(height: usize, width: usize, calib: usize, row: usize, col: usize) -> bool {
    let r0 = height / 2 - calib / 2;
    let c0 = width / 2 - calib / 2;
    (r0..r0 + calib).contains(&row) && (c0..c0 + calib).contains(&col)
}

/// Sequential dart throwing over a fixed random visiting order.
fn throw_darts(height: usize, width: usize, base: f64, calib: usize, order: &[usize]) -> Vec<bool> {
    let mut keep = vec![false; height * width];
    let mut placed = vec![false; height * width];
    for row in 0..height {
        for col in 0..width {
            if in_calib(height, width, calib, row, col) {
                keep[row * width + col] = true;
            }
        }
    }
    for &p in order {
        let (row, col) = (p / width, p % width);
        if keep[p] {
            continue;
        }
        let r = local_radius(height, width, base, row, col);
        let reach = r.ceil() as isize;
        let r2 = r * r;
        let mut free = true;
        'scan: for di in -reach..=reach {
            let i = row as isize + di;
            if i < 0 || i >= height as isize {
                continue;
            }
            for dj in -reach..=reach {
                let j = col as isize + dj;
                if j < 0 || j >= width as isize {
                    continue;
                }
                if placed[i as usize * width + j as usize] && ((di * di + dj * dj) as f64) < r2 {
                    free = false;
                    break 'scan;
                }
            }
        }
        if free {
            keep[p] = true;
            placed[p] = true;
        }
    }
    keep
}

/// Variable-density Poisson-disc mask with a fully kept `calib × calib` center block.
///
/// Bisects the base exclusion radius until the realized acceleration lands within
/// tolerance of `accel`.
pub fn poisson_disc_mask(
    height: usize,
    width: usize,
    accel: f64,
    calib: usize,
    seed: u64,
) -> Result<PoissonDisc> {
    validate_accel(accel)?;
    if height == 0 || width == 0 {
        return Err(SmrdError::EmptyShape { height, width });
    }
    if calib > height.min(width) {
        return Err(SmrdError::Mask(format!(
            "calibration block {calib} exceeds image size {height}x{width}"
        )));
    }
    let total = (height * width) as f64;
    if calib * calib > 0 && total / ((calib * calib) as f64) < accel * (1.0 - ACCEL_TOLERANCE) {
        return Err(SmrdError::Mask(format!(
            "calibration block alone keeps more than 1/{accel} of k-space"
        )));
    }
    if accel == 1.0 {
        return Ok(PoissonDisc {
            mask: SamplingMask::full(height, width)?,
            base_radius: 0.0,
            calib,
        });
    }

    let mut order: Vec<usize> = (0..height * width).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(rng::derive_seed(seed, "poisson-order")));

    let target = total / accel;
    let (mut lo, mut hi) = (0.0, (height.max(width)) as f64);
    let mut best: Option<(f64, Vec<bool>, f64)> = None;
    for _ in 0..MAX_RADIUS_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let keep = throw_darts(height, width, mid, calib, &order);
        let count = keep.iter().filter(|&&k| k).count() as f64;
        let err = ((total / count) - accel).abs() / accel;
        if best.as_ref().is_none_or(|b| err < b.2) {
            best = Some((mid, keep, err));
        }
        if err < 0.01 {
            break;
        }
        if count > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (base_radius, keep, _) = best.expect("at least one bisection step");
    let mask = SamplingMask::new(height, width, keep, accel)?.check_realized()?;
    Ok(PoissonDisc {
        mask,
        base_radius,
        calib,
    })
}

/// 2D variable-density Poisson-disc undersampling mask.
pub fn make_poisson_disc_mask(
    height: usize,
    width: usize,
    accel: f64,
    calib: usize,
    seed: u64,
) -> Result<SamplingMask> {
    poisson_disc_mask(height, width, accel, calib, seed).map(|p| p.mask)
}

/// Per-coil sensitivity maps `S_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilSensitivities {
    maps: CoilStack,
}

impl CoilSensitivities {
    pub fn new(maps: Vec<ComplexImage>) -> Result<Self> {
        Ok(Self {
            maps: CoilStack::new(maps)?,
        })
    }

    /// A single unit-magnitude coil.
    pub fn uniform(height: usize, width: usize) -> Result<Self> {
        Self::new(vec![ComplexImage::new(
            height,
            width,
            vec![Complex64::new(1.0, 0.0); height * width],
        )?])
    }

    pub fn num_coils(&self) -> usize {
        self.maps.num_coils()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.maps.shape()
    }

    pub fn maps(&self) -> &[ComplexImage] {
        self.maps.coils()
    }

    pub fn as_stack(&self) -> &CoilStack {
        &self.maps
    }

    /// Pixelwise `Σ_c |S_c|²`.
    pub fn sum_of_squares(&self) -> Vec<f64> {
        let n = self.maps.coil(0).len();
        let mut sos = vec![0.0; n];
        for m in self.maps.coils() {
            for (s, z) in sos.iter_mut().zip(m.data()) {
                *s += z.norm_sqr();
            }
        }
        sos
    }

    /// Rescales the maps so that `Σ_c |S_c|² = 1` at every pixel.
    pub fn sos_normalized(&self) -> Result<Self> {
        let sos = self.sum_of_squares();
        if sos.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(SmrdError::Numerical(
                "coil maps vanish at some pixel; cannot SOS-normalize".into(),
            ));
        }
        let maps = self
            .maps
            .coils()
            .iter()
            .map(|m| {
                let data = m
                    .data()
                    .iter()
                    .zip(&sos)
                    .map(|(z, s)| z / s.sqrt())
                    .collect();
                ComplexImage::from_parts(m.height(), m.width(), data)
            })
            .collect();
        Ok(Self {
            maps: CoilStack::from_parts(maps),
        })
    }
}

/// Standard deviation and seed of the simulated measurement noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(SmrdError::InvalidParameter(format!(
                "noise sigma must be finite and >= 0, got {sigma}"
            )));
        }
        Ok(Self { sigma, seed })
    }
}

/// `A = Ω F S`.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    sens: CoilSensitivities,
    mask: SamplingMask,
}

impl ForwardModel {
    pub fn new(sens: CoilSensitivities, mask: SamplingMask) -> Result<Self> {
        if sens.shape() != mask.shape() {
            return Err(SmrdError::ShapeMismatch {
                expected: sens.shape(),
                found: mask.shape(),
            });
        }
        Ok(Self { sens, mask })
    }

    pub fn sens(&self) -> &CoilSensitivities {
        &self.sens
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mask.shape()
    }

    pub fn num_coils(&self) -> usize {
        self.sens.num_coils()
    }

    fn check_image(&self, x: &ComplexImage) -> Result<()> {
        self.mask.check_image(x)
    }

    fn check_stack(&self, y: &CoilStack) -> Result<()> {
        if y.num_coils() != self.num_coils() {
            return Err(SmrdError::CoilMismatch {
                expected: self.num_coils(),
                found: y.num_coils(),
            });
        }
        if y.shape() != self.shape() {
            return Err(SmrdError::ShapeMismatch {
                expected: self.shape(),
                found: y.shape(),
            });
        }
        Ok(())
    }

    /// `y_c = Ω ⊙ fft2c(S_c ⊙ x)`.
    pub fn apply_forward(&self, x: &ComplexImage) -> Result<CoilStack> {
        self.check_image(x)?;
        let coils = self
            .sens
            .maps()
            .iter()
            .map(|s| {
                let mut k = fft2c(&s.hadamard(x).expect("shape checked"));
                self.mask.apply_in_place(&mut k);
                k
            })
            .collect();
        Ok(CoilStack::from_parts(coils))
    }

    /// `Σ_c conj(S_c) ⊙ ifft2c(Ω ⊙ y_c)`.
    pub fn apply_adjoint(&self, y: &CoilStack) -> Result<ComplexImage> {
        self.check_stack(y)?;
        let mut out = ComplexImage::zeros_like(y.coil(0));
        for (s, yc) in self.sens.maps().iter().zip(y.coils()) {
            let img = ifft2c(&self.mask.apply_unchecked(yc));
            for ((o, &si), &v) in out.data_mut().iter_mut().zip(s.data()).zip(img.data()) {
                *o += si.conj() * v;
            }
        }
        Ok(out)
    }

    /// `A^H A x` without materializing the coil stack.
    pub fn normal(&self, x: &ComplexImage) -> Result<ComplexImage> {
        self.check_image(x)?;
        let (h, w) = self.shape();
        let mut out = ComplexImage::zeros_like(x);
        let mut buf = vec![Complex64::new(0.0, 0.0); h * w];
        for s in self.sens.maps() {
            for ((b, &si), &xi) in buf.iter_mut().zip(s.data()).zip(x.data()) {
                *b = si * xi;
            }
            centered_in_place(&mut buf, h, w, FftDirection::Forward);
            for (b, &k) in buf.iter_mut().zip(self.mask.keep()) {
                if !k {
                    *b = Complex64::new(0.0, 0.0);
                }
            }
            centered_in_place(&mut buf, h, w, FftDirection::Inverse);
            for ((o, &si), &v) in out.data_mut().iter_mut().zip(s.data()).zip(&buf) {
                *o += si.conj() * v;
            }
        }
        Ok(out)
    }
}

/// Adds complex Gaussian noise at the kept k-space locations.
///
/// Coil `c` draws from its own ChaCha stream (`set_stream(c)`) so the result
/// does not depend on how coils are scheduled.
pub fn add_kspace_noise(y: &CoilStack, mask: &SamplingMask, spec: NoiseSpec) -> Result<CoilStack> {
    if y.shape() != mask.shape() {
        return Err(SmrdError::ShapeMismatch {
            expected: mask.shape(),
            found: y.shape(),
        });
    }
    if spec.sigma == 0.0 {
        return Ok(y.clone());
    }
    let coils = y
        .coils()
        .iter()
        .enumerate()
        .map(|(c, yc)| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng::derive_seed(spec.seed, "kspace-noise"));
            rng.set_stream(c as u64);
            let mut out = yc.clone();
            for (z, &k) in out.data_mut().iter_mut().zip(mask.keep()) {
                if k {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    *z += Complex64::new(spec.sigma * re, spec.sigma * im);
                }
            }
            out
        })
        .collect();
    Ok(CoilStack::from_parts(coils))
}

/// Circular box filter of the mask with a `DENSITY_WINDOW²` window.
fn mask_density(mask: &SamplingMask) -> Vec<f64> {
    let (h, w) = mask.shape();
    let half = (DENSITY_WINDOW / 2) as isize;
    let ones: Vec<f64> = mask.keep().iter().map(|&k| k as u8 as f64).collect();
    let mut rows = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            rows[i * w + j] = (-half..=half)
                .map(|d| ones[i * w + (j as isize + d).rem_euclid(w as isize) as usize])
                .sum();
        }
    }
    let area = (DENSITY_WINDOW * DENSITY_WINDOW) as f64;
    let mut out = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            let s: f64 = (-half..=half)
                .map(|d| rows[(i as isize + d).rem_euclid(h as isize) as usize * w + j])
                .sum();
            out[i * w + j] = s / area;
        }
    }
    out
}

/// Density-compensation weight per k-space location, normalized to 1 at the k-space center.
pub fn density_weights(mask: &SamplingMask) -> Vec<f64> {
    let (h, w) = mask.shape();
    let density = mask_density(mask);
    let center = density[(h / 2) * w + w / 2];
    density
        .iter()
        .map(|&d| if d > 0.0 { center / d } else { 0.0 })
        .collect()
}

/// Scales every kept sample by the reciprocal of the local sampling density.
pub fn density_compensate(y: &CoilStack, mask: &SamplingMask) -> Result<CoilStack> {
    if y.shape() != mask.shape() {
        return Err(SmrdError::ShapeMismatch {
            expected: mask.shape(),
            found: y.shape(),
        });
    }
    let weights = density_weights(mask);
    let coils = y
        .coils()
        .iter()
        .map(|yc| {
            let mut out = yc.clone();
            for ((z, &k), &wgt) in out.data_mut().iter_mut().zip(mask.keep()).zip(&weights) {
                if k {
                    *z *= wgt;
                }
            }
            out
        })
        .collect();
    Ok(CoilStack::from_parts(coils))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::make_synth_coils;
    use crate::numerics::{inner, inner_stack};
    use crate::rng::{self, complex_normal};

    fn random_image(h: usize, w: usize, seed: u64) -> ComplexImage {
        complex_normal(h, w, 1.0, &mut rng::stream(seed, "fwd-test"))
    }

    fn random_stack(coils: usize, h: usize, w: usize, seed: u64) -> CoilStack {
        CoilStack::new((0..coils).map(|c| random_image(h, w, seed * 100 + c as u64)).collect()).unwrap()
    }

    #[test]
    fn equispaced_full_and_exact_counts() {
        let m = make_equispaced_mask(16, 16, 1.0, 0.08, 3).unwrap();
        assert!(m.keep().iter().all(|&k| k));
        let m = make_equispaced_mask(64, 64, 4.0, 0.0, 3).unwrap();
        let cols = (0..64).filter(|&j| m.is_kept(0, j)).count();
        assert_eq!(cols, 16);
        for i in 0..64 {
            for j in 0..64 {
                assert_eq!(m.is_kept(i, j), m.is_kept(0, j));
            }
        }
    }

    #[test]
    fn equispaced_matches_column_enumeration() {
        let (w, accel, acs_frac) = (384usize, 8.0, 0.04);
        for seed in 0..5 {
            let m = make_equispaced_mask(384, w, accel, acs_frac, seed).unwrap();
            // oracle: enumerate ACS block and stretched grid directly
            let acs = (acs_frac * w as f64 - 1e-9).ceil() as usize;
            assert_eq!(acs, 16);
            let target = (w as f64 / accel).round() as usize;
            let spacing = (w - acs) as f64 / (target - acs) as f64;
            let offset = (0..w).find(|&j| m.is_kept(0, j)).unwrap();
            let mut kept = std::collections::BTreeSet::new();
            kept.extend(w / 2 - acs / 2..w / 2 + acs / 2);
            let mut pos = offset as f64;
            while pos.round() < (w as f64) {
                kept.insert(pos.round() as usize);
                pos += spacing;
            }
            let cols = (0..w).filter(|&j| m.is_kept(0, j)).count();
            assert_eq!(cols, kept.len());
            let realized = m.realized_accel();
            assert!((7.2..=8.8).contains(&realized), "realized {realized}");
        }
    }

    #[test]
    fn equispaced_acs_block_is_kept_and_errors() {
        let m = make_equispaced_mask(64, 64, 4.0, 0.08, 1).unwrap();
        for j in 32 - 3..32 + 3 {
            assert!(m.is_kept(10, j));
        }
        assert!((m.realized_accel() - 4.0).abs() <= 0.4);
        assert!(make_equispaced_mask(8, 8, 9.0, 0.0, 0).is_err());
        assert!(make_equispaced_mask(8, 8, 0.5, 0.0, 0).is_err());
        assert!(make_equispaced_mask(8, 8, 2.0, 1.0, 0).is_err());
    }

    #[test]
    fn poisson_full_and_deterministic() {
        let full = make_poisson_disc_mask(32, 32, 1.0, 8, 0).unwrap();
        assert!(full.keep().iter().all(|&k| k));
        let a = make_poisson_disc_mask(64, 64, 12.0, 16, 42).unwrap();
        let b = make_poisson_disc_mask(64, 64, 12.0, 16, 42).unwrap();
        assert_eq!(a, b);
        assert!((a.realized_accel() - 12.0).abs() <= 1.2);
        for i in 24..40 {
            for j in 24..40 {
                assert!(a.is_kept(i, j));
            }
        }
        assert!(make_poisson_disc_mask(32, 32, 0.5, 8, 0).is_err());
        assert!(make_poisson_disc_mask(32, 32, 4.0, 40, 0).is_err());
    }

    #[test]
    fn poisson_pairwise_distances_respect_radius() {
        let pd = poisson_disc_mask(256, 256, 12.0, 16, 7).unwrap();
        assert!((pd.mask.realized_accel() - 12.0).abs() <= 1.2);
        let pts: Vec<(usize, usize)> = (0..256)
            .flat_map(|i| (0..256).map(move |j| (i, j)))
            .filter(|&(i, j)| pd.mask.is_kept(i, j) && !pd.in_calibration(i, j))
            .collect();
        for (a, &(i1, j1)) in pts.iter().enumerate() {
            let r1 = pd.local_radius(i1, j1);
            for &(i2, j2) in &pts[a + 1..] {
                let d = ((i1 as f64 - i2 as f64).powi(2) + (j1 as f64 - j2 as f64).powi(2)).sqrt();
                let bound = r1.min(pd.local_radius(i2, j2));
                assert!(d >= bound, "({i1},{j1})-({i2},{j2}) at {d} < {bound}");
            }
        }
    }

    #[test]
    fn forward_trivial_cases() {
        let x = random_image(8, 8, 1);
        let fm = ForwardModel::new(CoilSensitivities::uniform(8, 8).unwrap(), SamplingMask::full(8, 8).unwrap()).unwrap();
        let y = fm.apply_forward(&x).unwrap();
        assert_eq!(y.coil(0), &fft2c(&x));
        let back = fm.apply_adjoint(&y).unwrap();
        assert!(back.dist_sqr(&ifft2c(y.coil(0))) < 1e-24);
        let zero = fm.apply_forward(&ComplexImage::zeros(8, 8).unwrap()).unwrap();
        assert_eq!(zero.norm_sqr(), 0.0);
    }

    #[test]
    fn forward_matches_composed_oracle() {
        let sens = CoilSensitivities::new(vec![random_image(8, 8, 2), random_image(8, 8, 3)]).unwrap();
        let mask = make_equispaced_mask(8, 8, 2.0, 0.0, 1).unwrap();
        let fm = ForwardModel::new(sens.clone(), mask.clone()).unwrap();
        let x = random_image(8, 8, 4);
        let y = fm.apply_forward(&x).unwrap();
        for c in 0..2 {
            let weighted = ComplexImage::from_fn(8, 8, |i, j| sens.maps()[c].get(i, j) * x.get(i, j)).unwrap();
            // brute-force centered DFT
            let expected = ComplexImage::from_fn(8, 8, |u, v| {
                if !mask.is_kept(u, v) {
                    return Complex64::new(0.0, 0.0);
                }
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..8 {
                    for j in 0..8 {
                        let ph = -2.0 * std::f64::consts::PI
                            * ((u as f64 - 4.0) * (i as f64 - 4.0) + (v as f64 - 4.0) * (j as f64 - 4.0))
                            / 8.0;
                        acc += weighted.get(i, j) * Complex64::from_polar(1.0, ph);
                    }
                }
                acc / 8.0
            })
            .unwrap();
            assert!(y.coil(c).dist_sqr(&expected).sqrt() < 1e-10 * expected.norm());
            for (z, &k) in y.coil(c).data().iter().zip(mask.keep()) {
                if !k {
                    assert_eq!(*z, Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn adjoint_identity_random_trials() {
        for trial in 0..100u64 {
            let n = [8, 12, 16][trial as usize % 3];
            let coils = 1 + trial as usize % 4;
            let sens = make_synth_coils(n, n, coils, trial).unwrap();
            let mask = make_equispaced_mask(n, n, 2.0 + (trial % 3) as f64, 0.0, trial).unwrap();
            let fm = ForwardModel::new(sens, mask).unwrap();
            let x = random_image(n, n, 10_000 + trial);
            let y = random_stack(coils, n, n, 20_000 + trial);
            let ax = fm.apply_forward(&x).unwrap();
            let lhs = inner_stack(&ax, &y).unwrap();
            let rhs = inner(&x, &fm.apply_adjoint(&y).unwrap()).unwrap();
            assert!((lhs - rhs).norm() <= 1e-10 * ax.norm_sqr().sqrt() * y.norm_sqr().sqrt());
        }
    }

    #[test]
    fn normal_operator_is_a_contraction() {
        let n = 32;
        let sens = make_synth_coils(n, n, 4, 1).unwrap();
        let mask = make_equispaced_mask(n, n, 4.0, 0.08, 1).unwrap();
        let fm = ForwardModel::new(sens, mask).unwrap();
        let x = random_image(n, n, 5);
        let y = fm.apply_forward(&x).unwrap();
        assert!(fm.apply_adjoint(&y).unwrap().norm() <= x.norm());
        assert!(fm.normal(&x).unwrap().dist_sqr(&fm.apply_adjoint(&y).unwrap()) < 1e-20);

        // power iteration for the top eigenvalue of A^H A
        let mut v = random_image(n, n, 6);
        let mut lambda = 0.0;
        for _ in 0..200 {
            let av = fm.normal(&v).unwrap();
            lambda = inner(&v, &av).unwrap().re / v.norm_sqr();
            v = av.scaled(1.0 / av.norm());
        }
        assert!(lambda <= 1.0 + 1e-8, "top eigenvalue {lambda}");
        assert!(lambda > 0.5);
    }

    #[test]
    fn operators_are_linear_and_gram_is_psd() {
        let n = 16;
        let fm = ForwardModel::new(
            make_synth_coils(n, n, 3, 2).unwrap(),
            make_poisson_disc_mask(n, n, 3.0, 4, 2).unwrap(),
        )
        .unwrap();
        let (x1, x2) = (random_image(n, n, 1), random_image(n, n, 2));
        let a = Complex64::new(0.5, -2.0);
        let mut combo = x1.clone();
        combo.axpy(a, &x2);
        let lhs = fm.apply_forward(&combo).unwrap();
        let (y1, y2) = (fm.apply_forward(&x1).unwrap(), fm.apply_forward(&x2).unwrap());
        for c in 0..3 {
            let mut rhs = y1.coil(c).clone();
            rhs.axpy(a, y2.coil(c));
            assert!(lhs.coil(c).dist_sqr(&rhs).sqrt() < 1e-12 * rhs.norm().max(1.0));
        }
        for trial in 0..10 {
            let z = random_stack(3, n, n, 50 + trial);
            let aahz = fm.apply_forward(&fm.apply_adjoint(&z).unwrap()).unwrap();
            let q = inner_stack(&z, &aahz).unwrap();
            assert!(q.re >= -1e-10 && q.im.abs() < 1e-10 * q.re.abs().max(1.0));
        }
    }

    #[test]
    fn mask_is_idempotent() {
        let m = make_poisson_disc_mask(32, 32, 4.0, 8, 9).unwrap();
        let k = random_image(32, 32, 3);
        let once = m.apply(&k).unwrap();
        assert_eq!(m.apply(&once).unwrap(), once);
    }

    #[test]
    fn noise_examples() {
        let n = 64;
        let mask = SamplingMask::full(n, n).unwrap();
        let y = random_stack(4, n, n, 8);
        let same = add_kspace_noise(&y, &mask, NoiseSpec::new(0.0, 1).unwrap()).unwrap();
        assert_eq!(same, y);

        let zeros = CoilStack::new(vec![ComplexImage::zeros(n, n).unwrap(); 4]).unwrap();
        let noisy = add_kspace_noise(&zeros, &mask, NoiseSpec::new(0.005, 3).unwrap()).unwrap();
        let vals: Vec<f64> = noisy
            .coils()
            .iter()
            .flat_map(|c| c.data().iter().flat_map(|z| [z.re, z.im]))
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt();
        assert!((std - 0.005).abs() / 0.005 < 0.03, "empirical std {std}");

        let under = make_equispaced_mask(n, n, 4.0, 0.08, 0).unwrap();
        let masked = add_kspace_noise(&zeros, &under, NoiseSpec::new(0.1, 3).unwrap()).unwrap();
        for c in masked.coils() {
            for (z, &k) in c.data().iter().zip(under.keep()) {
                assert_eq!(k, *z != Complex64::new(0.0, 0.0));
            }
        }
        let again = add_kspace_noise(&zeros, &under, NoiseSpec::new(0.1, 3).unwrap()).unwrap();
        assert_eq!(masked, again);
        assert!(NoiseSpec::new(-1.0, 0).is_err());
    }

    #[test]
    fn density_compensation_examples() {
        let n = 64;
        let y = random_stack(2, n, n, 3);
        let full = SamplingMask::full(n, n).unwrap();
        assert_eq!(density_compensate(&y, &full).unwrap(), y);

        let r2 = make_equispaced_mask(n, n, 2.0, 0.0, 0).unwrap();
        let y2 = CoilStack::new(y.coils().iter().map(|c| r2.apply(c).unwrap()).collect()).unwrap();
        let out = density_compensate(&y2, &r2).unwrap();
        let ratios: Vec<f64> = out.coil(0).data().iter().zip(y2.coil(0).data()).zip(r2.keep())
            .filter(|(_, &k)| k)
            .map(|((o, i), _)| (o / i).re)
            .collect();
        assert!(ratios.iter().all(|r| (r - ratios[0]).abs() < 1e-12));

        let pmask = make_poisson_disc_mask(n, n, 4.0, 12, 5).unwrap();
        let yp = CoilStack::new(y.coils().iter().map(|c| pmask.apply(c).unwrap()).collect()).unwrap();
        let out = density_compensate(&yp, &pmask).unwrap();
        let count = |i: usize, j: usize| -> f64 {
            let mut c = 0usize;
            for di in -3i64..=3 {
                for dj in -3i64..=3 {
                    let ii = (i as i64 + di).rem_euclid(n as i64) as usize;
                    let jj = (j as i64 + dj).rem_euclid(n as i64) as usize;
                    c += pmask.is_kept(ii, jj) as usize;
                }
            }
            c as f64
        };
        let center = count(n / 2, n / 2);
        assert_eq!(center, 49.0);
        for i in 0..n {
            for j in 0..n {
                if pmask.is_kept(i, j) {
                    let wgt = center / count(i, j);
                    for c in 0..2 {
                        let expected = yp.coil(c).get(i, j) * wgt;
                        assert!((out.coil(c).get(i, j) - expected).norm() <= 1e-12 * expected.norm().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn shape_mismatches_are_errors() {
        let fm = ForwardModel::new(CoilSensitivities::uniform(8, 8).unwrap(), SamplingMask::full(8, 8).unwrap()).unwrap();
        assert!(fm.apply_forward(&ComplexImage::zeros(8, 4).unwrap()).is_err());
        assert!(fm.apply_adjoint(&random_stack(2, 8, 8, 1)).is_err());
        assert!(ForwardModel::new(CoilSensitivities::uniform(8, 8).unwrap(), SamplingMask::full(4, 8).unwrap()).is_err());
    }
}
