//! Synthetic ground-truth images.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Result, SmrdError};
use crate::numerics::ComplexImage;
use crate::rng;

/// Modified Shepp-Logan ellipses: `(intensity, a, b, x0, y0, phi_degrees)`.
pub const SHEPP_LOGAN: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
];

const MIN_SIZE: usize = 16;
const BLOB_GRID: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    SheppLogan,
    BlobGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomPhase {
    None,
    /// Low-order polynomial phase `π (a x + b y + c x y)`.
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub size: usize,
    pub phase: PhantomPhase,
}

impl FromStr for PhantomKind {
    type Err = SmrdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shepp_logan" => Ok(Self::SheppLogan),
            "blob_grid" => Ok(Self::BlobGrid),
            other => Err(SmrdError::Config(format!("unknown phantom kind '{other}'"))),
        }
    }
}

impl PhantomKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::SheppLogan => "shepp_logan",
            Self::BlobGrid => "blob_grid",
        }
    }
}

impl FromStr for PhantomPhase {
    type Err = SmrdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "smooth" => Ok(Self::Smooth),
            other => Err(SmrdError::Config(format!("unknown phantom phase '{other}'"))),
        }
    }
}

impl PhantomPhase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Smooth => "smooth",
        }
    }
}

/// Normalized coordinate of pixel index `k` on an `n`-point axis spanning [−1, 1].
pub fn axis_coord(k: usize, n: usize) -> f64 {
    let half = (n as f64 - 1.0) / 2.0;
    (k as f64 - half) / half
}

fn shepp_logan_value(x: f64, y: f64) -> f64 {
    SHEPP_LOGAN
        .iter()
        .filter(|&&(_, a, b, x0, y0, phi)| {
            let (s, c) = (phi * PI / 180.0).sin_cos();
            let (dx, dy) = (x - x0, y - y0);
            let u = dx * c + dy * s;
            let v = dy * c - dx * s;
            u * u / (a * a) + v * v / (b * b) <= 1.0
        })
        .map(|e| e.0)
        .sum()
}

fn blob_grid(size: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, "blob-grid");
    let amps: Vec<f64> = (0..BLOB_GRID * BLOB_GRID)
        .map(|_| r.random_range(0.3..1.0))
        .collect();
    let width = 0.35 / BLOB_GRID as f64;
    let mut out = vec![0.0; size * size];
    for i in 0..size {
        let y = -axis_coord(i, size);
        for j in 0..size {
            let x = axis_coord(j, size);
            let mut v = 0.0;
            for (k, amp) in amps.iter().enumerate() {
                let cx = -0.75 + 0.5 * (k % BLOB_GRID) as f64;
                let cy = -0.75 + 0.5 * (k / BLOB_GRID) as f64;
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                v += amp * (-d2 / (2.0 * width * width)).exp();
            }
            out[i * size + j] = v;
        }
    }
    out
}

/// Ground-truth image with unit maximum magnitude.
pub fn make_phantom(spec: &PhantomSpec, seed: u64) -> Result<ComplexImage> {
    let n = spec.size;
    if n < MIN_SIZE {
        return Err(SmrdError::InvalidParameter(format!(
            "phantom size must be >= {MIN_SIZE}, got {n}"
        )));
    }
    let mut magnitude = match spec.kind {
        PhantomKind::SheppLogan => {
            let mut v = vec![0.0; n * n];
            for i in 0..n {
                let y = -axis_coord(i, n);
                for j in 0..n {
                    v[i * n + j] = shepp_logan_value(axis_coord(j, n), y);
                }
            }
            v
        }
        PhantomKind::BlobGrid => blob_grid(n, seed),
    };
    let peak = magnitude.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    magnitude.iter_mut().for_each(|v| *v /= peak);

    let coeffs = match spec.phase {
        PhantomPhase::None => None,
        PhantomPhase::Smooth => {
            let mut r = rng::stream(seed, "phantom-phase");
            Some([
                r.random_range(-0.5..0.5),
                r.random_range(-0.5..0.5),
                r.random_range(-0.5..0.5),
            ])
        }
    };
    ComplexImage::from_fn(n, n, |i, j| {
        let m = magnitude[i * n + j];
        match coeffs {
            None => Complex64::new(m, 0.0),
            Some([a, b, c]) => {
                let (x, y) = (axis_coord(j, n), -axis_coord(i, n));
                Complex64::from_polar(m, PI * (a * x + b * y + c * x * y))
            }
        }
    })
}

/// Separable Gaussian blur with standard deviation `sigma` pixels; the kernel
/// is truncated at 3σ and renormalized near the borders. `sigma = 0` copies.
pub fn gaussian_blur(x: &ComplexImage, sigma: f64) -> Result<ComplexImage> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(SmrdError::InvalidParameter(format!("blur sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let (h, w) = x.shape();
    let pass = |src: &ComplexImage, along_rows: bool| {
        ComplexImage::from_fn(h, w, |i, j| {
            let (mut acc, mut norm) = (Complex64::new(0.0, 0.0), 0.0);
            for (k, &g) in kernel.iter().enumerate() {
                let d = k as isize - radius;
                let (ii, jj) = if along_rows { (i as isize, j as isize + d) } else { (i as isize + d, j as isize) };
                if ii >= 0 && jj >= 0 && (ii as usize) < h && (jj as usize) < w {
                    acc += src.get(ii as usize, jj as usize) * g;
                    norm += g;
                }
            }
            acc / norm
        })
    };
    pass(&pass(x, true)?, false)
}
