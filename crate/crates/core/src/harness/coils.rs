//! Synthetic receiver-coil sensitivity maps.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Result, SmrdError};
use crate::forward::CoilSensitivities;
use crate::numerics::ComplexImage;
use crate::rng;

/// Gaussian lobe standard deviation in normalized FOV units ([−1, 1] per axis).
pub const DEFAULT_LOBE_WIDTH: f64 = 0.6;
/// Distance of each lobe center from the FOV center, in normalized units.
const LOBE_RADIUS: f64 = 1.0;

/// Normalized `(x, y)` center of coil `c` out of `coils`, with `y` pointing up.
pub fn coil_center(c: usize, coils: usize) -> (f64, f64) {
    let theta = 2.0 * PI * c as f64 / coils as f64;
    (LOBE_RADIUS * theta.cos(), LOBE_RADIUS * theta.sin())
}

fn norm_coord(k: usize, n: usize) -> f64 {
    (k as f64 - (n / 2) as f64) / (n as f64 / 2.0)
}

/// SOS-normalized Gaussian-lobe coil maps with smooth per-coil phase.
pub fn make_synth_coils(height: usize, width: usize, coils: usize, seed: u64) -> Result<CoilSensitivities> {
    make_synth_coils_with_width(height, width, coils, DEFAULT_LOBE_WIDTH, seed)
}

pub fn make_synth_coils_with_width(
    height: usize,
    width: usize,
    coils: usize,
    lobe_width: f64,
    seed: u64,
) -> Result<CoilSensitivities> {
    if coils == 0 {
        return Err(SmrdError::InvalidParameter("need at least one coil".into()));
    }
    if !(lobe_width > 0.0) {
        return Err(SmrdError::InvalidParameter(format!(
            "lobe width must be positive, got {lobe_width}"
        )));
    }
    let mut r = rng::stream(seed, "coil-phase");
    let maps = (0..coils)
        .map(|c| {
            let (cx, cy) = coil_center(c, coils);
            let theta = 2.0 * PI * c as f64 / coils as f64;
            let (a, b): (f64, f64) = (r.random_range(-0.5..0.5), r.random_range(-0.5..0.5));
            ComplexImage::from_fn(height, width, |i, j| {
                let x = norm_coord(j, width);
                let y = -norm_coord(i, height);
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                let mag = (-d2 / (2.0 * lobe_width * lobe_width)).exp();
                Complex64::from_polar(mag, theta + PI * (a * x + b * y))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    CoilSensitivities::new(maps)?.sos_normalized()
}
