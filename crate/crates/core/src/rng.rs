//! Seeded random streams.
//!
//! Every stochastic quantity in a run is drawn from a ChaCha stream whose seed
//! is derived from the run seed and a purpose label, so adding or removing one
//! consumer never perturbs the draws of another.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::numerics::ComplexImage;

/// Derives a sub-seed from `(seed, label)`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// A ChaCha stream for `(seed, label)`.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label))
}

/// Complex Gaussian image whose real and imaginary parts are i.i.d. `N(0, std²)`.
pub fn complex_normal<R: rand::Rng + ?Sized>(
    height: usize,
    width: usize,
    std: f64,
    rng: &mut R,
) -> ComplexImage {
    let data = (0..height * width)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(std * re, std * im)
        })
        .collect();
    ComplexImage::from_parts(height, width, data)
}

/// Standard complex normal `CN(0, 1)`: unit expected squared modulus per entry.
pub fn standard_complex_normal<R: rand::Rng + ?Sized>(
    height: usize,
    width: usize,
    rng: &mut R,
) -> ComplexImage {
    complex_normal(height, width, std::f64::consts::FRAC_1_SQRT_2, rng)
}
