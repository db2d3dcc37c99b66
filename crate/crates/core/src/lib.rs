//! SURE-tuned diffusion-style MRI reconstruction.
//!
//! A multicoil Cartesian forward model, analytic score priors, an annealed
//! Langevin sampler with a CG data-consistency step, and a controller that
//! tunes the regularization weight and stops early by minimizing a
//! Monte-Carlo SURE estimate of the reconstruction error.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod forward;
pub mod harness;
pub mod metrics;
pub mod numerics;
pub mod prior;
pub mod rng;
pub mod sampler;
pub mod sure;

pub use error::{Result, SmrdError};
