//! Block-distributed deblurring of large images.
//!
//! The crate splits a blurred observation into overlapping blocks, deblurs the
//! blocks in parallel with Douglas-Rachford splitting under a restricted
//! consensus constraint on shared pixels, and blends the local estimates into a
//! single crisp image. It also provides the centralized (whole-image) and
//! independent (per-block, no coupling) baselines the distributed method is
//! compared against.
//!
//! Module map:
//! - [`image`]: dense 2D fields, rectangular regions, chop/embed operators.
//! - [`psf`]: Airy-disk and anisotropic Gaussian point-spread functions.
//! - [`blur`]: FFT valid-region blur operators and the shift-variant composite.
//! - [`layout`]: block geometry, interpolation weights, overlap bookkeeping.
//! - [`objective`]: weighted least squares + Huber regularizer with gradients.
//! - [`solver`]: bound-constrained limited-memory quasi-Newton minimizer.
//! - [`consensus`]: the Douglas-Rachford outer loop and its backends.
//! - [`transport`]: in-process and TCP message passing for halo exchange.
//! - [`metrics`]: SNR and SSIM image quality scores.

pub mod blur;
pub mod consensus;
pub mod error;
pub mod image;
pub mod io;
pub mod layout;
pub mod metrics;
pub mod objective;
pub mod psf;
pub mod rng;
pub mod solver;
pub mod transport;

mod fft;

pub use error::{CoreError, Result};
pub use image::{Image, Region};
