//! Co-evolutionary elitist training of semi-supervised GANs.
//!
//! Two panmictic populations (generators and discriminators) evolve under a
//! (μ+λ) scheme whose variation operator is a few epochs of ordinary SSL-GAN
//! training of a randomly paired generator/discriminator couple. The crate
//! also carries the single-pair baseline trainer, the synthetic RING and BLOB
//! Gaussian-mixture datasets, and the evaluation metrics (classification
//! accuracy, exact empirical 1-Wasserstein distance, Fréchet distance).
//!
//! Everything here is `no_std` + `alloc`; file formats, configuration and the
//! command line live in the `cesslgan` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod assignment;
pub mod coevo;
pub mod data;
mod error;
pub mod gradcheck;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod sslgan;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use rng::RngStream;
