//! Hybrid quantum-classical Wasserstein GAN anomaly detection.
//!
//! The crate is split along the pipeline:
//!
//! - [`qsim`]: dense statevector simulation of the generator circuits, Pauli-Z
//!   readout (exact or shot-sampled) and circuit Jacobians.
//! - [`nn`]: small dense networks with hand-written backpropagation and Adam.
//! - [`gan`]: classical and quantum generators, the critic, WGAN-GP losses and
//!   the alternating training loop.
//! - [`anogan`]: per-sample latent optimization, anomaly scores and threshold
//!   calibration.
//! - [`data`]: CSV ingestion, min-max normalization, splits and synthetic data.
//! - [`eval`]: confusion counts, F1 and bootstrap confidence intervals.

pub mod anogan;
pub mod data;
pub mod error;
pub mod eval;
pub mod gan;
pub mod nn;
pub mod qsim;
pub mod rng;

pub use error::{Error, Result};
