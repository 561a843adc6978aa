//! Reconstruction of saturated samples of band-limited signals.
//!
//! The crate fits the unsaturated neighbors of each clipped sample with the
//! minimum-norm interpolant of a bandpass reproducing-kernel space and
//! resamples the fit where saturation occurred. Around that core it ships an
//! OFDM baseband link (QAM, IDFT, cyclic prefix), channel impairments
//! (clipping, AWGN, insertion loss, ADC quantization) and a seeded
//! Monte-Carlo harness that measures the bit-error-ratio gain.

pub mod channel;
pub mod declip;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod linalg;
pub mod ofdm;
pub mod presets;
pub mod qam;
pub mod reconstruct;
pub mod streamio;

pub use error::{Error, Result};
