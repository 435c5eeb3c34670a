//! Spectral alignment of multichannel time series.
//!
//! Signals are modeled as centered Gaussians whose covariance is circulant
//! per channel, so each channel is summarized by a power spectral density.
//! The crate estimates PSDs with Welch's method, averages them with the
//! closed-form Bures-Wasserstein barycenter, and aligns signals to a target
//! PSD with short zero-phase convolution filters (f-Monge mapping). On top of
//! that it provides the stateful PSDNorm layer, the TMA preprocessor,
//! moment-based baselines, a synthetic domain-shift benchmark and a CLI.

pub mod bench;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod io;
pub mod layers;
pub mod monge;
pub mod psd;
pub mod signal;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use psd::Psd;
pub use signal::Signal;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
