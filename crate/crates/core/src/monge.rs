//! f-Monge mapping: the optimal transport map between centered Gaussians with
//! circulant covariances, realized as a per-channel circular filter.

pub mod dense;

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::psd::Psd;
use crate::signal::Signal;
use crate::spectral::{subtract_mean, zero_phase_convolve};

/// Upper bound on the power ratio `P_tgt / P_src` used to build a filter.
pub const MAX_POWER_RATIO: f64 = 1e6;

/// Largest imaginary part tolerated when synthesizing a real filter.
pub const MAX_IMAG_RESIDUAL: f64 = 1e-6;

/// A `channels x taps` bank of real zero-phase filters.
#[derive(Debug, Clone, PartialEq)]
pub struct MongeFilter {
    coefficients: Array2<f64>,
    max_imag_residual: f64,
}

impl MongeFilter {
    pub fn channels(&self) -> usize {
        self.coefficients.nrows()
    }

    pub fn taps(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn coefficients(&self) -> ArrayView2<'_, f64> {
        self.coefficients.view()
    }

    /// Largest imaginary part discarded during synthesis.
    pub fn max_imag_residual(&self) -> f64 {
        self.max_imag_residual
    }

    /// One line per channel, comma separated taps.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.coefficients.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }
}

/// Builds the filter mapping a signal with PSD `p_src` onto `p_tgt`:
/// the inverse unitary DFT of `sqrt(p_tgt / p_src) / sqrt(f)` per channel.
pub fn monge_filter(p_src: &Psd, p_tgt: &Psd) -> Result<MongeFilter> {
    p_src.ensure_shape(p_tgt)?;
    let (c, f) = p_src.shape();
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(f);
    let mut coefficients = Array2::<f64>::zeros((c, f));
    let mut buf = vec![Complex64::new(0.0, 0.0); f];
    let mut residual = 0.0_f64;
    for m in 0..c {
        for (k, slot) in buf.iter_mut().enumerate() {
            let ratio = (p_tgt.get(m, k) / p_src.get(m, k)).min(MAX_POWER_RATIO);
            *slot = Complex64::new(ratio.sqrt(), 0.0);
        }
        // unnormalized inverse transform: Σ_k r_k exp(+2iπkn/f)
        ifft.process(&mut buf);
        for (dst, z) in coefficients.row_mut(m).iter_mut().zip(&buf) {
            *dst = z.re / f as f64;
            residual = residual.max((z.im / f as f64).abs());
        }
    }
    if residual > MAX_IMAG_RESIDUAL {
        return Err(Error::ImagLeakage { residual });
    }
    Ok(MongeFilter {
        coefficients,
        max_imag_residual: residual,
    })
}

/// Centers `x` with the given per-channel `mean` and convolves with `filter`,
/// reading its taps as one period of a zero-phase filter (see
/// [`zero_phase_convolve`]).
pub fn apply_mapping(x: &Signal, filter: &MongeFilter, mean: &[f64]) -> Result<Signal> {
    if filter.channels() != x.channels() {
        return Err(Error::ChannelMismatch {
            expected: x.channels(),
            actual: filter.channels(),
        });
    }
    if mean.len() != x.channels() {
        return Err(Error::ChannelMismatch {
            expected: x.channels(),
            actual: mean.len(),
        });
    }
    if mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("mean"));
    }
    let centered = subtract_mean(x, mean);
    zero_phase_convolve(&centered, filter.coefficients())
}
