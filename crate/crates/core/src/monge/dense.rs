//! Dense reference implementation of the Gaussian Monge map.
//!
//! Materializes each channel's `ℓ x ℓ` circulant covariance and evaluates
//! `A = Σs^{-1/2} (Σs^{1/2} Σt Σs^{1/2})^{1/2} Σs^{-1/2}` by symmetric
//! eigendecomposition. Cubic in `ℓ`; meant for verifying the filter path,
//! not for production use.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::psd::Psd;
use crate::signal::Signal;
use crate::spectral::channel_mean;

pub const MAX_DENSE_LENGTH: usize = 64;

/// Real circulant covariance `F diag(p) F*` for one channel's PSD row.
/// Only the conjugate-symmetric part of `p` contributes to the real matrix.
pub fn circulant_covariance(p: &[f64]) -> DMatrix<f64> {
    let n = p.len();
    let autocov: Vec<f64> = (0..n)
        .map(|lag| {
            p.iter()
                .enumerate()
                .map(|(k, &pk)| pk * (2.0 * PI * ((k * lag) % n) as f64 / n as f64).cos())
                .sum::<f64>()
                / n as f64
        })
        .collect();
    DMatrix::from_fn(n, n, |a, b| autocov[(a + n - b) % n])
}

fn spectral_fn(m: &DMatrix<f64>, g: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let vals = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| g(l.max(0.0))),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Monge map matrix between `N(0, Σs)` and `N(0, Σt)`.
pub fn gaussian_monge_matrix(cov_src: &DMatrix<f64>, cov_tgt: &DMatrix<f64>) -> DMatrix<f64> {
    let s_half = spectral_fn(cov_src, f64::sqrt);
    let s_inv_half = spectral_fn(cov_src, |l| 1.0 / l.sqrt());
    let middle = spectral_fn(&(&s_half * cov_tgt * &s_half), f64::sqrt);
    &s_inv_half * middle * &s_inv_half
}

/// Applies the dense Monge map channel by channel to the centered `x`.
/// Both PSDs must have as many bins as `x` has samples.
pub fn dense_monge_oracle(p_src: &Psd, p_tgt: &Psd, x: &Signal) -> Result<Signal> {
    p_src.ensure_shape(p_tgt)?;
    let (c, l) = x.shape();
    if l > MAX_DENSE_LENGTH {
        return Err(Error::TooLargeForDense {
            length: l,
            max: MAX_DENSE_LENGTH,
        });
    }
    if p_src.shape() != (c, l) {
        return Err(Error::ShapeMismatch {
            expected: (c, l),
            actual: p_src.shape(),
        });
    }
    let mean = channel_mean(x);
    let mut out = Array2::<f64>::zeros((c, l));
    for (m, &mu) in mean.iter().enumerate() {
        let src = circulant_covariance(&p_src.row(m).to_vec());
        let tgt = circulant_covariance(&p_tgt.row(m).to_vec());
        let a = gaussian_monge_matrix(&src, &tgt);
        let v = DVector::from_iterator(l, x.row(m).iter().map(|&s| s - mu));
        let y = a * v;
        for (dst, &val) in out.row_mut(m).iter_mut().zip(y.iter()) {
            *dst = val;
        }
    }
    Signal::new(out)
}
