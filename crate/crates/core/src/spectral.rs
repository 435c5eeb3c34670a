//! Fourier basis, windows, segmentation, Welch estimation and circular
//! convolution.
//!
//! DFT conventions: the unitary basis `F_n` has entries
//! `exp(-2iπ l l' / n) / sqrt(n)`. The Welch periodogram uses the
//! unnormalized transform of the windowed segment, so that with a unit-norm
//! window white noise of variance `σ²` has a flat expected PSD equal to `σ²`
//! and a process with circulant covariance `F diag(P) F*` has Welch PSD
//! approximately `P`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psd::Psd;
use crate::signal::Signal;

/// Relative floor applied to Welch outputs: entries are clamped below at
/// `PSD_FLOOR_REL * max(1, max entry)`.
pub const PSD_FLOOR_REL: f64 = 1e-10;

/// Filters with more taps than this are convolved through an `ℓ`-point FFT.
const DIRECT_CONV_MAX_TAPS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct FourierBasis {
    size: usize,
    matrix: Array2<Complex64>,
}

impl FourierBasis {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn matrix(&self) -> ArrayView2<'_, Complex64> {
        self.matrix.view()
    }
}

/// The unitary DFT matrix of size `n`.
pub fn fourier_matrix(n: usize) -> Result<FourierBasis> {
    if n == 0 {
        return Err(Error::InvalidConfig(
            "Fourier basis size must be >= 1".into(),
        ));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let matrix = Array2::from_shape_fn((n, n), |(l, lp)| {
        // reduce the phase index first so large n keeps full precision
        let idx = (l * lp) % n;
        Complex64::from_polar(scale, -2.0 * PI * idx as f64 / n as f64)
    });
    Ok(FourierBasis { size: n, matrix })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Hann,
    Boxcar,
}

impl fmt::Display for WindowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindowKind::Hann => f.write_str("hann"),
            WindowKind::Boxcar => f.write_str("boxcar"),
        }
    }
}

impl FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hann" => Ok(WindowKind::Hann),
            "boxcar" | "rect" | "rectangular" => Ok(WindowKind::Boxcar),
            other => Err(Error::InvalidConfig(format!("unknown window `{other}`"))),
        }
    }
}

/// Window taps with unit ℓ₂ norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralWindow {
    taps: Vec<f64>,
}

impl SpectralWindow {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }
}

pub fn make_window(kind: WindowKind, f: usize) -> Result<SpectralWindow> {
    if f == 0 {
        return Err(Error::InvalidConfig("window length must be >= 1".into()));
    }
    // A single tap has exactly one unit-norm choice; the periodic Hann of
    // length one would be identically zero.
    if f == 1 {
        return Ok(SpectralWindow { taps: vec![1.0] });
    }
    let raw: Vec<f64> = match kind {
        WindowKind::Boxcar => vec![1.0; f],
        WindowKind::Hann => (0..f)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / f as f64).cos())
            .collect(),
    };
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(SpectralWindow {
        taps: raw.into_iter().map(|v| v / norm).collect(),
    })
}

/// Segment size, hop and taper for Welch estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WelchConfigRepr")]
pub struct WelchConfig {
    filter_size: usize,
    stride: usize,
    window: WindowKind,
}

#[derive(Deserialize)]
struct WelchConfigRepr {
    filter_size: usize,
    stride: usize,
    window: WindowKind,
}

impl TryFrom<WelchConfigRepr> for WelchConfig {
    type Error = Error;

    fn try_from(r: WelchConfigRepr) -> Result<Self> {
        WelchConfig::new(r.filter_size, r.stride, r.window)
    }
}

impl WelchConfig {
    pub fn new(filter_size: usize, stride: usize, window: WindowKind) -> Result<Self> {
        if filter_size == 0 {
            return Err(Error::InvalidConfig("filter size must be >= 1".into()));
        }
        if stride == 0 || stride > filter_size {
            return Err(Error::InvalidConfig(format!(
                "stride must lie in [1, {filter_size}], got {stride}"
            )));
        }
        Ok(Self {
            filter_size,
            stride,
            window,
        })
    }

    /// Hann window with 50% overlap.
    pub fn with_filter_size(filter_size: usize) -> Result<Self> {
        Self::new(filter_size, default_stride(filter_size), WindowKind::Hann)
    }

    pub fn filter_size(&self) -> usize {
        self.filter_size
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn window(&self) -> WindowKind {
        self.window
    }

    /// Number of full segments that fit in `length` samples.
    pub fn segment_count(&self, length: usize) -> Result<usize> {
        if length < self.filter_size {
            return Err(Error::LengthTooShort {
                length,
                filter_size: self.filter_size,
            });
        }
        Ok((length - self.filter_size) / self.stride + 1)
    }
}

pub fn default_stride(filter_size: usize) -> usize {
    (filter_size / 2).max(1)
}

/// Splits `x` into `c x f` segments starting every `stride` samples.
/// Trailing samples that do not fill a segment are dropped.
pub fn segment(x: &Signal, cfg: &WelchConfig) -> Result<Vec<Signal>> {
    let count = cfg.segment_count(x.len())?;
    let f = cfg.filter_size();
    Ok((0..count)
        .map(|k| {
            let start = k * cfg.stride();
            Signal::from_trusted(x.data().slice(ndarray::s![.., start..start + f]).to_owned())
        })
        .collect())
}

/// A Welch PSD together with bookkeeping useful for reports.
#[derive(Debug, Clone, PartialEq)]
pub struct WelchEstimate {
    pub psd: Psd,
    pub segments: usize,
    pub floor: f64,
    /// Number of entries raised to the floor.
    pub clamped: usize,
}

pub fn welch_psd(x: &Signal, cfg: &WelchConfig) -> Result<Psd> {
    welch_estimate(x, cfg).map(|e| e.psd)
}

pub fn welch_estimate(x: &Signal, cfg: &WelchConfig) -> Result<WelchEstimate> {
    let segments = cfg.segment_count(x.len())?;
    let f = cfg.filter_size();
    let stride = cfg.stride();
    let window = make_window(cfg.window(), f)?;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(f);

    let c = x.channels();
    let mut values = Array2::<f64>::zeros((c, f));
    let mut buf = vec![Complex64::new(0.0, 0.0); segments * f];
    for m in 0..c {
        let row = x.row(m);
        for (k, chunk) in buf.chunks_exact_mut(f).enumerate() {
            let start = k * stride;
            for (n, slot) in chunk.iter_mut().enumerate() {
                *slot = Complex64::new(window.taps[n] * row[start + n], 0.0);
            }
        }
        // processes every length-f chunk of the buffer
        fft.process(&mut buf);
        let mut out = values.row_mut(m);
        for chunk in buf.chunks_exact(f) {
            for (acc, z) in out.iter_mut().zip(chunk) {
                *acc += z.norm_sqr();
            }
        }
        out /= segments as f64;
    }

    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("Welch estimate"));
    }
    let max = values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let floor = PSD_FLOOR_REL * max.max(1.0);
    let mut clamped = 0;
    values.mapv_inplace(|v| {
        if v < floor {
            clamped += 1;
            floor
        } else {
            v
        }
    });
    Ok(WelchEstimate {
        psd: Psd::from_trusted(values),
        segments,
        floor,
        clamped,
    })
}

/// Row-wise circular convolution:
/// `out[m, n] = Σ_{k<f} h[m, k] · x[m, (n - k) mod ℓ]`.
pub fn circular_convolve(x: &Signal, h: ArrayView2<'_, f64>) -> Result<Signal> {
    check_filter(x, h)?;
    if h.ncols() <= DIRECT_CONV_MAX_TAPS {
        Ok(convolve_direct(x, h))
    } else {
        Ok(convolve_fft(x, h))
    }
}

/// Row-wise circular convolution with each filter row read as one period of
/// a zero-phase filter: tap `k` acts at lag `k` for `k < f/2` and at lag
/// `k - f` for `k > f/2`; for even `f` the tap at `f/2` is split evenly
/// between lags `±f/2`.
///
/// Coincides with [`circular_convolve`] when `f = ℓ`. For `f < ℓ` the
/// `ℓ`-point frequency response is the real trigonometric interpolant of the
/// filter's `f`-point DFT, whereas causal placement of the same taps would
/// add a frequency-dependent phase and distort the magnitude between bins.
pub fn zero_phase_convolve(x: &Signal, h: ArrayView2<'_, f64>) -> Result<Signal> {
    check_filter(x, h)?;
    let (c, l) = x.shape();
    let f = h.ncols();
    let mut out = Array2::<f64>::zeros((c, l));
    for m in 0..c {
        let xs = x.row(m).to_vec();
        let taps = h.row(m);
        let mut row = out.row_mut(m);
        let mut add = |lag: isize, weight: f64| {
            if weight == 0.0 {
                return;
            }
            // y[n] += weight * x[(n - lag) mod l]
            let shift = lag.rem_euclid(l as isize) as usize;
            for n in 0..shift {
                row[n] += weight * xs[l + n - shift];
            }
            for n in shift..l {
                row[n] += weight * xs[n - shift];
            }
        };
        for k in 0..f {
            let hk = taps[k];
            if 2 * k < f {
                add(k as isize, hk);
            } else if 2 * k == f {
                add(k as isize, 0.5 * hk);
                add(-(k as isize), 0.5 * hk);
            } else {
                add(k as isize - f as isize, hk);
            }
        }
    }
    Ok(Signal::from_trusted(out))
}

fn check_filter(x: &Signal, h: ArrayView2<'_, f64>) -> Result<()> {
    if h.nrows() != x.channels() {
        return Err(Error::ChannelMismatch {
            expected: x.channels(),
            actual: h.nrows(),
        });
    }
    if h.ncols() == 0 {
        return Err(Error::EmptyInput("filter has no taps"));
    }
    if h.ncols() > x.len() {
        return Err(Error::FilterLongerThanSignal {
            taps: h.ncols(),
            length: x.len(),
        });
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("filter"));
    }
    Ok(())
}

pub(crate) fn convolve_direct(x: &Signal, h: ArrayView2<'_, f64>) -> Signal {
    let (c, l) = x.shape();
    let f = h.ncols();
    let mut out = Array2::<f64>::zeros((c, l));
    for m in 0..c {
        let xs = x.row(m);
        let xs = xs
            .as_slice()
            .map(|s| s.to_vec())
            .unwrap_or_else(|| xs.to_vec());
        let taps = h.row(m);
        let mut row = out.row_mut(m);
        for k in 0..f {
            let hk = taps[k];
            if hk == 0.0 {
                continue;
            }
            // n >= k reads x[n - k]; n < k wraps to x[l + n - k]
            for n in 0..k {
                row[n] += hk * xs[l + n - k];
            }
            for n in k..l {
                row[n] += hk * xs[n - k];
            }
        }
    }
    Signal::from_trusted(out)
}

pub(crate) fn convolve_fft(x: &Signal, h: ArrayView2<'_, f64>) -> Signal {
    let (c, l) = x.shape();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(l);
    let inv = planner.plan_fft_inverse(l);
    let mut out = Array2::<f64>::zeros((c, l));
    let mut xb = vec![Complex64::new(0.0, 0.0); l];
    let mut hb = vec![Complex64::new(0.0, 0.0); l];
    for m in 0..c {
        for (slot, &v) in xb.iter_mut().zip(x.row(m)) {
            *slot = Complex64::new(v, 0.0);
        }
        hb.fill(Complex64::new(0.0, 0.0));
        for (slot, &v) in hb.iter_mut().zip(h.row(m)) {
            *slot = Complex64::new(v, 0.0);
        }
        fwd.process(&mut xb);
        fwd.process(&mut hb);
        for (a, b) in xb.iter_mut().zip(&hb) {
            *a *= b;
        }
        inv.process(&mut xb);
        for (dst, z) in out.row_mut(m).iter_mut().zip(&xb) {
            *dst = z.re / l as f64;
        }
    }
    Signal::from_trusted(out)
}

/// Per-channel temporal mean.
pub fn channel_mean(x: &Signal) -> Vec<f64> {
    x.data()
        .rows()
        .into_iter()
        .map(|r| r.sum() / r.len() as f64)
        .collect()
}

/// Removes the per-channel temporal mean.
pub fn center(x: &Signal) -> Signal {
    let mean = channel_mean(x);
    subtract_mean(x, &mean)
}

pub(crate) fn subtract_mean(x: &Signal, mean: &[f64]) -> Signal {
    let mut data = x.data().to_owned();
    for (mut row, &mu) in data.rows_mut().into_iter().zip(mean) {
        row -= mu;
    }
    Signal::from_trusted(data)
}
