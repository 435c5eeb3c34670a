//! Gaussian periodic signals with prescribed PSDs and shifted multi-domain
//! corpora.
//!
//! Random streams: signal `i` of a domain with seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(splitmix64(s ^ splitmix64(i)))`, and channel `m`
//! of that signal uses ChaCha stream `m`. Every signal's noise is therefore
//! independent of how many signals are generated or in which order, so
//! parallel generation is bit-identical to serial generation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psd::Psd;
use crate::signal::Signal;

/// Identifies the random source in reports.
pub const GENERATOR: &str =
    "ChaCha8Rng; signal seed = splitmix64(domain_seed ^ splitmix64(index)); stream = channel";

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th child stream derived from `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

/// Generating spectrum and sampling parameters of one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    psd: Psd,
    n_signals: usize,
    length: usize,
    seed: u64,
}

impl DomainSpec {
    pub fn new(psd: Psd, n_signals: usize, length: usize, seed: u64) -> Result<Self> {
        if n_signals == 0 {
            return Err(Error::InvalidConfig(
                "a domain needs at least one signal".into(),
            ));
        }
        if length < psd.bins() {
            return Err(Error::LengthTooShort {
                length,
                filter_size: psd.bins(),
            });
        }
        Ok(Self {
            psd,
            n_signals,
            length,
            seed,
        })
    }

    pub fn psd(&self) -> &Psd {
        &self.psd
    }

    pub fn n_signals(&self) -> usize {
        self.n_signals
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Amplitude response on `length` bins obtained by linear interpolation of
/// `sqrt(psd_row)` over the circular frequency index.
pub fn interpolate_sqrt_psd(psd_row: &[f64], length: usize) -> Vec<f64> {
    let f = psd_row.len();
    let roots: Vec<f64> = psd_row.iter().map(|p| p.sqrt()).collect();
    (0..length)
        .map(|k| {
            let pos = (k * f) as f64 / length as f64;
            let lo = pos.floor();
            let t = pos - lo;
            let i0 = lo as usize % f;
            let i1 = (i0 + 1) % f;
            (1.0 - t) * roots[i0] + t * roots[i1]
        })
        .collect()
}

/// Draws `spec.n_signals` signals whose covariance is circulant with the
/// interpolated PSD.
pub fn sample_gaussian_with_psd(spec: &DomainSpec) -> Vec<Signal> {
    let amplitude: Vec<Vec<f64>> = (0..spec.psd.channels())
        .map(|m| interpolate_sqrt_psd(&spec.psd.row(m).to_vec(), spec.length))
        .collect();
    (0..spec.n_signals)
        .into_par_iter()
        .map(|i| colored_noise(&amplitude, spec.length, derive_seed(spec.seed, i as u64)))
        .collect()
}

fn colored_noise(amplitude: &[Vec<f64>], length: usize, seed: u64) -> Signal {
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(length);
    let inv = planner.plan_fft_inverse(length);
    let mut data = Array2::<f64>::zeros((amplitude.len(), length));
    let mut buf = vec![Complex64::new(0.0, 0.0); length];
    for (m, amp) in amplitude.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(m as u64);
        for slot in buf.iter_mut() {
            *slot = Complex64::new(StandardNormal.sample(&mut rng), 0.0);
        }
        fwd.process(&mut buf);
        for (z, &a) in buf.iter_mut().zip(amp) {
            *z *= a;
        }
        inv.process(&mut buf);
        for (dst, z) in data.row_mut(m).iter_mut().zip(&buf) {
            *dst = z.re / length as f64;
        }
    }
    Signal::from_trusted(data)
}

/// Shape of a base spectrum for synthetic corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasePreset {
    /// Unit power on every bin.
    Flat,
    /// Power decaying as `1 / (1 + |k|)` in folded frequency, unit mean.
    #[default]
    Pink,
}

impl fmt::Display for BasePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasePreset::Flat => "flat",
            BasePreset::Pink => "pink",
        })
    }
}

impl FromStr for BasePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(BasePreset::Flat),
            "pink" => Ok(BasePreset::Pink),
            other => Err(Error::InvalidConfig(format!("unknown base PSD `{other}`"))),
        }
    }
}

pub fn base_psd(preset: BasePreset, channels: usize, bins: usize) -> Result<Psd> {
    if channels == 0 || bins == 0 {
        return Err(Error::EmptyInput("base PSD shape"));
    }
    let row: Vec<f64> = match preset {
        BasePreset::Flat => vec![1.0; bins],
        BasePreset::Pink => {
            let raw: Vec<f64> = (0..bins)
                .map(|k| 1.0 / (1.0 + k.min(bins - k) as f64))
                .collect();
            let mean = raw.iter().sum::<f64>() / bins as f64;
            raw.into_iter().map(|v| v / mean).collect()
        }
    };
    Psd::from_rows(&vec![row; channels])
}

/// Sampling parameters shared by all domains of a shifted corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusParams {
    pub n_signals: usize,
    pub length: usize,
    pub seed: u64,
}

/// `k` domains whose PSDs are `base` multiplied by `exp(s · t_d · cos(2πν))`,
/// with tilt coefficients `t_d` evenly spaced in `[-1, 1]` and `ν` the
/// normalized frequency of each bin. Domain `d` samples with seed
/// `derive_seed(params.seed, d)`.
pub fn make_shifted_domains(
    base: &Psd,
    k: usize,
    shift_strength: f64,
    params: &CorpusParams,
) -> Result<Vec<DomainSpec>> {
    if k < 2 {
        return Err(Error::InvalidConfig("need at least two domains".into()));
    }
    if !(shift_strength >= 0.0 && shift_strength.is_finite()) {
        return Err(Error::ParameterOutOfRange {
            name: "shift_strength",
            value: shift_strength,
        });
    }
    let (c, f) = base.shape();
    (0..k)
        .map(|d| {
            let tilt = -1.0 + 2.0 * d as f64 / (k - 1) as f64;
            let values = Array2::from_shape_fn((c, f), |(m, b)| {
                let phase = (2.0 * PI * b as f64 / f as f64).cos();
                base.get(m, b) * (shift_strength * tilt * phase).exp()
            });
            DomainSpec::new(
                Psd::new(values)?,
                params.n_signals,
                params.length,
                derive_seed(params.seed, d as u64),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::bures_distance;

    #[test]
    fn interpolation_hits_grid_and_is_symmetric() {
        let row = [4.0, 1.0, 0.25, 1.0];
        let amp = interpolate_sqrt_psd(&row, 16);
        assert_eq!(amp[0], 2.0);
        assert_eq!(amp[4], 1.0);
        assert_eq!(amp[8], 0.5);
        assert!((amp[2] - 1.5).abs() < 1e-15);
        for k in 1..16 {
            assert!((amp[k] - amp[16 - k]).abs() < 1e-15);
        }
        // same grid: identity
        assert_eq!(interpolate_sqrt_psd(&row, 4), vec![2.0, 1.0, 0.5, 1.0]);
    }

    #[test]
    fn generation_is_deterministic_and_order_free() {
        let spec = DomainSpec::new(base_psd(BasePreset::Pink, 2, 8).unwrap(), 3, 256, 42).unwrap();
        let a = sample_gaussian_with_psd(&spec);
        let b = sample_gaussian_with_psd(&spec);
        assert_eq!(a, b);
        // the i-th signal does not depend on how many are drawn
        let fewer = DomainSpec::new(spec.psd().clone(), 1, 256, 42).unwrap();
        assert_eq!(sample_gaussian_with_psd(&fewer)[0], a[0]);
        assert_ne!(a[0], a[1]);
        assert_ne!(a[0].row(0), a[0].row(1));
    }

    #[test]
    fn domain_spec_validation() {
        let p = Psd::ones(1, 8).unwrap();
        assert!(DomainSpec::new(p.clone(), 0, 64, 0).is_err());
        assert!(matches!(
            DomainSpec::new(p, 1, 4, 0),
            Err(Error::LengthTooShort { .. })
        ));
    }

    #[test]
    fn shifted_domains() {
        let params = CorpusParams {
            n_signals: 2,
            length: 64,
            seed: 1,
        };
        let base = Psd::ones(1, 8).unwrap();
        let same = make_shifted_domains(&base, 3, 0.0, &params).unwrap();
        for d in &same {
            assert_eq!(bures_distance(d.psd(), same[0].psd()).unwrap(), 0.0);
        }
        assert_ne!(same[0].seed(), same[1].seed());

        let shifted = make_shifted_domains(&base, 3, 0.5, &params).unwrap();
        assert_eq!(shifted.len(), 3);
        let mut last = 0.0;
        for s in [0.25, 0.5, 1.0, 2.0] {
            let ds = make_shifted_domains(&base, 2, s, &params).unwrap();
            let d = bures_distance(ds[0].psd(), ds[1].psd()).unwrap();
            assert!(d > last);
            last = d;
        }
        assert!(make_shifted_domains(&base, 1, 0.5, &params).is_err());
        assert!(make_shifted_domains(&base, 2, -1.0, &params).is_err());
    }

    #[test]
    fn presets() {
        let pink = base_psd(BasePreset::Pink, 2, 8).unwrap();
        let mean = pink.values().sum() / 16.0;
        assert!((mean - 1.0).abs() < 1e-12);
        assert_eq!(pink.symmetry_defect(), 0.0);
        assert!(pink.get(0, 0) > pink.get(0, 4));
        assert_eq!(
            base_psd(BasePreset::Flat, 1, 3).unwrap(),
            Psd::ones(1, 3).unwrap()
        );
    }
}
