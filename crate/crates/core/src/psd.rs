//! Per-channel power spectral densities.

use ndarray::{Array2, ArrayView1, ArrayView2, Zip};

use crate::error::{Error, Result};

/// A `channels x bins` matrix of strictly positive spectral power.
///
/// Bin `k` (zero-based) holds the power at frequency `k / bins` cycles per
/// sample. For real signals bins `k` and `bins - k` carry the same power.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    values: Array2<f64>,
}

impl Psd {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (c, f) = values.dim();
        if c == 0 || f == 0 {
            return Err(Error::EmptyInput("PSD has an empty dimension"));
        }
        if let Some(&bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::NonPositivePsd(bad));
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let c = rows.len();
        if c == 0 {
            return Err(Error::EmptyInput("PSD has no channels"));
        }
        let f = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != f) {
            return Err(Error::ShapeMismatch {
                expected: (c, f),
                actual: (c, bad.len()),
            });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values =
            Array2::from_shape_vec((c, f), flat).map_err(|e| Error::Format(e.to_string()))?;
        Self::new(values)
    }

    /// The flat unit spectrum, i.e. unit-variance white noise on every channel.
    pub fn ones(channels: usize, bins: usize) -> Result<Self> {
        Self::new(Array2::ones((channels, bins)))
    }

    pub(crate) fn from_trusted(values: Array2<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite() && *v > 0.0));
        Self { values }
    }

    pub fn channels(&self) -> usize {
        self.values.nrows()
    }

    pub fn bins(&self) -> usize {
        self.values.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn row(&self, channel: usize) -> ArrayView1<'_, f64> {
        self.values.row(channel)
    }

    pub fn get(&self, channel: usize, bin: usize) -> f64 {
        self.values[[channel, bin]]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(f64::MIN, |m, &v| m.max(v))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    /// Elementwise square root, the coordinates in which the Bures geometry
    /// of commuting covariances becomes Euclidean.
    pub fn sqrt(&self) -> Array2<f64> {
        self.values.mapv(f64::sqrt)
    }

    pub(crate) fn from_sqrt(root: Array2<f64>) -> Self {
        Self::from_trusted(root.mapv(|r| r * r))
    }

    pub fn ensure_shape(&self, other: &Psd) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                actual: other.shape(),
            });
        }
        Ok(())
    }

    /// Largest `|P[m,k] - P[m, bins-k]|` over all channels and bins.
    pub fn symmetry_defect(&self) -> f64 {
        let f = self.bins();
        let mut worst = 0.0_f64;
        for row in self.values.rows() {
            for k in 1..f {
                worst = worst.max((row[k] - row[f - k]).abs());
            }
        }
        worst
    }

    /// Arithmetic mean of a list of equally shaped PSDs.
    pub fn arithmetic_mean(psds: &[Psd]) -> Result<Psd> {
        let first = psds
            .first()
            .ok_or(Error::EmptyInput("no PSDs to average"))?;
        let mut acc = Array2::<f64>::zeros(first.shape());
        for p in psds {
            first.ensure_shape(p)?;
            Zip::from(&mut acc).and(&p.values).for_each(|a, &v| *a += v);
        }
        acc /= psds.len() as f64;
        Ok(Psd::from_trusted(acc))
    }
}

/// Zero-based index of the conjugate-symmetric partner of bin `k` among `bins`.
pub fn mirror_bin(k: usize, bins: usize) -> usize {
    (bins - k % bins) % bins
}
