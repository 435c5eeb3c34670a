//! Multichannel real-valued time series.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// A `channels x length` real matrix, one row per sensor or feature channel.
///
/// Construction rejects empty shapes and non-finite samples, so every
/// `Signal` in circulation is safe to feed to the spectral routines.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    data: Array2<f64>,
}

impl Signal {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (c, l) = data.dim();
        if c == 0 {
            return Err(Error::EmptyInput("signal has no channels"));
        }
        if l == 0 {
            return Err(Error::EmptyInput("signal has no samples"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("signal"));
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let c = rows.len();
        if c == 0 {
            return Err(Error::EmptyInput("signal has no channels"));
        }
        let l = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != l) {
            return Err(Error::ShapeMismatch {
                expected: (c, l),
                actual: (c, bad.len()),
            });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data =
            Array2::from_shape_vec((c, l), flat).map_err(|e| Error::Format(e.to_string()))?;
        Self::new(data)
    }

    pub fn zeros(channels: usize, length: usize) -> Result<Self> {
        Self::new(Array2::zeros((channels, length)))
    }

    /// Wraps data already known to be finite and non-empty.
    pub(crate) fn from_trusted(data: Array2<f64>) -> Self {
        debug_assert!(data.nrows() > 0 && data.ncols() > 0);
        Self { data }
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn row(&self, channel: usize) -> ArrayView1<'_, f64> {
        self.data.row(channel)
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Returns `self * factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.data * factor)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.rows().into_iter().map(|r| r.to_vec()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_degenerate_shapes_and_nan() {
        assert!(Signal::new(Array2::zeros((0, 4))).is_err());
        assert!(Signal::new(Array2::zeros((2, 0))).is_err());
        assert!(matches!(
            Signal::new(array![[1.0, f64::NAN]]),
            Err(Error::NonFiniteInput(_))
        ));
        assert!(Signal::new(array![[1.0, f64::INFINITY]]).is_err());
    }

    #[test]
    fn from_rows_checks_ragged_input() {
        let err = Signal::from_rows(&[vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
        let s = Signal::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(s.shape(), (2, 2));
        assert_eq!(s.to_rows()[1], vec![3.0, 4.0]);
    }
}
