use crate::error::{Error, Result};
use crate::geometry::wasserstein_barycenter;
use crate::layers::Batch;
use crate::monge::{apply_mapping, monge_filter};
use crate::psd::Psd;
use crate::signal::Signal;
use crate::spectral::{channel_mean, subtract_mean, welch_psd, WelchConfig};

/// Temporal Monge alignment: a fixed preprocessing map of raw signals onto
/// the barycenter PSD of a reference corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct TmaAligner {
    barycenter: Psd,
    welch: WelchConfig,
}

impl TmaAligner {
    /// Estimates the PSD of every centered signal across all `domains` and
    /// stores their Wasserstein barycenter.
    pub fn fit(domains: &[Batch], welch: WelchConfig) -> Result<Self> {
        if domains.is_empty() {
            return Err(Error::EmptyInput("TMA corpus"));
        }
        let psds = domains
            .iter()
            .flat_map(|b| b.iter())
            .map(|x| welch_psd(&subtract_mean(x, &channel_mean(x)), &welch))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            barycenter: wasserstein_barycenter(&psds)?,
            welch,
        })
    }

    pub fn from_barycenter(barycenter: Psd, welch: WelchConfig) -> Result<Self> {
        if barycenter.bins() != welch.filter_size() {
            return Err(Error::ShapeMismatch {
                expected: (barycenter.channels(), welch.filter_size()),
                actual: barycenter.shape(),
            });
        }
        Ok(Self { barycenter, welch })
    }

    pub fn barycenter(&self) -> &Psd {
        &self.barycenter
    }

    pub fn welch(&self) -> &WelchConfig {
        &self.welch
    }

    pub fn transform(&self, x: &Signal) -> Result<Signal> {
        let mean = channel_mean(x);
        let psd = welch_psd(&subtract_mean(x, &mean), &self.welch)?;
        self.barycenter.ensure_shape(&psd)?;
        let filter = monge_filter(&psd, &self.barycenter)?;
        apply_mapping(x, &filter, &mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{center, WindowKind};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_signal_corpus_is_identity_up_to_centering() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Signal::new(Array2::from_shape_fn((2, 96), |_| {
            rng.random_range(0.0..2.0)
        }))
        .unwrap();
        let tma = TmaAligner::fit(
            &[Batch::new(vec![x.clone()]).unwrap()],
            WelchConfig::with_filter_size(8).unwrap(),
        )
        .unwrap();
        let y = tma.transform(&x).unwrap();
        for (a, b) in y.data().iter().zip(center(&x).data()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn scalar_psds_scale_toward_barycenter() {
        // f = 1 with a boxcar: each PSD is the signal's variance
        let a = Signal::from_rows(&[vec![1.0, -1.0, 1.0, -1.0]]).unwrap(); // P = 1
        let b = Signal::from_rows(&[vec![3.0, -3.0, 3.0, -3.0]]).unwrap(); // Q = 9
        let welch = WelchConfig::new(1, 1, WindowKind::Boxcar).unwrap();
        let tma = TmaAligner::fit(
            &[
                Batch::new(vec![a.clone()]).unwrap(),
                Batch::new(vec![b]).unwrap(),
            ],
            welch,
        )
        .unwrap();
        let (p, q) = (1.0_f64, 9.0_f64);
        let bary = ((p.sqrt() + q.sqrt()) / 2.0).powi(2);
        assert!((tma.barycenter().get(0, 0) - bary).abs() < 1e-12);
        let gain = (bary / p).sqrt();
        let y = tma.transform(&a).unwrap();
        for (u, v) in y.row(0).iter().zip(a.row(0)) {
            assert!((u - gain * v).abs() < 1e-12);
        }
    }

    #[test]
    fn errors() {
        let welch = WelchConfig::with_filter_size(4).unwrap();
        assert!(matches!(
            TmaAligner::fit(&[], welch),
            Err(Error::EmptyInput(_))
        ));
        let a = Batch::new(vec![Signal::zeros(1, 16).unwrap()]).unwrap();
        let b = Batch::new(vec![Signal::zeros(2, 16).unwrap()]).unwrap();
        assert!(matches!(
            TmaAligner::fit(&[a.clone(), b], welch),
            Err(Error::ShapeMismatch { .. })
        ));
        let tma = TmaAligner::fit(&[a], welch).unwrap();
        assert!(tma.transform(&Signal::zeros(2, 16).unwrap()).is_err());
    }
}
