use crate::error::{Error, Result};
use crate::geometry::{wasserstein_barycenter, BarycenterState};
use crate::layers::{Batch, Mode};
use crate::monge::{apply_mapping, monge_filter};
use crate::psd::Psd;
use crate::spectral::{channel_mean, subtract_mean, welch_psd, WelchConfig};

pub const DEFAULT_FILTER_SIZE: usize = 5;
pub const DEFAULT_MOMENTUM: f64 = 1e-2;

/// Normalization layer that maps every sample's PSD onto a running
/// Bures-Wasserstein barycenter.
///
/// In training mode each forward call estimates one PSD per sample, folds
/// their barycenter into the running barycenter, then maps each sample toward
/// the updated barycenter. Evaluation mode skips the update and never mutates
/// the layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdNormLayer {
    welch: WelchConfig,
    barycenter: BarycenterState,
    mode: Mode,
}

/// Everything computed during one forward call.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub output: Batch,
    pub means: Vec<Vec<f64>>,
    pub psds: Vec<Psd>,
    /// Barycenter of this batch's PSDs; `None` in eval mode.
    pub batch_barycenter: Option<Psd>,
    /// Barycenter the samples were mapped onto.
    pub target: Psd,
}

impl PsdNormLayer {
    /// Hann-windowed Welch estimation with 50% overlap at `filter_size` bins.
    pub fn new(filter_size: usize, momentum: f64) -> Result<Self> {
        Self::with_welch(WelchConfig::with_filter_size(filter_size)?, momentum)
    }

    pub fn with_welch(welch: WelchConfig, momentum: f64) -> Result<Self> {
        Ok(Self {
            welch,
            barycenter: BarycenterState::empty(momentum)?,
            mode: Mode::Train,
        })
    }

    pub fn from_parts(welch: WelchConfig, barycenter: BarycenterState, mode: Mode) -> Result<Self> {
        if let Some(p) = barycenter.value() {
            if p.bins() != welch.filter_size() {
                return Err(Error::ShapeMismatch {
                    expected: (p.channels(), welch.filter_size()),
                    actual: p.shape(),
                });
            }
        }
        Ok(Self {
            welch,
            barycenter,
            mode,
        })
    }

    /// Replaces the running barycenter, e.g. with the unit PSD to obtain
    /// per-channel whitening.
    pub fn with_barycenter(self, value: Psd) -> Result<Self> {
        let state = BarycenterState::with_value(value, self.barycenter.momentum())?;
        Self::from_parts(self.welch, state, self.mode)
    }

    pub fn filter_size(&self) -> usize {
        self.welch.filter_size()
    }

    pub fn momentum(&self) -> f64 {
        self.barycenter.momentum()
    }

    pub fn welch(&self) -> &WelchConfig {
        &self.welch
    }

    pub fn state(&self) -> &BarycenterState {
        &self.barycenter
    }

    pub fn barycenter(&self) -> Option<&Psd> {
        self.barycenter.value()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn forward(&mut self, batch: &Batch) -> Result<Batch> {
        self.forward_detailed(batch).map(|pass| pass.output)
    }

    /// Runs one forward pass. The layer is left untouched if any step fails.
    pub fn forward_detailed(&mut self, batch: &Batch) -> Result<ForwardPass> {
        if self.mode == Mode::Eval && self.barycenter.is_empty() {
            return Err(Error::EvalWithoutBarycenter);
        }
        let (means, psds) = self.estimate(batch)?;

        let (state, batch_barycenter) = match self.mode {
            Mode::Train => {
                let bary = wasserstein_barycenter(&psds)?;
                (self.barycenter.running_update(&bary)?, Some(bary))
            }
            Mode::Eval => (self.barycenter.clone(), None),
        };
        let target = state.value().cloned().ok_or(Error::EvalWithoutBarycenter)?;
        // a stored barycenter may come from a state file with another shape
        target.ensure_shape(&psds[0])?;

        let output = batch
            .iter()
            .zip(psds.iter().zip(&means))
            .map(|(x, (psd, mean))| {
                let filter = monge_filter(psd, &target)?;
                apply_mapping(x, &filter, mean)
            })
            .collect::<Result<Vec<_>>>()?;

        if self.mode == Mode::Train {
            self.barycenter = state;
        }
        Ok(ForwardPass {
            output: Batch::new(output)?,
            means,
            psds,
            batch_barycenter,
            target,
        })
    }

    /// Per-sample channel means and PSDs of the centered samples.
    pub fn estimate(&self, batch: &Batch) -> Result<(Vec<Vec<f64>>, Vec<Psd>)> {
        let mut means = Vec::with_capacity(batch.len());
        let mut psds = Vec::with_capacity(batch.len());
        for x in batch {
            let mean = channel_mean(x);
            psds.push(welch_psd(&subtract_mean(x, &mean), &self.welch)?);
            means.push(mean);
        }
        Ok((means, psds))
    }
}

/// Filter sizes for `count` stacked layers starting at `first`, halving with
/// floor rounding and never dropping below one tap.
pub fn halved_filter_sizes(first: usize, count: usize) -> Vec<usize> {
    std::iter::successors(Some(first.max(1)), |&f| Some((f / 2).max(1)))
        .take(count)
        .collect()
}

/// A sequence of PSDNorm layers applied one after another.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdNormStack {
    layers: Vec<PsdNormLayer>,
}

#[derive(Debug, Clone)]
pub struct StageSnapshot {
    pub filter_size: usize,
    pub barycenter: Option<Psd>,
    /// Welch PSDs of the stage outputs at the stage's own resolution.
    pub output_psds: Vec<Psd>,
    pub output: Batch,
}

#[derive(Debug, Clone)]
pub struct StackOutput {
    pub output: Batch,
    pub stages: Vec<StageSnapshot>,
}

impl PsdNormStack {
    pub fn new(filter_sizes: &[usize], momentum: f64) -> Result<Self> {
        let layers = filter_sizes
            .iter()
            .map(|&f| PsdNormLayer::new(f, momentum))
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    pub fn from_layers(layers: Vec<PsdNormLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::EmptyInput("PSDNorm stack"));
        }
        if layers
            .windows(2)
            .any(|w| w[1].filter_size() > w[0].filter_size())
        {
            return Err(Error::InvalidConfig(
                "stacked filter sizes must be non-increasing".into(),
            ));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[PsdNormLayer] {
        &self.layers
    }

    pub fn set_mode(&mut self, mode: Mode) {
        for layer in &mut self.layers {
            layer.set_mode(mode);
        }
    }

    pub fn forward(&mut self, batch: &Batch) -> Result<StackOutput> {
        let mut layers = self.layers.clone();
        let mut current = batch.clone();
        let mut stages = Vec::with_capacity(layers.len());
        for layer in &mut layers {
            current = layer.forward(&current)?;
            let output_psds = current
                .iter()
                .map(|x| welch_psd(x, layer.welch()))
                .collect::<Result<Vec<_>>>()?;
            stages.push(StageSnapshot {
                filter_size: layer.filter_size(),
                barycenter: layer.barycenter().cloned(),
                output_psds,
                output: current.clone(),
            });
        }
        self.layers = layers;
        Ok(StackOutput {
            output: current,
            stages,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::instancenorm_forward;
    use crate::signal::Signal;
    use crate::spectral::{center, WindowKind};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_batch(rng: &mut ChaCha8Rng, n: usize, c: usize, l: usize) -> Batch {
        Batch::new(
            (0..n)
                .map(|_| {
                    let offset = rng.random_range(-3.0..3.0);
                    Signal::new(Array2::from_shape_fn((c, l), |_| {
                        offset + rng.random_range(-1.0..1.0)
                    }))
                    .unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn fresh_layer_single_sample_only_centers() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = random_batch(&mut rng, 1, 2, 128);
        let mut layer = PsdNormLayer::new(8, DEFAULT_MOMENTUM).unwrap();
        let out = layer.forward(&batch).unwrap();
        let centered = center(&batch.samples()[0]);
        for (a, b) in out.samples()[0].data().iter().zip(centered.data()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(layer.state().update_count(), 1);
    }

    #[test]
    fn eval_requires_barycenter_and_is_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = random_batch(&mut rng, 3, 2, 64);
        let mut layer = PsdNormLayer::new(5, 0.1).unwrap();
        layer.set_mode(Mode::Eval);
        assert!(matches!(
            layer.forward(&batch),
            Err(Error::EvalWithoutBarycenter)
        ));

        layer.set_mode(Mode::Train);
        layer.forward(&batch).unwrap();
        layer.set_mode(Mode::Eval);
        let before = layer.clone();
        let a = layer.forward(&batch).unwrap();
        let b = layer.forward(&batch).unwrap();
        assert_eq!(a, b);
        assert_eq!(layer, before);
    }

    #[test]
    fn outputs_are_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut layer = PsdNormLayer::new(5, 0.5).unwrap();
        for _ in 0..3 {
            let batch = random_batch(&mut rng, 4, 3, 100);
            for y in layer.forward(&batch).unwrap().samples() {
                for row in y.data().rows() {
                    assert!((row.sum() / row.len() as f64).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn train_maps_toward_updated_barycenter() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut layer = PsdNormLayer::new(4, 0.25).unwrap();
        layer.forward(&random_batch(&mut rng, 2, 1, 64)).unwrap();
        let prior = layer.barycenter().unwrap().clone();
        let pass = layer
            .forward_detailed(&random_batch(&mut rng, 2, 1, 64))
            .unwrap();
        let expected = BarycenterState::with_value(prior, 0.25)
            .unwrap()
            .running_update(pass.batch_barycenter.as_ref().unwrap())
            .unwrap();
        assert_eq!(Some(&pass.target), expected.value());
        assert_eq!(layer.barycenter(), expected.value());
    }

    #[test]
    fn unit_barycenter_single_tap_is_instancenorm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let batch = random_batch(&mut rng, 3, 2, 40);
        let welch = WelchConfig::new(1, 1, WindowKind::Boxcar).unwrap();
        let mut layer = PsdNormLayer::with_welch(welch, DEFAULT_MOMENTUM)
            .unwrap()
            .with_barycenter(Psd::ones(2, 1).unwrap())
            .unwrap();
        layer.set_mode(Mode::Eval);
        let ours = layer.forward(&batch).unwrap();
        let reference = instancenorm_forward(&batch, 0.0).unwrap();
        for (a, b) in ours.iter().zip(reference.iter()) {
            for (u, v) in a.data().iter().zip(b.data()) {
                assert!((u - v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shape_and_length_errors() {
        let mut layer = PsdNormLayer::new(8, 0.1)
            .unwrap()
            .with_barycenter(Psd::ones(3, 8).unwrap())
            .unwrap();
        let batch = Batch::new(vec![Signal::zeros(2, 32).unwrap()]).unwrap();
        assert!(matches!(
            layer.forward(&batch),
            Err(Error::ShapeMismatch { .. })
        ));
        let short = Batch::new(vec![Signal::zeros(3, 4).unwrap()]).unwrap();
        assert!(matches!(
            layer.forward(&short),
            Err(Error::LengthTooShort { .. })
        ));
        assert!(PsdNormLayer::new(8, 0.1)
            .unwrap()
            .with_barycenter(Psd::ones(3, 4).unwrap())
            .is_err());
    }

    #[test]
    fn halving_schedule() {
        assert_eq!(halved_filter_sizes(5, 3), vec![5, 2, 1]);
        assert_eq!(halved_filter_sizes(16, 4), vec![16, 8, 4, 2]);
        assert_eq!(halved_filter_sizes(1, 2), vec![1, 1]);
    }

    #[test]
    fn stack_validates_and_records_stages() {
        assert!(PsdNormStack::new(&[2, 4], 0.1).is_err());
        assert!(PsdNormStack::new(&[], 0.1).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let batch = random_batch(&mut rng, 2, 2, 64);
        let mut stack = PsdNormStack::new(&[5, 3, 2], DEFAULT_MOMENTUM).unwrap();
        let out = stack.forward(&batch).unwrap();
        assert_eq!(out.stages.len(), 3);
        assert_eq!(
            out.stages.iter().map(|s| s.filter_size).collect::<Vec<_>>(),
            vec![5, 3, 2]
        );
        assert_eq!(out.stages[2].output, out.output);
        assert!(stack.layers().iter().all(|l| l.state().update_count() == 1));
    }
}
