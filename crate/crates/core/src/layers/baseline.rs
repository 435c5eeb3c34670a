//! Moment-based normalizers used as baselines. Affine parameters are fixed
//! configuration values; nothing here is trained.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::layers::{Batch, Mode};
use crate::signal::Signal;

pub const DEFAULT_BN_EPS: f64 = 1e-5;
pub const DEFAULT_BN_MOMENTUM: f64 = 0.1;

fn standardize(v: f64, mean: f64, var: f64, eps: f64) -> f64 {
    let denom = (var + eps).sqrt();
    // a constant channel with eps = 0 would give 0/0
    if denom == 0.0 {
        0.0
    } else {
        (v - mean) / denom
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::ParameterOutOfRange {
            name: "eps",
            value: eps,
        });
    }
    Ok(())
}

fn mean_var<'a>(values: impl Iterator<Item = &'a f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Per-sample, per-channel standardization with biased variance.
pub fn instancenorm_forward(batch: &Batch, eps: f64) -> Result<Batch> {
    check_eps(eps)?;
    let out = batch
        .iter()
        .map(|x| {
            let mut data = x.data().to_owned();
            for mut row in data.rows_mut() {
                let (mean, var) = mean_var(row.iter());
                row.mapv_inplace(|v| standardize(v, mean, var, eps));
            }
            Signal::new(data)
        })
        .collect::<Result<Vec<_>>>()?;
    Batch::new(out)
}

/// Per-sample standardization over all channels and time steps jointly.
pub fn layernorm_forward(batch: &Batch, eps: f64) -> Result<Batch> {
    check_eps(eps)?;
    let (c, l) = batch.shape();
    if c * l < 2 {
        return Err(Error::InvalidConfig(
            "layer norm needs at least two entries per sample".into(),
        ));
    }
    let out = batch
        .iter()
        .map(|x| {
            let data = x.data();
            let (mean, var) = mean_var(data.iter());
            Signal::new(data.mapv(|v| standardize(v, mean, var, eps)))
        })
        .collect::<Result<Vec<_>>>()?;
    Batch::new(out)
}

/// Batch normalization with fixed affine parameters and exponential moving
/// averages of the batch statistics.
///
/// Running statistics start from mean 0 and variance 1 and count as
/// initialized once at least one training batch has been folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormLayer {
    gamma: Vec<f64>,
    beta: Vec<f64>,
    eps: f64,
    stat_momentum: f64,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
    tracked_batches: u64,
    mode: Mode,
}

impl BatchNormLayer {
    /// Identity affine parameters, default eps and momentum.
    pub fn new(channels: usize) -> Result<Self> {
        Self::with_params(
            vec![1.0; channels],
            vec![0.0; channels],
            DEFAULT_BN_EPS,
            DEFAULT_BN_MOMENTUM,
        )
    }

    pub fn with_params(
        gamma: Vec<f64>,
        beta: Vec<f64>,
        eps: f64,
        stat_momentum: f64,
    ) -> Result<Self> {
        let c = gamma.len();
        Self::restore(
            gamma,
            beta,
            eps,
            stat_momentum,
            vec![0.0; c],
            vec![1.0; c],
            0,
        )
    }

    /// Rebuilds a layer from persisted fields.
    pub fn restore(
        gamma: Vec<f64>,
        beta: Vec<f64>,
        eps: f64,
        stat_momentum: f64,
        running_mean: Vec<f64>,
        running_var: Vec<f64>,
        tracked_batches: u64,
    ) -> Result<Self> {
        let c = gamma.len();
        if c == 0 {
            return Err(Error::EmptyInput("batch norm channels"));
        }
        for len in [beta.len(), running_mean.len(), running_var.len()] {
            if len != c {
                return Err(Error::ChannelMismatch {
                    expected: c,
                    actual: len,
                });
            }
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::ParameterOutOfRange {
                name: "eps",
                value: eps,
            });
        }
        if !(0.0..=1.0).contains(&stat_momentum) {
            return Err(Error::ParameterOutOfRange {
                name: "stat_momentum",
                value: stat_momentum,
            });
        }
        if let Some(&v) = running_var.iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::ParameterOutOfRange {
                name: "running_var",
                value: v,
            });
        }
        Ok(Self {
            gamma,
            beta,
            eps,
            stat_momentum,
            running_mean,
            running_var,
            tracked_batches,
            mode: Mode::Train,
        })
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn stat_momentum(&self) -> f64 {
        self.stat_momentum
    }

    pub fn running_mean(&self) -> &[f64] {
        &self.running_mean
    }

    pub fn running_var(&self) -> &[f64] {
        &self.running_var
    }

    pub fn tracked_batches(&self) -> u64 {
        self.tracked_batches
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Pooled per-channel mean and biased variance over batch and time.
    pub fn batch_statistics(batch: &Batch) -> (Vec<f64>, Vec<f64>) {
        let (c, l) = batch.shape();
        let count = (batch.len() * l) as f64;
        let mut mean = vec![0.0; c];
        for x in batch {
            for (m, row) in x.data().rows().into_iter().enumerate() {
                mean[m] += row.sum();
            }
        }
        mean.iter_mut().for_each(|v| *v /= count);
        let mut var = vec![0.0; c];
        for x in batch {
            for (m, row) in x.data().rows().into_iter().enumerate() {
                var[m] += row
                    .iter()
                    .map(|v| (v - mean[m]) * (v - mean[m]))
                    .sum::<f64>();
            }
        }
        var.iter_mut().for_each(|v| *v /= count);
        (mean, var)
    }

    pub fn forward(&mut self, batch: &Batch) -> Result<Batch> {
        let (c, l) = batch.shape();
        if c != self.channels() {
            return Err(Error::ChannelMismatch {
                expected: self.channels(),
                actual: c,
            });
        }
        let (mean, var) = match self.mode {
            Mode::Train => {
                if batch.len() * l < 2 {
                    return Err(Error::InvalidConfig(
                        "batch norm training needs at least two values per channel".into(),
                    ));
                }
                let (mean, var) = Self::batch_statistics(batch);
                let m = self.stat_momentum;
                for ch in 0..c {
                    self.running_mean[ch] = (1.0 - m) * self.running_mean[ch] + m * mean[ch];
                    self.running_var[ch] = (1.0 - m) * self.running_var[ch] + m * var[ch];
                }
                self.tracked_batches += 1;
                (mean, var)
            }
            Mode::Eval => {
                if self.tracked_batches == 0 {
                    return Err(Error::EvalWithoutStats);
                }
                (self.running_mean.clone(), self.running_var.clone())
            }
        };
        let out = batch
            .iter()
            .map(|x| {
                let mut data: Array2<f64> = x.data().to_owned();
                for (ch, mut row) in data.rows_mut().into_iter().enumerate() {
                    let (g, b) = (self.gamma[ch], self.beta[ch]);
                    row.mapv_inplace(|v| g * standardize(v, mean[ch], var[ch], self.eps) + b);
                }
                Signal::new(data)
            })
            .collect::<Result<Vec<_>>>()?;
        Batch::new(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_batch(seed: u64, n: usize, c: usize, l: usize) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Batch::new(
            (0..n)
                .map(|_| {
                    Signal::new(Array2::from_shape_fn((c, l), |_| {
                        rng.random_range(-2.0..5.0)
                    }))
                    .unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    fn single(rows: &[Vec<f64>]) -> Batch {
        Batch::new(vec![Signal::from_rows(rows).unwrap()]).unwrap()
    }

    #[test]
    fn instancenorm_examples() {
        let out = instancenorm_forward(&single(&[vec![4.0; 6]]), 1e-5).unwrap();
        assert!(out.samples()[0].data().iter().all(|&v| v == 0.0));

        let out = instancenorm_forward(&single(&[vec![1.0, -1.0]]), 0.0).unwrap();
        assert_eq!(out.samples()[0].to_rows(), vec![vec![1.0, -1.0]]);

        let out = instancenorm_forward(&random_batch(1, 4, 3, 50), 0.0).unwrap();
        for x in &out {
            for row in x.data().rows() {
                let (m, v) = mean_var(row.iter());
                assert!(m.abs() < 1e-10);
                assert!((v - 1.0).abs() < 1e-6);
            }
        }
        assert!(instancenorm_forward(&random_batch(1, 1, 1, 4), -1.0).is_err());
    }

    #[test]
    fn layernorm_examples() {
        let out = layernorm_forward(&single(&[vec![2.0; 3], vec![2.0; 3]]), 1e-5).unwrap();
        assert!(out.samples()[0].data().iter().all(|&v| v == 0.0));

        let rows = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        let out = layernorm_forward(&single(&rows), 0.0).unwrap();
        assert_eq!(out.samples()[0].to_rows(), rows);

        let out = layernorm_forward(&random_batch(2, 3, 4, 30), 0.0).unwrap();
        for x in &out {
            let (m, v) = mean_var(x.data().iter());
            assert!(m.abs() < 1e-10);
            assert!((v - 1.0).abs() < 1e-6);
        }
        assert!(layernorm_forward(&single(&[vec![1.0]]), 0.0).is_err());
    }

    #[test]
    fn batchnorm_train_centers_pooled_output() {
        let batch = random_batch(3, 5, 2, 20);
        let mut bn = BatchNormLayer::new(2).unwrap();
        let out = bn.forward(&batch).unwrap();
        let (mean, var) = BatchNormLayer::batch_statistics(&out);
        for ch in 0..2 {
            assert!(mean[ch].abs() < 1e-10);
            assert!(var[ch] <= 1.0 && var[ch] > 0.99);
        }
    }

    #[test]
    fn batchnorm_affine_on_constant_input() {
        let batch = single(&[vec![7.0; 4], vec![-1.0; 4]]);
        let mut bn =
            BatchNormLayer::with_params(vec![2.0, 2.0], vec![3.0, 3.0], 1e-5, 0.1).unwrap();
        let out = bn.forward(&batch).unwrap();
        assert!(out.samples()[0].data().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn batchnorm_running_stats_follow_ema() {
        let batch = random_batch(4, 3, 2, 16);
        let (mu, var) = BatchNormLayer::batch_statistics(&batch);
        let mut bn = BatchNormLayer::new(2).unwrap();
        bn.set_mode(Mode::Eval);
        assert!(matches!(bn.forward(&batch), Err(Error::EvalWithoutStats)));
        bn.set_mode(Mode::Train);
        bn.forward(&batch).unwrap();
        bn.forward(&batch).unwrap();
        for ch in 0..2 {
            let (mut rm, mut rv) = (0.0, 1.0);
            for _ in 0..2 {
                rm = 0.9 * rm + 0.1 * mu[ch];
                rv = 0.9 * rv + 0.1 * var[ch];
            }
            assert!((bn.running_mean()[ch] - rm).abs() < 1e-14);
            assert!((bn.running_var()[ch] - rv).abs() < 1e-14);
        }
        assert_eq!(bn.tracked_batches(), 2);

        bn.set_mode(Mode::Eval);
        let snapshot = bn.clone();
        let out = bn.forward(&batch).unwrap();
        assert_eq!(bn, snapshot);
        let x = batch.samples()[0].row(1)[3];
        let expect = (x - bn.running_mean()[1]) / (bn.running_var()[1] + 1e-5).sqrt();
        assert!((out.samples()[0].row(1)[3] - expect).abs() < 1e-12);
    }

    #[test]
    fn batchnorm_validation() {
        assert!(BatchNormLayer::with_params(vec![1.0], vec![0.0], 0.0, 0.1).is_err());
        assert!(BatchNormLayer::with_params(vec![1.0], vec![0.0, 1.0], 1e-5, 0.1).is_err());
        assert!(BatchNormLayer::with_params(vec![1.0], vec![0.0], 1e-5, 1.5).is_err());
        let mut bn = BatchNormLayer::new(1).unwrap();
        assert!(bn.forward(&single(&[vec![1.0]])).is_err());
        assert!(bn.forward(&random_batch(1, 1, 2, 4)).is_err());
    }
}
