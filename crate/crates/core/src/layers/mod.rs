//! Normalization layers operating on batches of signals.

mod baseline;
mod psdnorm;
mod tma;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use baseline::{
    instancenorm_forward, layernorm_forward, BatchNormLayer, DEFAULT_BN_EPS, DEFAULT_BN_MOMENTUM,
};
pub use psdnorm::{
    halved_filter_sizes, ForwardPass, PsdNormLayer, PsdNormStack, StackOutput, StageSnapshot,
    DEFAULT_FILTER_SIZE, DEFAULT_MOMENTUM,
};
pub use tma::TmaAligner;

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Training updates running statistics; evaluation only reads them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Train,
    Eval,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Train => "train",
            Mode::Eval => "eval",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Mode::Train),
            "eval" => Ok(Mode::Eval),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

/// A non-empty list of equally shaped signals.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    samples: Vec<Signal>,
}

impl Batch {
    pub fn new(samples: Vec<Signal>) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyInput("batch"))?;
        let shape = first.shape();
        if let Some(bad) = samples.iter().find(|s| s.shape() != shape) {
            return Err(Error::ShapeMismatch {
                expected: shape,
                actual: bad.shape(),
            });
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[Signal] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Signal> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(channels, length)` shared by every sample.
    pub fn shape(&self) -> (usize, usize) {
        self.samples[0].shape()
    }

    pub fn channels(&self) -> usize {
        self.shape().0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Signal> {
        self.samples.iter()
    }
}

impl<'a> IntoIterator for &'a Batch {
    type Item = &'a Signal;
    type IntoIter = std::slice::Iter<'a, Signal>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}
