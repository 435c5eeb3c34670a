//! Synthetic domain-shift benchmark: how much each normalizer reduces the
//! Bures distance between per-domain mean PSDs.
//!
//! The protocol is this crate's own design. Each domain's signals are drawn
//! from its generating PSD; stateful methods are trained on rounds that mix
//! one signal from every domain and then applied in eval mode.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::bures_distance;
use crate::layers::{
    instancenorm_forward, layernorm_forward, Batch, BatchNormLayer, Mode, PsdNormLayer, TmaAligner,
};
use crate::psd::Psd;
use crate::signal::Signal;
use crate::spectral::{center, default_stride, welch_psd, WelchConfig, WindowKind};
use crate::synth::{
    base_psd, derive_seed, make_shifted_domains, sample_gaussian_with_psd, BasePreset,
    CorpusParams, DomainSpec, GENERATOR,
};

pub const PROTOCOL: &str =
    "synthetic shifted-domain alignment benchmark (artifact-defined protocol)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    None,
    InstanceNorm,
    BatchNorm,
    LayerNorm,
    Tma,
    PsdNorm,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::None,
        Method::InstanceNorm,
        Method::BatchNorm,
        Method::LayerNorm,
        Method::Tma,
        Method::PsdNorm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::None => "none",
            Method::InstanceNorm => "instancenorm",
            Method::BatchNorm => "batchnorm",
            Method::LayerNorm => "layernorm",
            Method::Tma => "tma",
            Method::PsdNorm => "psdnorm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

/// Hyperparameters of the normalizers and of the PSD measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentConfig {
    /// Filter size of PSDNorm and TMA, also the measurement resolution.
    pub filter_size: usize,
    pub stride: usize,
    pub window: WindowKind,
    pub momentum: f64,
    pub eps: f64,
    /// Passes over the mixed training rounds for stateful methods.
    pub train_passes: usize,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self {
            filter_size: 8,
            stride: default_stride(8),
            window: WindowKind::Hann,
            momentum: crate::layers::DEFAULT_MOMENTUM,
            eps: crate::layers::DEFAULT_BN_EPS,
            train_passes: 1,
        }
    }
}

impl AlignmentConfig {
    pub fn welch(&self) -> Result<WelchConfig> {
        WelchConfig::new(self.filter_size, self.stride, self.window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub method: Method,
    pub pre_distances: Vec<Vec<f64>>,
    pub post_distances: Vec<Vec<f64>>,
    /// Mean off-diagonal post distance over mean off-diagonal pre distance;
    /// 1.0 when the domains are indistinguishable before alignment.
    pub reduction_ratio: f64,
    /// Per-domain mean PSD of the centered inputs, `domain x channel x bin`.
    pub input_psds: Vec<Vec<Vec<f64>>>,
    /// Per-domain mean PSD of the centered outputs.
    pub output_psds: Vec<Vec<Vec<f64>>>,
}

/// Generates each domain's signals, applies `method` and measures alignment.
pub fn evaluate_alignment(
    domains: &[DomainSpec],
    method: Method,
    config: &AlignmentConfig,
) -> Result<AlignmentReport> {
    if domains.len() < 2 {
        return Err(Error::InvalidConfig("need at least two domains".into()));
    }
    let inputs: Vec<Batch> = domains
        .iter()
        .map(|d| Batch::new(sample_gaussian_with_psd(d)))
        .collect::<Result<_>>()?;
    let outputs = apply_method(&inputs, method, config)?;

    let welch = config.welch()?;
    let input_means = domain_mean_psds(&inputs, &welch)?;
    let output_means = domain_mean_psds(&outputs, &welch)?;
    let pre = distance_matrix(&input_means)?;
    let post = distance_matrix(&output_means)?;
    let pre_mean = off_diagonal_mean(&pre);
    let post_mean = off_diagonal_mean(&post);
    let reduction_ratio = if pre_mean == 0.0 {
        1.0
    } else {
        post_mean / pre_mean
    };

    Ok(AlignmentReport {
        method,
        pre_distances: pre,
        post_distances: post,
        reduction_ratio,
        input_psds: input_means.iter().map(Psd::to_rows).collect(),
        output_psds: output_means.iter().map(Psd::to_rows).collect(),
    })
}

/// Training rounds: round `i` holds the `i`-th signal of every domain that
/// has one.
fn training_rounds(domains: &[Batch]) -> Result<Vec<Batch>> {
    let rounds = domains.iter().map(Batch::len).max().unwrap_or(0);
    (0..rounds)
        .map(|i| {
            Batch::new(
                domains
                    .iter()
                    .filter_map(|b| b.samples().get(i).cloned())
                    .collect(),
            )
        })
        .collect()
}

fn apply_method(domains: &[Batch], method: Method, config: &AlignmentConfig) -> Result<Vec<Batch>> {
    match method {
        Method::None => Ok(domains.to_vec()),
        Method::InstanceNorm => domains
            .iter()
            .map(|b| instancenorm_forward(b, config.eps))
            .collect(),
        Method::LayerNorm => domains
            .iter()
            .map(|b| layernorm_forward(b, config.eps))
            .collect(),
        Method::BatchNorm => {
            let mut layer = BatchNormLayer::with_params(
                vec![1.0; domains[0].channels()],
                vec![0.0; domains[0].channels()],
                config.eps,
                crate::layers::DEFAULT_BN_MOMENTUM,
            )?;
            for _ in 0..config.train_passes {
                for round in training_rounds(domains)? {
                    layer.forward(&round)?;
                }
            }
            layer.set_mode(Mode::Eval);
            domains.iter().map(|b| layer.forward(b)).collect()
        }
        Method::Tma => {
            let tma = TmaAligner::fit(domains, config.welch()?)?;
            domains
                .iter()
                .map(|b| {
                    Batch::new(
                        b.iter()
                            .map(|x| tma.transform(x))
                            .collect::<Result<Vec<Signal>>>()?,
                    )
                })
                .collect()
        }
        Method::PsdNorm => {
            let mut layer = PsdNormLayer::with_welch(config.welch()?, config.momentum)?;
            for _ in 0..config.train_passes {
                for round in training_rounds(domains)? {
                    layer.forward(&round)?;
                }
            }
            layer.set_mode(Mode::Eval);
            domains.iter().map(|b| layer.forward(b)).collect()
        }
    }
}

fn domain_mean_psds(domains: &[Batch], welch: &WelchConfig) -> Result<Vec<Psd>> {
    domains
        .iter()
        .map(|b| {
            let psds = b
                .iter()
                .map(|x| welch_psd(&center(x), welch))
                .collect::<Result<Vec<_>>>()?;
            Psd::arithmetic_mean(&psds)
        })
        .collect()
}

fn distance_matrix(psds: &[Psd]) -> Result<Vec<Vec<f64>>> {
    let k = psds.len();
    let mut out = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let d = bures_distance(&psds[i], &psds[j])?;
            out[i][j] = d;
            out[j][i] = d;
        }
    }
    Ok(out)
}

fn off_diagonal_mean(m: &[Vec<f64>]) -> f64 {
    let k = m.len();
    if k < 2 {
        return 0.0;
    }
    let total: f64 = (0..k)
        .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| m[i][j])
        .sum();
    total / (k * (k - 1)) as f64
}

/// Everything needed to reproduce a multi-seed benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSettings {
    pub domains: usize,
    pub shift: f64,
    pub methods: Vec<Method>,
    pub seeds: usize,
    pub base_seed: u64,
    pub base: BasePreset,
    pub channels: usize,
    pub n_signals: usize,
    pub length: usize,
    pub alignment: AlignmentConfig,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            domains: 3,
            shift: 1.0,
            methods: vec![Method::None, Method::InstanceNorm, Method::PsdNorm],
            seeds: 3,
            base_seed: 0,
            base: BasePreset::Pink,
            channels: 2,
            n_signals: 4,
            length: 1 << 14,
            alignment: AlignmentConfig::default(),
        }
    }
}

impl BenchSettings {
    /// Domains for the `index`-th seed.
    pub fn corpus(&self, index: usize) -> Result<Vec<DomainSpec>> {
        let base = base_psd(self.base, self.channels, self.alignment.filter_size)?;
        make_shifted_domains(
            &base,
            self.domains,
            self.shift,
            &CorpusParams {
                n_signals: self.n_signals,
                length: self.length,
                seed: derive_seed(self.base_seed, index as u64),
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub ratio_mean: f64,
    pub ratio_std: f64,
    pub ratios: Vec<f64>,
    pub reports: Vec<AlignmentReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub version: String,
    pub protocol: String,
    pub generator: String,
    pub settings: BenchSettings,
    pub methods: Vec<MethodSummary>,
}

impl BenchReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// `method,ratio_mean,ratio_std` with one row per method.
    pub fn ratios_csv(&self) -> String {
        let mut out = String::from("method,ratio_mean,ratio_std\n");
        for m in &self.methods {
            out.push_str(&format!("{},{},{}\n", m.method, m.ratio_mean, m.ratio_std));
        }
        out
    }
}

pub fn run_benchmark(settings: &BenchSettings) -> Result<BenchReport> {
    if settings.domains < 2 {
        return Err(Error::InvalidConfig("need at least two domains".into()));
    }
    if settings.seeds == 0 {
        return Err(Error::InvalidConfig("need at least one seed".into()));
    }
    if settings.methods.is_empty() {
        return Err(Error::EmptyInput("method list"));
    }
    let corpora = (0..settings.seeds)
        .map(|s| settings.corpus(s))
        .collect::<Result<Vec<_>>>()?;
    let methods = settings
        .methods
        .iter()
        .map(|&method| {
            let reports = corpora
                .iter()
                .map(|domains| evaluate_alignment(domains, method, &settings.alignment))
                .collect::<Result<Vec<_>>>()?;
            let ratios: Vec<f64> = reports.iter().map(|r| r.reduction_ratio).collect();
            let (ratio_mean, ratio_std) = mean_std(&ratios);
            Ok(MethodSummary {
                method,
                ratio_mean,
                ratio_std,
                ratios,
                reports,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchReport {
        version: crate::VERSION.to_string(),
        protocol: PROTOCOL.to_string(),
        generator: GENERATOR.to_string(),
        settings: settings.clone(),
        methods,
    })
}

/// Mean and sample standard deviation (zero for a single value).
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
