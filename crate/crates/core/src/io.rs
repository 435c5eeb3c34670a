//! On-disk formats: binary signal files, CSV import/export and JSON layer
//! state.
//!
//! Signal file layout (all integers little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `PSDN`                            |
//! | 4      | 2    | format version (`1`)                    |
//! | 6      | 4    | channels (u32)                          |
//! | 10     | 8    | length (u64)                            |
//! | 18     | 2    | sample encoding (`1` = f32 LE)          |
//! | 20     | ...  | row-major samples, channels x length    |

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BarycenterState;
use crate::layers::{BatchNormLayer, Mode, PsdNormLayer};
use crate::psd::Psd;
use crate::signal::Signal;
use crate::spectral::WelchConfig;

pub const SIGNAL_MAGIC: &[u8; 4] = b"PSDN";
pub const SIGNAL_VERSION: u16 = 1;
pub const ENCODING_F32_LE: u16 = 1;
pub const SIGNAL_HEADER_LEN: usize = 20;

pub fn encode_signal(x: &Signal) -> Vec<u8> {
    let (c, l) = x.shape();
    let mut out = Vec::with_capacity(SIGNAL_HEADER_LEN + c * l * 4);
    out.extend_from_slice(SIGNAL_MAGIC);
    out.extend_from_slice(&SIGNAL_VERSION.to_le_bytes());
    out.extend_from_slice(&(c as u32).to_le_bytes());
    out.extend_from_slice(&(l as u64).to_le_bytes());
    out.extend_from_slice(&ENCODING_F32_LE.to_le_bytes());
    for v in x.data().iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_signal(bytes: &[u8]) -> Result<Signal> {
    if bytes.len() < SIGNAL_HEADER_LEN {
        return Err(Error::Format(format!(
            "signal file has {} bytes, header needs {SIGNAL_HEADER_LEN}",
            bytes.len()
        )));
    }
    if &bytes[0..4] != SIGNAL_MAGIC {
        return Err(Error::Format("bad magic, expected PSDN".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != SIGNAL_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version}"
        )));
    }
    let channels = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let length = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
    let encoding = u16::from_le_bytes([bytes[18], bytes[19]]);
    if encoding != ENCODING_F32_LE {
        return Err(Error::Format(format!(
            "unsupported sample encoding {encoding}"
        )));
    }
    let length = usize::try_from(length).map_err(|_| Error::Format("length overflows".into()))?;
    let expected = channels
        .checked_mul(length)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    let payload = &bytes[SIGNAL_HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload has {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    let data = Array2::from_shape_vec((channels, length), values)
        .map_err(|e| Error::Format(e.to_string()))?;
    Signal::new(data)
}

/// One line per channel, comma separated samples.
pub fn parse_signal_csv(text: &str) -> Result<Signal> {
    let rows = parse_csv_rows(text)?;
    Signal::from_rows(&rows)
}

fn parse_csv_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(i, line)| {
            line.split(',')
                .map(|cell| {
                    cell.trim().parse::<f64>().map_err(|e| {
                        Error::Format(format!("line {}: `{}`: {e}", i + 1, cell.trim()))
                    })
                })
                .collect()
        })
        .collect()
}

pub fn rows_to_csv(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn psd_to_csv(psd: &Psd) -> String {
    rows_to_csv(&psd.to_rows())
}

pub fn parse_psd_csv(text: &str) -> Result<Psd> {
    Psd::from_rows(&parse_csv_rows(text)?)
}

/// Reads a binary signal file, or a CSV file when the extension is `.csv`.
pub fn read_signal(path: &Path) -> Result<Signal> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        parse_signal_csv(&fs::read_to_string(path)?)
    } else {
        decode_signal(&fs::read(path)?)
    }
}

pub fn write_signal(path: &Path, x: &Signal) -> Result<()> {
    fs::write(path, encode_signal(x))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    PsdNorm,
    InstanceNorm,
    BatchNorm,
    LayerNorm,
}

impl std::fmt::Display for LayerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LayerKind::PsdNorm => "psdnorm",
            LayerKind::InstanceNorm => "instancenorm",
            LayerKind::BatchNorm => "batchnorm",
            LayerKind::LayerNorm => "layernorm",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNormStats {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub eps: f64,
    pub stat_momentum: f64,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub tracked_batches: u64,
}

/// Persisted layer state. Fields that do not apply to a layer kind are null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub kind: LayerKind,
    pub f: Option<usize>,
    pub momentum: Option<f64>,
    pub welch: Option<WelchConfig>,
    pub barycenter: Option<Vec<Vec<f64>>>,
    pub update_count: u64,
    pub batchnorm: Option<BatchNormStats>,
    pub eps: Option<f64>,
    pub version: String,
}

impl StateFile {
    pub fn from_psdnorm(layer: &PsdNormLayer) -> Self {
        Self {
            kind: LayerKind::PsdNorm,
            f: Some(layer.filter_size()),
            momentum: Some(layer.momentum()),
            welch: Some(*layer.welch()),
            barycenter: layer.barycenter().map(Psd::to_rows),
            update_count: layer.state().update_count(),
            batchnorm: None,
            eps: None,
            version: crate::VERSION.to_string(),
        }
    }

    pub fn from_batchnorm(layer: &BatchNormLayer) -> Self {
        Self {
            kind: LayerKind::BatchNorm,
            f: None,
            momentum: None,
            welch: None,
            barycenter: None,
            update_count: layer.tracked_batches(),
            batchnorm: Some(BatchNormStats {
                gamma: layer.gamma().to_vec(),
                beta: layer.beta().to_vec(),
                eps: layer.eps(),
                stat_momentum: layer.stat_momentum(),
                running_mean: layer.running_mean().to_vec(),
                running_var: layer.running_var().to_vec(),
                tracked_batches: layer.tracked_batches(),
            }),
            eps: None,
            version: crate::VERSION.to_string(),
        }
    }

    /// State of a stateless normalizer: only its epsilon.
    pub fn stateless(kind: LayerKind, eps: f64) -> Self {
        Self {
            kind,
            f: None,
            momentum: None,
            welch: None,
            barycenter: None,
            update_count: 0,
            batchnorm: None,
            eps: Some(eps),
            version: crate::VERSION.to_string(),
        }
    }

    fn expect_kind(&self, kind: LayerKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::InvalidConfig(format!(
                "state file holds a {} layer, expected {kind}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn to_psdnorm(&self, mode: Mode) -> Result<PsdNormLayer> {
        self.expect_kind(LayerKind::PsdNorm)?;
        let missing = |field: &str| Error::Format(format!("psdnorm state lacks `{field}`"));
        let welch = self.welch.ok_or_else(|| missing("welch"))?;
        let momentum = self.momentum.ok_or_else(|| missing("momentum"))?;
        if let Some(f) = self.f {
            if f != welch.filter_size() {
                return Err(Error::Format(format!(
                    "state f = {f} disagrees with welch filter size {}",
                    welch.filter_size()
                )));
            }
        }
        let value = self
            .barycenter
            .as_ref()
            .map(|rows| Psd::from_rows(rows))
            .transpose()?;
        let state = BarycenterState::restore(value, momentum, self.update_count)?;
        PsdNormLayer::from_parts(welch, state, mode)
    }

    pub fn to_batchnorm(&self, mode: Mode) -> Result<BatchNormLayer> {
        self.expect_kind(LayerKind::BatchNorm)?;
        let s = self
            .batchnorm
            .clone()
            .ok_or_else(|| Error::Format("batchnorm state lacks running statistics".into()))?;
        let mut layer = BatchNormLayer::restore(
            s.gamma,
            s.beta,
            s.eps,
            s.stat_momentum,
            s.running_mean,
            s.running_var,
            s.tracked_batches,
        )?;
        layer.set_mode(mode);
        Ok(layer)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("state serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
