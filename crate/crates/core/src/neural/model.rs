//! Trained model bundle and its on-disk form.
//!
//! The weight file is little-endian: magic `EMOG`, `u32` version, `u32`
//! inputs `B`, hidden `H` and classes `C`, then every tensor as `f64` in
//! [`TENSOR_NAMES`](super::params::TENSOR_NAMES) order, matrices row-major.
//! A JSON sidecar at `<weights path>.json` holds the label names and the
//! per-band feature standardization.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::gru::forward;
use super::params::{Dims, GruParams};
use super::train::argmax;
use super::NeuralError;
use crate::features::{BandStats, Spectrogram};
use crate::scalar::Scalar;

pub const MODEL_MAGIC: &[u8; 4] = b"EMOG";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub params: GruParams<T>,
    pub labels: Vec<String>,
    pub stats: BandStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSidecar {
    pub labels: Vec<String>,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
}

impl<T: Scalar> Model<T> {
    pub fn new(params: GruParams<T>, labels: Vec<String>, stats: BandStats) -> Result<Self, NeuralError> {
        let dims = params.dims();
        if labels.len() != dims.classes {
            return Err(NeuralError::Format(format!("{} labels for {} classes", labels.len(), dims.classes)));
        }
        if stats.n_bands() != dims.inputs || stats.std.len() != dims.inputs {
            return Err(NeuralError::Format(format!("standardization has {} bands, model expects {}", stats.n_bands(), dims.inputs)));
        }
        Ok(Model { params, labels, stats })
    }

    pub fn dims(&self) -> Dims {
        self.params.dims()
    }

    /// Class probabilities for raw (unstandardized) features.
    pub fn predict_proba(&self, raw: &Spectrogram<T>) -> Result<Vec<T>, NeuralError> {
        Ok(forward(&self.params, &self.stats.apply(raw))?.probs)
    }

    pub fn predict(&self, raw: &Spectrogram<T>) -> Result<usize, NeuralError> {
        Ok(argmax(&self.predict_proba(raw)?))
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        std::fs::write(path, encode_params(&self.params))?;
        let sidecar = ModelSidecar {
            labels: self.labels.clone(),
            feature_mean: self.stats.mean.clone(),
            feature_std: self.stats.std.clone(),
        };
        let json = serde_json::to_string_pretty(&sidecar).map_err(|e| NeuralError::Format(e.to_string()))?;
        std::fs::write(sidecar_path(path), json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        let params = decode_params(&std::fs::read(path)?)?;
        let raw = std::fs::read(sidecar_path(path))?;
        let sidecar: ModelSidecar = serde_json::from_slice(&raw).map_err(|e| NeuralError::Format(e.to_string()))?;
        Model::new(params, sidecar.labels, BandStats { mean: sidecar.feature_mean, std: sidecar.feature_std })
    }
}

pub fn sidecar_path(weights: &Path) -> PathBuf {
    let mut name = weights.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

pub fn encode_params<T: Scalar>(params: &GruParams<T>) -> Vec<u8> {
    let dims = params.dims();
    let mut out = Vec::with_capacity(20 + 8 * params.param_count());
    out.extend_from_slice(MODEL_MAGIC);
    for v in [MODEL_VERSION, dims.inputs as u32, dims.hidden as u32, dims.classes as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for t in params.tensors() {
        for v in t {
            out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
    }
    out
}

pub fn decode_params<T: Scalar>(raw: &[u8]) -> Result<GruParams<T>, NeuralError> {
    let bad = |m: String| NeuralError::Format(m);
    if raw.len() < 20 || &raw[..4] != MODEL_MAGIC {
        return Err(bad("missing EMOG header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(raw[i..i + 4].try_into().expect("4 bytes")) as usize;
    if word(4) != MODEL_VERSION as usize {
        return Err(bad(format!("unsupported model version {}", word(4))));
    }
    let dims = Dims { inputs: word(8), hidden: word(12), classes: word(16) };
    if dims.inputs == 0 || dims.hidden == 0 || dims.classes == 0 {
        return Err(bad("zero model dimension".into()));
    }
    let count = 2 * (3 * dims.inputs * dims.hidden + 3 * dims.hidden * dims.hidden) + 2 * dims.hidden * dims.classes + dims.classes;
    if raw.len() != 20 + 8 * count {
        return Err(bad(format!("{} bytes, expected {} for {:?}", raw.len(), 20 + 8 * count, dims)));
    }
    let mut params = GruParams::<T>::zeros(dims);
    let mut values = raw[20..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for t in params.tensors_mut() {
        for slot in t {
            *slot = T::of(values.next().expect("length checked"));
        }
    }
    Ok(params)
}
