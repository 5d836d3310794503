//! Synthetic tone corpora with known, separable spectral structure, for
//! exercising training and transfer end to end without real recordings.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_manifest, write_wav, AudioBuffer, AudioError, ManifestError, ManifestRow, MANIFEST_FILE_NAME};
use crate::features::{stft_bands, FeatureError, StftConfig};
use crate::transfer::LabeledFeatures;

/// Frequency range of the first class-specific component.
pub const BAND_A: (f64, f64) = (500.0, 800.0);
pub const BAND_B: (f64, f64) = (1600.0, 2400.0);
pub const BAND_C: (f64, f64) = (3600.0, 5000.0);

/// A class is a set of frequency ranges; each utterance draws one tone from
/// every range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneClass {
    pub label: String,
    pub bands: Vec<(f64, f64)>,
}

impl ToneClass {
    pub fn new(label: &str, bands: &[(f64, f64)]) -> Self {
        ToneClass { label: label.to_string(), bands: bands.to_vec() }
    }
}

/// positive / negative / neutral on bands A / B / C.
pub fn pretrain_classes() -> Vec<ToneClass> {
    vec![
        ToneClass::new("positive", &[BAND_A]),
        ToneClass::new("negative", &[BAND_B]),
        ToneClass::new("neutral", &[BAND_C]),
    ]
}

/// Emotion classes built from the same bands: happy = A, angry = B,
/// neutral = C, sad = A and C together.
pub fn finetune_classes() -> Vec<ToneClass> {
    vec![
        ToneClass::new("angry", &[BAND_B]),
        ToneClass::new("happy", &[BAND_A]),
        ToneClass::new("sad", &[BAND_A, BAND_C]),
        ToneClass::new("neutral", &[BAND_C]),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub sample_rate_hz: u32,
    pub snr_db: f64,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    /// Peak amplitude of each tone component.
    pub amplitude: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { sample_rate_hz: 16_000, snr_db: 10.0, min_duration_s: 0.5, max_duration_s: 1.0, amplitude: 0.2 }
    }
}

/// One utterance: a tone per band of `class` at a random frequency and
/// phase, plus white Gaussian noise at `cfg.snr_db`.
pub fn tone_utterance(rng: &mut ChaCha8Rng, class: &ToneClass, cfg: &SynthConfig) -> Result<AudioBuffer, AudioError> {
    let fs = cfg.sample_rate_hz as f64;
    let duration = rng.gen_range(cfg.min_duration_s..=cfg.max_duration_s);
    let n = (duration * fs).round() as usize;
    let tones: Vec<(f64, f64)> =
        class.bands.iter().map(|&(lo, hi)| (rng.gen_range(lo..hi), rng.gen_range(0.0..TAU))).collect();
    let signal_power = tones.len() as f64 * cfg.amplitude * cfg.amplitude / 2.0;
    let noise_std = (signal_power / 10f64.powf(cfg.snr_db / 10.0)).sqrt();
    let noise = Normal::new(0.0, noise_std).expect("finite std");
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let clean: f64 = tones.iter().map(|&(f, ph)| cfg.amplitude * (TAU * f * t + ph).sin()).sum();
            (clean + noise.sample(rng)).clamp(-1.0, 1.0) as f32
        })
        .collect();
    AudioBuffer::new(samples, cfg.sample_rate_hz)
}

/// `per_class` utterances for every class, in class-interleaved order.
pub fn generate(classes: &[ToneClass], per_class: usize, cfg: &SynthConfig, seed: u64) -> Result<Vec<(String, AudioBuffer)>, AudioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(classes.len() * per_class);
    for _ in 0..per_class {
        for class in classes {
            out.push((class.label.clone(), tone_utterance(&mut rng, class, cfg)?));
        }
    }
    Ok(out)
}

pub fn featurize(items: &[(String, AudioBuffer)], stft: &StftConfig) -> Result<Vec<LabeledFeatures>, FeatureError> {
    items
        .par_iter()
        .map(|(label, audio)| Ok(LabeledFeatures { label: label.clone(), features: stft_bands::<f64>(audio, stft)? }))
        .collect()
}

/// Generate and featurize in one step.
pub fn labeled_features(
    classes: &[ToneClass],
    per_class: usize,
    cfg: &SynthConfig,
    stft: &StftConfig,
    seed: u64,
) -> Result<Vec<LabeledFeatures>, SynthError> {
    Ok(featurize(&generate(classes, per_class, cfg, seed)?, stft)?)
}

/// Replace a random `fraction` of labels with a different class name, to
/// model unreliable annotations.
pub fn corrupt_labels<'a>(labels: impl IntoIterator<Item = &'a mut String>, names: &[String], fraction: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for label in labels {
        if names.len() > 1 && rng.gen_bool(fraction.clamp(0.0, 1.0)) {
            let others: Vec<&String> = names.iter().filter(|n| *n != label).collect();
            *label = others[rng.gen_range(0..others.len())].clone();
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Write utterances as `segments/<source_id>_<i>.wav` plus a manifest in
/// `dir`, in the same layout `build-corpus` produces.
pub fn write_corpus(dir: &Path, source_id: &str, items: &[(String, AudioBuffer)]) -> Result<PathBuf, SynthError> {
    let seg_dir = dir.join("segments");
    std::fs::create_dir_all(&seg_dir).map_err(|source| SynthError::Io { path: seg_dir.display().to_string(), source })?;
    let mut rows = Vec::with_capacity(items.len());
    let mut start_ms = 0;
    for (i, (label, audio)) in items.iter().enumerate() {
        let rel = format!("segments/{source_id}_{i:05}.wav");
        let path = dir.join(&rel);
        std::fs::write(&path, write_wav(audio)?).map_err(|source| SynthError::Io { path: path.display().to_string(), source })?;
        let end_ms = start_ms + audio.duration_ms();
        rows.push(ManifestRow {
            source_id: source_id.to_string(),
            start_ms,
            end_ms,
            label: label.clone(),
            score: 0.0,
            audio_path: rel,
            text: String::new(),
        });
        start_ms = end_ms;
    }
    let manifest = dir.join(MANIFEST_FILE_NAME);
    write_manifest(&manifest, &rows)?;
    Ok(manifest)
}
