//! Spectrogram features: Hann-windowed short-time DFT magnitudes pooled into
//! log-spaced frequency bands and compressed with `ln(1 + v)`.

pub mod cache;
pub mod fft;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::AudioBuffer;
use crate::scalar::Scalar;

pub use cache::{decode_features, encode_features, read_features, write_features};
pub use fft::{dft, frame_energy_check, RealFft};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("transform length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("frame has {got} samples, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("audio has {samples} samples, shorter than one {window}-sample window")]
    TooShort { samples: usize, window: usize },
    #[error("stft config: {0}")]
    Config(String),
    #[error("feature cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Framing and band layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub n_bands: usize,
    pub max_frames: usize,
    /// Geometric band edges; `false` spaces them linearly.
    pub log_bands: bool,
    /// Apply `ln(1 + v)` to band magnitudes.
    pub log_compress: bool,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            window_len: 1024,
            hop: 512,
            fmin_hz: 60.0,
            fmax_hz: 8000.0,
            n_bands: 128,
            max_frames: 515,
            log_bands: true,
            log_compress: true,
        }
    }
}

impl StftConfig {
    /// Checks that hold regardless of the audio.
    pub fn validate(&self) -> Result<(), FeatureError> {
        let err = |m: &str| Err(FeatureError::Config(m.to_string()));
        if !self.window_len.is_power_of_two() || self.window_len < 2 {
            return err("window_len must be a power of two");
        }
        if self.hop == 0 || self.hop > self.window_len {
            return err("hop must be in 1..=window_len");
        }
        if !(self.fmin_hz > 0.0 && self.fmin_hz < self.fmax_hz && self.fmax_hz.is_finite()) {
            return err("need 0 < fmin_hz < fmax_hz");
        }
        if self.n_bands < 2 {
            return err("n_bands must be at least 2");
        }
        if self.max_frames == 0 {
            return err("max_frames must be positive");
        }
        Ok(())
    }

    pub fn validate_for_rate(&self, sample_rate_hz: u32) -> Result<(), FeatureError> {
        self.validate()?;
        if self.fmax_hz > f64::from(sample_rate_hz) / 2.0 {
            return Err(FeatureError::Config(format!(
                "fmax_hz {} exceeds the Nyquist frequency of {sample_rate_hz} Hz audio",
                self.fmax_hz
            )));
        }
        Ok(())
    }

    /// Frames produced for `n_samples` of audio.
    pub fn frame_count(&self, n_samples: usize) -> usize {
        if n_samples < self.window_len {
            return 0;
        }
        ((n_samples - self.window_len) / self.hop + 1).min(self.max_frames)
    }

    /// `n_bands + 1` increasing band edges from `fmin_hz` to `fmax_hz`.
    pub fn band_edges(&self) -> Vec<f64> {
        let n = self.n_bands as f64;
        (0..=self.n_bands)
            .map(|i| {
                if i == self.n_bands {
                    self.fmax_hz
                } else if self.log_bands {
                    self.fmin_hz * (self.fmax_hz / self.fmin_hz).powf(i as f64 / n)
                } else {
                    self.fmin_hz + (self.fmax_hz - self.fmin_hz) * i as f64 / n
                }
            })
            .collect()
    }
}

/// Which DFT bins feed each band.
#[derive(Debug, Clone, PartialEq)]
pub struct BandLayout {
    pub edges: Vec<f64>,
    pub bins: Vec<Vec<usize>>,
}

impl BandLayout {
    /// Bin `k` (at `k * fs / window_len` Hz) belongs to band `i` when
    /// `edges[i] <= f < edges[i + 1]`, with `fmax` itself in the last band.
    /// Bins outside `[fmin, fmax]` are dropped. A band that catches no bin
    /// reuses the bins of the nearest lower non-empty band, or of the nearest
    /// higher one when nothing below has bins.
    pub fn new(cfg: &StftConfig, sample_rate_hz: u32) -> Result<Self, FeatureError> {
        cfg.validate_for_rate(sample_rate_hz)?;
        let edges = cfg.band_edges();
        let mut own: Vec<Vec<usize>> = vec![Vec::new(); cfg.n_bands];
        let bin_hz = f64::from(sample_rate_hz) / cfg.window_len as f64;
        for k in 0..=cfg.window_len / 2 {
            let f = k as f64 * bin_hz;
            if f < cfg.fmin_hz || f > cfg.fmax_hz {
                continue;
            }
            let band = (edges.partition_point(|&e| e <= f) - 1).min(cfg.n_bands - 1);
            own[band].push(k);
        }
        if own.iter().all(Vec::is_empty) {
            return Err(FeatureError::Config("no DFT bin falls between fmin_hz and fmax_hz".into()));
        }
        let bins = (0..cfg.n_bands)
            .map(|i| {
                if !own[i].is_empty() {
                    return own[i].clone();
                }
                let lower = (0..i).rev().find(|&j| !own[j].is_empty());
                let donor = lower.or_else(|| (i + 1..cfg.n_bands).find(|&j| !own[j].is_empty()));
                own[donor.expect("at least one band has bins")].clone()
            })
            .collect();
        Ok(BandLayout { edges, bins })
    }

    pub fn n_bands(&self) -> usize {
        self.bins.len()
    }

    /// Band whose `[edge_i, edge_{i+1})` interval contains `hz`.
    pub fn band_of(&self, hz: f64) -> Option<usize> {
        let n = self.n_bands();
        if hz < self.edges[0] || hz > self.edges[n] {
            return None;
        }
        Some((self.edges.partition_point(|&e| e <= hz) - 1).min(n - 1))
    }
}

/// `rows x n_bands` feature matrix, row-major. Only the first `valid_frames`
/// rows are data; any further rows are padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram<T> {
    values: Vec<T>,
    n_bands: usize,
    valid_frames: usize,
}

impl<T: Scalar> Spectrogram<T> {
    pub fn new(values: Vec<T>, n_bands: usize, valid_frames: usize) -> Result<Self, FeatureError> {
        if n_bands == 0 || !values.len().is_multiple_of(n_bands) {
            return Err(FeatureError::Config(format!("{} values do not fill rows of {n_bands} bands", values.len())));
        }
        let rows = values.len() / n_bands;
        if valid_frames == 0 || valid_frames > rows {
            return Err(FeatureError::Config(format!("valid_frames {valid_frames} not in 1..={rows}")));
        }
        Ok(Spectrogram { values, n_bands, valid_frames })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, FeatureError> {
        let n_bands = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_bands) {
            return Err(FeatureError::Config("ragged rows".into()));
        }
        Self::new(rows.concat(), n_bands, rows.len())
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    pub fn valid_frames(&self) -> usize {
        self.valid_frames
    }

    pub fn rows(&self) -> usize {
        self.values.len() / self.n_bands
    }

    pub fn frame(&self, t: usize) -> &[T] {
        &self.values[t * self.n_bands..(t + 1) * self.n_bands]
    }

    /// The valid rows only.
    pub fn frames(&self) -> impl DoubleEndedIterator<Item = &[T]> + ExactSizeIterator {
        self.values[..self.valid_frames * self.n_bands].chunks_exact(self.n_bands)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Copy extended with `fill` rows up to `rows` total; `valid_frames` is kept.
    pub fn padded(&self, rows: usize, fill: T) -> Self {
        let mut values = self.values.clone();
        values.resize(rows.max(self.rows()) * self.n_bands, fill);
        Spectrogram { values, n_bands: self.n_bands, valid_frames: self.valid_frames }
    }

    /// Valid rows in reverse time order.
    pub fn reversed(&self) -> Self {
        let values = self.frames().rev().flatten().copied().collect();
        Spectrogram { values, n_bands: self.n_bands, valid_frames: self.valid_frames }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Spectrogram { values: self.values.iter().map(|&v| f(v)).collect(), n_bands: self.n_bands, valid_frames: self.valid_frames }
    }

    pub fn cast<U: Scalar>(&self) -> Spectrogram<U> {
        Spectrogram {
            values: self.values.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
            n_bands: self.n_bands,
            valid_frames: self.valid_frames,
        }
    }
}

/// Periodic Hann window.
pub fn hann_window<T: Scalar>(len: usize) -> Vec<T> {
    (0..len)
        .map(|n| T::of(0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()))
        .collect()
}

/// Band magnitudes before log compression: the mean `|X[k]|` over each
/// band's bins, one row per frame.
pub fn stft_band_magnitudes<T: Scalar>(audio: &AudioBuffer, cfg: &StftConfig) -> Result<Spectrogram<T>, FeatureError> {
    let layout = BandLayout::new(cfg, audio.sample_rate_hz())?;
    let samples = audio.samples();
    let frames = cfg.frame_count(samples.len());
    if frames == 0 {
        return Err(FeatureError::TooShort { samples: samples.len(), window: cfg.window_len });
    }
    let fft = RealFft::<T>::new(cfg.window_len)?;
    let window = hann_window::<T>(cfg.window_len);
    let mut values = Vec::with_capacity(frames * cfg.n_bands);
    let mut frame = vec![T::zero(); cfg.window_len];
    for t in 0..frames {
        let offset = t * cfg.hop;
        for (i, slot) in frame.iter_mut().enumerate() {
            *slot = T::of(f64::from(samples[offset + i])) * window[i];
        }
        let spectrum = fft.process(&frame)?;
        for bins in &layout.bins {
            let sum: T = bins.iter().map(|&k| spectrum[k].norm()).sum();
            values.push(sum / T::of(bins.len() as f64));
        }
    }
    Spectrogram::new(values, cfg.n_bands, frames)
}

/// Full feature extraction for one utterance.
pub fn stft_bands<T: Scalar>(audio: &AudioBuffer, cfg: &StftConfig) -> Result<Spectrogram<T>, FeatureError> {
    let mags = stft_band_magnitudes::<T>(audio, cfg)?;
    Ok(if cfg.log_compress { mags.map(|v| v.ln_1p()) } else { mags })
}

/// Per-band mean and standard deviation over every valid frame of a set of
/// spectrograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl BandStats {
    /// Bands with (near) zero spread get a unit divisor.
    pub const MIN_STD: f64 = 1e-8;

    pub fn identity(n_bands: usize) -> Self {
        BandStats { mean: vec![0.0; n_bands], std: vec![1.0; n_bands] }
    }

    pub fn fit<'a, T: Scalar>(specs: impl IntoIterator<Item = &'a Spectrogram<T>>) -> Option<Self> {
        let mut sum: Vec<f64> = Vec::new();
        let mut sum_sq: Vec<f64> = Vec::new();
        let mut count = 0usize;
        for spec in specs {
            if sum.is_empty() {
                sum = vec![0.0; spec.n_bands()];
                sum_sq = vec![0.0; spec.n_bands()];
            }
            if spec.n_bands() != sum.len() {
                return None;
            }
            for frame in spec.frames() {
                for (b, v) in frame.iter().enumerate() {
                    let v = v.to_f64_lossy();
                    sum[b] += v;
                    sum_sq[b] += v * v;
                }
                count += 1;
            }
        }
        if count == 0 {
            return None;
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| {
                let s = (sq / n - m * m).max(0.0).sqrt();
                if s < Self::MIN_STD { 1.0 } else { s }
            })
            .collect();
        Some(BandStats { mean, std })
    }

    pub fn n_bands(&self) -> usize {
        self.mean.len()
    }

    pub fn apply<T: Scalar>(&self, spec: &Spectrogram<T>) -> Spectrogram<T> {
        let n = spec.n_bands();
        let values = spec
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let b = i % n;
                (v - T::of(self.mean[b])) / T::of(self.std[b])
            })
            .collect();
        Spectrogram { values, n_bands: n, valid_frames: spec.valid_frames() }
    }
}
