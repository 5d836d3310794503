//! Weakly supervised speech emotion recognition from subtitled movie audio.
//!
//! The pipeline mines utterances whose subtitle text carries a strong
//! sentiment ([`srt`], [`sentiment`], [`corpus`]), turns them into log-band
//! spectrograms ([`features`]), pretrains a bi-directional GRU with temporal
//! mean pooling on the weak labels ([`neural`]) and transfers it to emotion
//! categories ([`transfer`]).
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix the
//! precision used in practice.

pub mod corpus;
pub mod features;
pub mod neural;
pub mod scalar;
pub mod sentiment;
pub mod srt;
pub mod synth;
pub mod transfer;

pub use scalar::Scalar;

pub type Spectrogram32 = features::Spectrogram<f32>;
pub type Spectrogram64 = features::Spectrogram<f64>;
pub type GruParams32 = neural::GruParams<f32>;
pub type GruParams64 = neural::GruParams<f64>;
pub type Model64 = neural::Model<f64>;
pub type Example64 = neural::Example<f64>;
