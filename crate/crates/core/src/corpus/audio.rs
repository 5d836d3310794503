//! Mono 16-bit PCM audio: decoding, encoding and cutting by millisecond
//! timings.

use std::io::Cursor;

use thiserror::Error;

/// Lowest accepted sample rate; the spectrogram band reaches 8 kHz.
pub const MIN_SAMPLE_RATE_HZ: u32 = 16_000;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt WAV header: {0}")]
    CorruptHeader(String),
    #[error("sample rate {0} Hz is below the required {MIN_SAMPLE_RATE_HZ} Hz")]
    SampleRateTooLow(u32),
    #[error("sample {index} is {value}, outside [-1, 1] or not finite")]
    BadSample { index: usize, value: f32 },
    #[error("segment start {start_ms} ms is beyond the audio end at {duration_ms} ms")]
    OutOfRange { start_ms: u64, duration_ms: u64 },
    #[error("segment end {end_ms} ms is not after its start {start_ms} ms")]
    EmptyRange { start_ms: u64, end_ms: u64 },
    #[error("writing WAV: {0}")]
    Write(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self, AudioError> {
        if sample_rate_hz < MIN_SAMPLE_RATE_HZ {
            return Err(AudioError::SampleRateTooLow(sample_rate_hz));
        }
        if let Some((index, &value)) = samples.iter().enumerate().find(|(_, v)| v.is_nan() || v.abs() > 1.0) {
            return Err(AudioError::BadSample { index, value });
        }
        Ok(AudioBuffer { samples, sample_rate_hz })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration rounded down to whole milliseconds.
    pub fn duration_ms(&self) -> u64 {
        self.samples.len() as u64 * 1000 / u64::from(self.sample_rate_hz)
    }
}

/// Sample index of a millisecond offset, rounded down.
pub fn ms_to_sample(ms: u64, sample_rate_hz: u32) -> u64 {
    ms * u64::from(sample_rate_hz) / 1000
}

/// Decode a RIFF/WAVE file holding mono 16-bit integer PCM.
pub fn read_wav(raw: &[u8]) -> Result<AudioBuffer, AudioError> {
    let reader = hound::WavReader::new(Cursor::new(raw)).map_err(header_error)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(AudioError::UnsupportedFormat(format!("{} channels, expected mono", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(AudioError::UnsupportedFormat(format!(
            "{}-bit {:?} samples, expected 16-bit PCM",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f32::from(v) / 32768.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(header_error)?;
    AudioBuffer::new(samples, spec.sample_rate)
}

fn header_error(e: hound::Error) -> AudioError {
    match e {
        hound::Error::Unsupported => AudioError::UnsupportedFormat("compressed or extensible encoding".into()),
        hound::Error::FormatError(msg) => AudioError::CorruptHeader(msg.to_string()),
        hound::Error::IoError(io) => AudioError::CorruptHeader(io.to_string()),
        other => AudioError::CorruptHeader(other.to_string()),
    }
}

/// Encode as mono 16-bit PCM. Samples are scaled by 32768 and rounded, so a
/// buffer decoded by [`read_wav`] re-encodes to the same sample values.
pub fn write_wav(audio: &AudioBuffer) -> Result<Vec<u8>, AudioError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut writer = hound::WavWriter::new(&mut cursor, spec).map_err(|e| AudioError::Write(e.to_string()))?;
        for &s in &audio.samples {
            let v = (f64::from(s) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            writer.write_sample(v).map_err(|e| AudioError::Write(e.to_string()))?;
        }
        writer.finalize().map_err(|e| AudioError::Write(e.to_string()))?;
    }
    Ok(cursor.into_inner())
}

/// Samples `[floor(start*fs/1000), floor(end*fs/1000))`, truncated at the end
/// of the audio.
pub fn cut_segment(audio: &AudioBuffer, start_ms: u64, end_ms: u64) -> Result<AudioBuffer, AudioError> {
    if end_ms <= start_ms {
        return Err(AudioError::EmptyRange { start_ms, end_ms });
    }
    let len = audio.samples.len() as u64;
    let first = ms_to_sample(start_ms, audio.sample_rate_hz);
    if first >= len {
        return Err(AudioError::OutOfRange { start_ms, duration_ms: audio.duration_ms() });
    }
    let last = ms_to_sample(end_ms, audio.sample_rate_hz).min(len);
    Ok(AudioBuffer {
        samples: audio.samples[first as usize..last as usize].to_vec(),
        sample_rate_hz: audio.sample_rate_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_bytes(channels: u16, bits: u16, rate: u32, samples: &[i32]) -> Vec<u8> {
        let spec = hound::WavSpec { channels, sample_rate: rate, bits_per_sample: bits, sample_format: hound::SampleFormat::Int };
        let mut cursor = Cursor::new(Vec::new());
        let mut w = hound::WavWriter::new(&mut cursor, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
        cursor.into_inner()
    }

    #[test]
    fn scaling() {
        let audio = read_wav(&wav_bytes(1, 16, 16_000, &[32767, -32768, 0])).unwrap();
        assert!((audio.samples()[0] - 0.99997).abs() < 1e-5);
        assert_eq!(audio.samples()[1], -1.0);
        assert_eq!(audio.samples()[2], 0.0);
        assert_eq!(audio.sample_rate_hz(), 16_000);
    }

    #[test]
    fn rejects_unsupported() {
        assert!(matches!(read_wav(&wav_bytes(2, 16, 16_000, &[1, 2])), Err(AudioError::UnsupportedFormat(_))));
        assert!(matches!(read_wav(&wav_bytes(1, 8, 16_000, &[1, 2])), Err(AudioError::UnsupportedFormat(_))));
        assert!(matches!(read_wav(&wav_bytes(1, 24, 16_000, &[1, 2])), Err(AudioError::UnsupportedFormat(_))));
        assert!(matches!(read_wav(&wav_bytes(1, 16, 8_000, &[1, 2])), Err(AudioError::SampleRateTooLow(8000))));
        assert!(matches!(read_wav(b"RIFF\x00\x00"), Err(AudioError::CorruptHeader(_))));
        assert!(matches!(read_wav(b"not a wav file at all"), Err(AudioError::CorruptHeader(_))));
    }

    #[test]
    fn write_then_read_preserves_samples() {
        let raw = wav_bytes(1, 16, 22_050, &[0, 1, -1, 32767, -32768, 1234]);
        let audio = read_wav(&raw).unwrap();
        let again = read_wav(&write_wav(&audio).unwrap()).unwrap();
        assert_eq!(audio, again);
    }

    #[test]
    fn cutting() {
        let audio = AudioBuffer::new(vec![0.0; 48_000], 16_000).unwrap();
        assert_eq!(cut_segment(&audio, 1000, 2000).unwrap().len(), 16_000);
        assert_eq!(cut_segment(&audio, 0, audio.duration_ms()).unwrap(), audio);
        assert_eq!(cut_segment(&audio, 2500, 9000).unwrap().len(), 8_000);
        assert!(matches!(cut_segment(&audio, 3000, 4000), Err(AudioError::OutOfRange { .. })));
        assert!(matches!(cut_segment(&audio, 10, 10), Err(AudioError::EmptyRange { .. })));
    }

    #[test]
    fn cut_composes() {
        let samples: Vec<f32> = (0..64_000).map(|i| ((i % 2000) as f32 / 2000.0) - 0.5).collect();
        let audio = AudioBuffer::new(samples, 16_000).unwrap();
        let outer = cut_segment(&audio, 500, 3500).unwrap();
        let inner = cut_segment(&outer, 250, 1250).unwrap();
        assert_eq!(inner, cut_segment(&audio, 750, 1750).unwrap());
    }

    #[test]
    fn fractional_rate_floors() {
        let audio = AudioBuffer::new(vec![0.0; 44_100], 44_100).unwrap();
        // 1 ms = 44.1 samples
        assert_eq!(cut_segment(&audio, 1, 3).unwrap().len(), (132 - 44) as usize);
    }

    #[test]
    fn buffer_validation() {
        assert!(matches!(AudioBuffer::new(vec![1.5], 16_000), Err(AudioError::BadSample { index: 0, .. })));
        assert!(matches!(AudioBuffer::new(vec![0.0, f32::NAN], 16_000), Err(AudioError::BadSample { index: 1, .. })));
    }
}
