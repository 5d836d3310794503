//! `.feat` feature cache: little-endian `EMOF` magic, `u32` version, `u32`
//! frame count, `u32` band count, then `frames * bands` `f32` values
//! row-major. Only valid frames are stored.

use std::path::Path;

use super::{FeatureError, Spectrogram};
use crate::scalar::Scalar;

pub const FEATURE_MAGIC: &[u8; 4] = b"EMOF";
pub const FEATURE_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn encode_features<T: Scalar>(spec: &Spectrogram<T>) -> Vec<u8> {
    let frames = spec.valid_frames();
    let bands = spec.n_bands();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * frames * bands);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(frames as u32).to_le_bytes());
    out.extend_from_slice(&(bands as u32).to_le_bytes());
    for v in spec.frames().flatten() {
        out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
    }
    out
}

pub fn decode_features<T: Scalar>(raw: &[u8]) -> Result<Spectrogram<T>, FeatureError> {
    let bad = |m: String| FeatureError::Cache(m);
    if raw.len() < HEADER_LEN {
        return Err(bad(format!("{} bytes is shorter than the header", raw.len())));
    }
    if &raw[..4] != FEATURE_MAGIC {
        return Err(bad("missing EMOF magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(raw[i..i + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != FEATURE_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let (frames, bands) = (word(8) as usize, word(12) as usize);
    let expected = frames
        .checked_mul(bands)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| bad("dimensions overflow".into()))?;
    if raw.len() != expected {
        return Err(bad(format!("{} bytes, expected {expected} for {frames}x{bands}", raw.len())));
    }
    let values = raw[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| T::of(f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes")))))
        .collect();
    Spectrogram::new(values, bands, frames)
}

pub fn write_features<T: Scalar>(path: &Path, spec: &Spectrogram<T>) -> Result<(), FeatureError> {
    std::fs::write(path, encode_features(spec))?;
    Ok(())
}

pub fn read_features<T: Scalar>(path: &Path) -> Result<Spectrogram<T>, FeatureError> {
    decode_features(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let spec = Spectrogram::from_rows(&[vec![1.0f64, 2.0, 3.0], vec![4.0, 5.0, 6.5]]).unwrap();
        let bytes = encode_features(&spec);
        assert_eq!(&bytes[..4], b"EMOF");
        assert_eq!(&bytes[4..16], &[1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 16 + 6 * 4);
        assert_eq!(decode_features::<f64>(&bytes).unwrap(), spec);
    }

    #[test]
    fn padding_not_stored() {
        let spec = Spectrogram::from_rows(&[vec![1.0f64, 2.0]]).unwrap().padded(3, 0.0);
        let back = decode_features::<f64>(&encode_features(&spec)).unwrap();
        assert_eq!(back.rows(), 1);
    }

    #[test]
    fn rejects_damage() {
        let spec = Spectrogram::from_rows(&[vec![1.0f64, 2.0]]).unwrap();
        let good = encode_features(&spec);
        assert!(decode_features::<f64>(&good[..10]).is_err());
        assert!(decode_features::<f64>(&good[..good.len() - 1]).is_err());
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(decode_features::<f64>(&bad_magic).is_err());
        let mut bad_version = good.clone();
        bad_version[4] = 9;
        assert!(decode_features::<f64>(&bad_version).is_err());
        let mut zero_frames = good;
        zero_frames[8] = 0;
        zero_frames.truncate(16);
        assert!(decode_features::<f64>(&zero_frames).is_err());
    }
}
