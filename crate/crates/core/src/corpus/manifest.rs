//! Corpus manifest CSV.
//!
//! Header: `source_id,start_ms,end_ms,label,score,audio_path,text`. Scores are
//! printed with six decimals and the text column is always quoted. Audio paths
//! are relative to the directory holding the manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MANIFEST_HEADER: &str = "source_id,start_ms,end_ms,label,score,audio_path,text";
pub const MANIFEST_FILE_NAME: &str = "manifest.csv";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest header is {found:?}, expected {MANIFEST_HEADER:?}")]
    BadHeader { found: String },
    #[error("manifest row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One manifest line. Labels are free-form here so the same format carries
/// weak labels and target emotion labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub source_id: String,
    pub start_ms: u64,
    pub end_ms: u64,
    pub label: String,
    pub score: f64,
    pub audio_path: String,
    pub text: String,
}

impl ManifestRow {
    pub fn resolve_audio(&self, manifest_dir: &Path) -> PathBuf {
        manifest_dir.join(&self.audio_path)
    }

    /// Feature cache path: the segment WAV with a `.feat` extension.
    pub fn resolve_features(&self, manifest_dir: &Path) -> PathBuf {
        self.resolve_audio(manifest_dir).with_extension("feat")
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn quote_if_needed(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        quote(s)
    } else {
        s.to_string()
    }
}

pub fn render_manifest(rows: &[ManifestRow]) -> String {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{},{}\n",
            quote_if_needed(&r.source_id),
            r.start_ms,
            r.end_ms,
            quote_if_needed(&r.label),
            r.score,
            quote_if_needed(&r.audio_path),
            quote(&r.text)
        ));
    }
    out
}

pub fn parse_manifest(raw: &[u8]) -> Result<Vec<ManifestRow>, ManifestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(raw);
    let header = reader
        .headers()
        .map_err(|e| ManifestError::BadHeader { found: e.to_string() })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != MANIFEST_HEADER {
        return Err(ManifestError::BadHeader { found: header });
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| ManifestError::BadRow { row: i + 1, reason: e.to_string() }))
        .collect()
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>, ManifestError> {
    parse_manifest(&std::fs::read(path)?)
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<(), ManifestError> {
    std::fs::write(path, render_manifest(rows))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(text: &str) -> ManifestRow {
        ManifestRow {
            source_id: "movie_a".into(),
            start_ms: 1000,
            end_ms: 2500,
            label: "positive".into(),
            score: 0.812_345_678,
            audio_path: "segments/movie_a_1000_2500.wav".into(),
            text: text.into(),
        }
    }

    #[test]
    fn rendering() {
        let text = render_manifest(&[row("He said \"hi\", then left")]);
        assert_eq!(
            text,
            "source_id,start_ms,end_ms,label,score,audio_path,text\n\
             movie_a,1000,2500,positive,0.812346,segments/movie_a_1000_2500.wav,\"He said \"\"hi\"\", then left\"\n"
        );
    }

    #[test]
    fn parse_back() {
        let rows = vec![row("a, b \"c\""), row("plain")];
        let parsed = parse_manifest(render_manifest(&rows).as_bytes()).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].text, "a, b \"c\"");
        assert!((parsed[0].score - 0.812346).abs() < 1e-12);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(parse_manifest(b"a,b,c\n1,2,3\n"), Err(ManifestError::BadHeader { .. })));
        let bad = format!("{MANIFEST_HEADER}\nm,notanumber,2,positive,0.1,x.wav,\"t\"\n");
        assert!(matches!(parse_manifest(bad.as_bytes()), Err(ManifestError::BadRow { row: 1, .. })));
    }

    #[test]
    fn feature_path_next_to_wav() {
        let r = row("x");
        assert_eq!(r.resolve_features(Path::new("/out")), PathBuf::from("/out/segments/movie_a_1000_2500.feat"));
    }
}
