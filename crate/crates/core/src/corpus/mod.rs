//! Weakly labeled utterance mining: subtitle cues are filtered, scored and
//! thresholded into positive / negative / neutral, and the matching audio is
//! cut out of each movie's soundtrack.

pub mod audio;
pub mod manifest;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sentiment::{score_text_with_alpha, SentimentLexicon, SentimentScore, DEFAULT_ALPHA};
use crate::srt::{filter_cues, parse_srt, CueFilterPolicy, SubtitleCue};

pub use audio::{cut_segment, ms_to_sample, read_wav, write_wav, AudioBuffer, AudioError};
pub use manifest::{read_manifest, write_manifest, ManifestError, ManifestRow, MANIFEST_FILE_NAME};

/// Subdirectory of the output directory holding segment WAVs.
pub const SEGMENT_DIR: &str = "segments";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeakLabel {
    Positive,
    Negative,
    Neutral,
}

impl WeakLabel {
    pub const ALL: [WeakLabel; 3] = [WeakLabel::Positive, WeakLabel::Negative, WeakLabel::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            WeakLabel::Positive => "positive",
            WeakLabel::Negative => "negative",
            WeakLabel::Neutral => "neutral",
        }
    }
}

impl fmt::Display for WeakLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WeakLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WeakLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown weak label {s:?}"))
    }
}

/// Score thresholds and neutral subsampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelingPolicy {
    pub positive_threshold: f64,
    pub negative_threshold: f64,
    /// Half-width of the band around zero whose cues are neutral candidates.
    pub neutral_band: f64,
    /// How many neutral candidates to keep. `None` keeps the mean of the
    /// positive and negative counts (a guess; nothing pins this down).
    pub neutral_sample_count: Option<usize>,
    pub rng_seed: u64,
}

impl Default for LabelingPolicy {
    fn default() -> Self {
        LabelingPolicy {
            positive_threshold: 0.7,
            negative_threshold: -0.6,
            neutral_band: 0.05,
            neutral_sample_count: None,
            rng_seed: 0,
        }
    }
}

impl LabelingPolicy {
    pub fn validate(&self) -> Result<(), String> {
        let finite = [self.positive_threshold, self.negative_threshold, self.neutral_band]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err("labeling thresholds must be finite".into());
        }
        if !(self.negative_threshold < 0.0 && 0.0 < self.positive_threshold) {
            return Err("labeling requires negative_threshold < 0 < positive_threshold".into());
        }
        if !(self.neutral_band >= 0.0
            && self.neutral_band < self.positive_threshold.min(self.negative_threshold.abs()))
        {
            return Err("labeling.neutral_band must lie in [0, min(positive_threshold, |negative_threshold|))".into());
        }
        Ok(())
    }

    /// Positive above the positive threshold, negative below the negative
    /// one, a neutral candidate inside the neutral band, otherwise nothing.
    pub fn assign_label(&self, score: SentimentScore) -> Option<WeakLabel> {
        let s = score.value();
        if s > self.positive_threshold {
            Some(WeakLabel::Positive)
        } else if s < self.negative_threshold {
            Some(WeakLabel::Negative)
        } else if s.abs() <= self.neutral_band {
            Some(WeakLabel::Neutral)
        } else {
            None
        }
    }
}

pub fn assign_label(score: SentimentScore, policy: &LabelingPolicy) -> Option<WeakLabel> {
    policy.assign_label(score)
}

/// A mined utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSegment {
    pub source_id: String,
    pub start_ms: u64,
    pub end_ms: u64,
    pub label: WeakLabel,
    pub score: SentimentScore,
    pub text: String,
    /// Relative to the corpus output directory.
    pub audio_path: String,
}

impl LabeledSegment {
    pub fn from_cue(source_id: &str, cue: &SubtitleCue, label: WeakLabel, score: SentimentScore) -> Self {
        LabeledSegment {
            source_id: source_id.to_string(),
            start_ms: cue.start_ms,
            end_ms: cue.end_ms,
            label,
            score,
            text: cue.text.clone(),
            audio_path: segment_file_name(source_id, cue.start_ms, cue.end_ms),
        }
    }

    pub fn to_row(&self) -> ManifestRow {
        ManifestRow {
            source_id: self.source_id.clone(),
            start_ms: self.start_ms,
            end_ms: self.end_ms,
            label: self.label.to_string(),
            score: self.score.value(),
            audio_path: self.audio_path.clone(),
            text: self.text.clone(),
        }
    }

    fn sort_key(&self) -> (&str, u64, u64) {
        (&self.source_id, self.start_ms, self.end_ms)
    }
}

pub fn segment_file_name(source_id: &str, start_ms: u64, end_ms: u64) -> String {
    format!("{SEGMENT_DIR}/{source_id}_{start_ms}_{end_ms}.wav")
}

/// Uniform random subset of size `min(count, len)` drawn with a generator
/// seeded from `seed`. Input order is preserved in the output.
pub fn subsample<T: Clone>(items: &[T], count: usize, seed: u64) -> Vec<T> {
    if count >= items.len() {
        return items.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, items.len(), count).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| items[i].clone()).collect()
}

pub fn subsample_neutral(candidates: &[LabeledSegment], policy: &LabelingPolicy) -> Vec<LabeledSegment> {
    debug_assert!(candidates.iter().all(|c| c.label == WeakLabel::Neutral));
    let count = policy.neutral_sample_count.unwrap_or(candidates.len());
    subsample(candidates, count, policy.rng_seed)
}

/// One movie: subtitles, soundtrack, and the identifier used in file names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovieInput {
    pub srt: PathBuf,
    pub wav: PathBuf,
    pub source_id: String,
}

pub fn validate_source_id(id: &str) -> Result<(), String> {
    if id.is_empty() || id.contains(['/', '\\', '\0']) || id == "." || id == ".." {
        return Err(format!("source_id {id:?} cannot be used in a file name"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CorpusPolicies {
    pub cue_filter: CueFilterPolicy,
    pub labeling: LabelingPolicy,
    pub sentiment_alpha: Option<f64>,
}

/// A problem with one input file or cue that was skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub file: PathBuf,
    pub block: Option<usize>,
    pub reason: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.block {
            Some(b) => write!(f, "{}: block {b}: {}", self.file.display(), self.reason),
            None => write!(f, "{}: {}", self.file.display(), self.reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct CorpusSummary {
    pub movies: usize,
    pub movies_skipped: usize,
    pub cues_parsed: usize,
    pub cues_kept_by_filter: usize,
    pub positive: usize,
    pub negative: usize,
    pub neutral: usize,
    pub neutral_candidates: usize,
}

#[derive(Debug, Clone)]
pub struct CorpusOutcome {
    pub segments: Vec<LabeledSegment>,
    pub summary: CorpusSummary,
    pub diagnostics: Vec<Diagnostic>,
    pub manifest_path: PathBuf,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("policy: {0}")]
    Policy(String),
    #[error("no segments were produced")]
    NoSegments { diagnostics: Vec<Diagnostic> },
    #[error("output directory {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}

struct MovieCandidates {
    labeled: Vec<LabeledSegment>,
    cues_parsed: usize,
    cues_kept: usize,
}

fn collect_candidates(
    movie: &MovieInput,
    lexicon: &SentimentLexicon,
    policies: &CorpusPolicies,
    diagnostics: &mut Vec<Diagnostic>,
) -> Option<MovieCandidates> {
    let mut diag = |file: &Path, block, reason: String| {
        log::warn!("{}: {reason}", file.display());
        diagnostics.push(Diagnostic { file: file.to_path_buf(), block, reason });
    };
    if let Err(e) = validate_source_id(&movie.source_id) {
        diag(&movie.srt, None, e);
        return None;
    }
    let parsed = match std::fs::read(&movie.srt).map_err(|e| e.to_string()).and_then(|raw| parse_srt(&raw).map_err(|e| e.to_string())) {
        Ok(p) => p,
        Err(e) => {
            diag(&movie.srt, None, e);
            return None;
        }
    };
    for w in &parsed.warnings {
        diag(&movie.srt, Some(w.block), w.reason.to_string());
    }
    // The soundtrack is only needed here for its length; cutting re-reads it.
    let duration_ms = match std::fs::read(&movie.wav).map_err(|e| e.to_string()).and_then(|raw| read_wav(&raw).map_err(|e| e.to_string())) {
        Ok(a) => a.duration_ms(),
        Err(e) => {
            diag(&movie.wav, None, e);
            return None;
        }
    };

    let kept = filter_cues(&parsed.cues, &policies.cue_filter);
    let alpha = policies.sentiment_alpha.unwrap_or(DEFAULT_ALPHA);
    let mut labeled = Vec::new();
    for cue in &kept {
        let score = score_text_with_alpha(&cue.text, lexicon, alpha);
        let Some(label) = policies.labeling.assign_label(score) else { continue };
        if cue.start_ms >= duration_ms {
            diag(&movie.wav, None, format!("cue {} starts at {} ms, after the audio ends at {duration_ms} ms", cue.index, cue.start_ms));
            continue;
        }
        labeled.push(LabeledSegment::from_cue(&movie.source_id, cue, label, score));
    }
    Some(MovieCandidates { labeled, cues_parsed: parsed.cues.len(), cues_kept: kept.len() })
}

/// Run the whole mining pipeline and write `manifest.csv` plus one WAV per
/// segment under `out_dir`.
///
/// Movies are processed in parallel; the manifest is ordered by
/// `(source_id, start_ms, end_ms)` and neutral subsampling happens once over
/// the whole corpus, so output does not depend on scheduling.
pub fn build_corpus(
    movies: &[MovieInput],
    lexicon: &SentimentLexicon,
    policies: &CorpusPolicies,
    out_dir: &Path,
) -> Result<CorpusOutcome, CorpusError> {
    policies.cue_filter.validate().map_err(CorpusError::Policy)?;
    policies.labeling.validate().map_err(CorpusError::Policy)?;
    let mut ids: Vec<&str> = movies.iter().map(|m| m.source_id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(CorpusError::Policy(format!("source_id {:?} is used by more than one movie", w[0])));
    }

    let per_movie: Vec<(Option<MovieCandidates>, Vec<Diagnostic>)> = movies
        .par_iter()
        .map(|m| {
            let mut diags = Vec::new();
            let c = collect_candidates(m, lexicon, policies, &mut diags);
            (c, diags)
        })
        .collect();

    let mut summary = CorpusSummary { movies: movies.len(), ..Default::default() };
    let mut diagnostics = Vec::new();
    let mut all = Vec::new();
    for (cands, diags) in per_movie {
        diagnostics.extend(diags);
        match cands {
            Some(c) => {
                summary.cues_parsed += c.cues_parsed;
                summary.cues_kept_by_filter += c.cues_kept;
                all.extend(c.labeled);
            }
            None => summary.movies_skipped += 1,
        }
    }
    all.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let before = all.len();
    all.dedup_by(|b, a| a.sort_key() == b.sort_key());
    if all.len() != before {
        log::warn!("{} cues with duplicate timings dropped", before - all.len());
    }

    let (neutral, mut selected): (Vec<_>, Vec<_>) = all.into_iter().partition(|s| s.label == WeakLabel::Neutral);
    summary.positive = selected.iter().filter(|s| s.label == WeakLabel::Positive).count();
    summary.negative = selected.len() - summary.positive;
    summary.neutral_candidates = neutral.len();
    let neutral_count = policies
        .labeling
        .neutral_sample_count
        .unwrap_or((summary.positive + summary.negative) / 2);
    let neutral = subsample(&neutral, neutral_count, policies.labeling.rng_seed);
    summary.neutral = neutral.len();
    selected.extend(neutral);
    selected.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    if selected.is_empty() {
        return Err(CorpusError::NoSegments { diagnostics });
    }

    let seg_dir = out_dir.join(SEGMENT_DIR);
    std::fs::create_dir_all(&seg_dir).map_err(|source| CorpusError::Output { path: seg_dir.clone(), source })?;

    let mut by_movie: BTreeMap<&str, Vec<&LabeledSegment>> = BTreeMap::new();
    for s in &selected {
        by_movie.entry(&s.source_id).or_default().push(s);
    }
    let movie_wavs: BTreeMap<&str, &Path> = movies.iter().map(|m| (m.source_id.as_str(), m.wav.as_path())).collect();
    let written: Vec<Result<(), (PathBuf, String)>> = by_movie
        .par_iter()
        .map(|(id, segs)| write_movie_segments(movie_wavs[id], segs, out_dir))
        .collect();
    for r in written {
        if let Err((path, reason)) = r {
            return Err(CorpusError::Output { path, source: std::io::Error::other(reason) });
        }
    }

    let manifest_path = out_dir.join(MANIFEST_FILE_NAME);
    let rows: Vec<ManifestRow> = selected.iter().map(LabeledSegment::to_row).collect();
    write_manifest(&manifest_path, &rows)?;
    Ok(CorpusOutcome { segments: selected, summary, diagnostics, manifest_path })
}

fn write_movie_segments(wav: &Path, segments: &[&LabeledSegment], out_dir: &Path) -> Result<(), (PathBuf, String)> {
    let raw = std::fs::read(wav).map_err(|e| (wav.to_path_buf(), e.to_string()))?;
    let audio = read_wav(&raw).map_err(|e| (wav.to_path_buf(), e.to_string()))?;
    for seg in segments {
        let path = out_dir.join(&seg.audio_path);
        let cut = cut_segment(&audio, seg.start_ms, seg.end_ms).map_err(|e| (path.clone(), e.to_string()))?;
        let bytes = write_wav(&cut).map_err(|e| (path.clone(), e.to_string()))?;
        std::fs::write(&path, bytes).map_err(|e| (path.clone(), e.to_string()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neutral(i: u64) -> LabeledSegment {
        LabeledSegment {
            source_id: "m".into(),
            start_ms: i * 1000,
            end_ms: i * 1000 + 500,
            label: WeakLabel::Neutral,
            score: SentimentScore(0.0),
            text: format!("cue {i}"),
            audio_path: segment_file_name("m", i * 1000, i * 1000 + 500),
        }
    }

    #[test]
    fn threshold_examples() {
        let p = LabelingPolicy::default();
        assert_eq!(p.assign_label(SentimentScore(0.71)), Some(WeakLabel::Positive));
        assert_eq!(p.assign_label(SentimentScore(-0.61)), Some(WeakLabel::Negative));
        assert_eq!(p.assign_label(SentimentScore(0.3)), None);
        assert_eq!(p.assign_label(SentimentScore(0.7)), None);
        assert_eq!(p.assign_label(SentimentScore(-0.6)), None);
        assert_eq!(p.assign_label(SentimentScore(0.05)), Some(WeakLabel::Neutral));
        assert_eq!(p.assign_label(SentimentScore(-0.0501)), None);
    }

    #[test]
    fn policy_validation() {
        assert!(LabelingPolicy::default().validate().is_ok());
        let bad = LabelingPolicy { negative_threshold: 0.1, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = LabelingPolicy { neutral_band: 0.6, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn neutral_subsampling() {
        let cands: Vec<_> = (0..10).map(neutral).collect();
        let policy = LabelingPolicy { neutral_sample_count: Some(3), rng_seed: 42, ..Default::default() };
        let a = subsample_neutral(&cands, &policy);
        assert_eq!(a.len(), 3);
        for _ in 0..5 {
            assert_eq!(subsample_neutral(&cands, &policy), a);
        }
        let few: Vec<_> = (0..2).map(neutral).collect();
        let policy = LabelingPolicy { neutral_sample_count: Some(5), ..Default::default() };
        assert_eq!(subsample_neutral(&few, &policy), few);
    }

    #[test]
    fn seeds_give_different_subsets() {
        let cands: Vec<_> = (0..100).map(neutral).collect();
        let draw = |seed| {
            let policy = LabelingPolicy { neutral_sample_count: Some(10), rng_seed: seed, ..Default::default() };
            subsample_neutral(&cands, &policy)
        };
        let distinct_pairs = (0..20u64).filter(|&s| draw(2 * s + 1) != draw(2 * s + 2)).count();
        assert_eq!(distinct_pairs, 20);
    }

    #[test]
    fn label_strings() {
        for l in WeakLabel::ALL {
            assert_eq!(l.as_str().parse::<WeakLabel>().unwrap(), l);
        }
        assert!("happy".parse::<WeakLabel>().is_err());
    }

    #[test]
    fn source_ids() {
        assert!(validate_source_id("movie_01").is_ok());
        assert!(validate_source_id("a/b").is_err());
        assert!(validate_source_id("").is_err());
    }
}
