//! Bag-of-words polarity scoring over a valence lexicon.
//!
//! A phrase's matched valences are summed to `s` and squashed into `(-1, 1)`
//! with `s / sqrt(s^2 + alpha)`.

use std::collections::HashMap;

use thiserror::Error;

pub const DEFAULT_ALPHA: f64 = 15.0;
pub const MAX_VALENCE: f64 = 4.0;

/// Small English lexicon bundled for tests and demos.
pub const DEMO_LEXICON: &str = include_str!("../data/demo_lexicon.tsv");

#[derive(Debug, Error, PartialEq)]
pub enum LexiconError {
    #[error("lexicon line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("lexicon has no entries")]
    EmptyLexicon,
    #[error("lexicon is not valid UTF-8")]
    NotUtf8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DuplicateToken {
    pub token: String,
    /// 1-based line of the occurrence that won.
    pub line: usize,
}

/// Map from lowercase token to valence in `[-4, 4]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SentimentLexicon {
    entries: HashMap<String, f64>,
}

impl SentimentLexicon {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.entries.get(token).copied()
    }

    pub fn tokens(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn demo() -> Self {
        load_lexicon(DEMO_LEXICON.as_bytes()).expect("bundled lexicon parses").0
    }
}

/// Parse `token<TAB>valence` lines. `#` lines and blank lines are skipped;
/// repeated tokens keep the last value and are reported.
pub fn load_lexicon(raw: &[u8]) -> Result<(SentimentLexicon, Vec<DuplicateToken>), LexiconError> {
    let text = std::str::from_utf8(raw).map_err(|_| LexiconError::NotUtf8)?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut entries = HashMap::new();
    let mut duplicates = Vec::new();

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let malformed = |reason: &str| LexiconError::MalformedLine { line: line_no, reason: reason.to_string() };
        let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('\t').collect();
        if fields.len() != 2 {
            return Err(malformed(&format!("expected 2 tab-separated fields, found {}", fields.len())));
        }
        let token = fields[0].trim().to_lowercase();
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(malformed("token must be non-empty without whitespace"));
        }
        let valence: f64 = fields[1].trim().parse().map_err(|_| malformed("valence is not a number"))?;
        if !valence.is_finite() || valence.abs() > MAX_VALENCE {
            return Err(malformed("valence must be finite and within [-4, 4]"));
        }
        if entries.insert(token.clone(), valence).is_some() {
            log::warn!("lexicon line {line_no}: duplicate token {token:?}, keeping the later value");
            duplicates.push(DuplicateToken { token, line: line_no });
        }
    }

    if entries.is_empty() {
        return Err(LexiconError::EmptyLexicon);
    }
    Ok((SentimentLexicon { entries }, duplicates))
}

/// Polarity of a phrase, in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct SentimentScore(pub f64);

impl SentimentScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Lowercase and split on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

pub fn normalize_valence_sum(sum: f64, alpha: f64) -> f64 {
    if sum == 0.0 {
        return 0.0;
    }
    sum / (sum * sum + alpha).sqrt()
}

pub fn score_text(text: &str, lexicon: &SentimentLexicon) -> SentimentScore {
    score_text_with_alpha(text, lexicon, DEFAULT_ALPHA)
}

pub fn score_text_with_alpha(text: &str, lexicon: &SentimentLexicon, alpha: f64) -> SentimentScore {
    // Summed in sorted order so any permutation of the tokens gives a bit-identical score.
    let mut matched: Vec<f64> = tokenize(text).filter_map(|t| lexicon.valence(&t)).collect();
    matched.sort_by(f64::total_cmp);
    let sum: f64 = matched.iter().sum();
    SentimentScore(normalize_valence_sum(sum, alpha))
}
