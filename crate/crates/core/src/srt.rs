//! SubRip (`.srt`) parsing and the phrase-length filters applied before
//! sentiment scoring.
//!
//! Parsing is total: malformed blocks and cues with a non-positive duration
//! are skipped and reported as [`ParseWarning`]s. Only undecodable input or a
//! file without a single usable cue is an error.

use std::fmt;

use thiserror::Error;

/// One timed subtitle phrase with normalized text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtitleCue {
    pub index: u32,
    pub start_ms: u64,
    pub end_ms: u64,
    pub text: String,
}

impl SubtitleCue {
    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }

    pub fn char_count(&self) -> usize {
        self.text.chars().count()
    }

    pub fn word_count(&self) -> usize {
        word_count(&self.text)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SrtError {
    #[error("subtitle file is not valid UTF-8 (first bad byte at offset {offset})")]
    NotUtf8 { offset: usize },
    #[error("subtitle file contains no parseable cue")]
    EmptyFile,
}

/// Why a block was skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WarningReason {
    MissingTiming,
    BadIndex(String),
    BadTimestamp(String),
    NonPositiveDuration { start_ms: u64, end_ms: u64 },
}

impl fmt::Display for WarningReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WarningReason::MissingTiming => write!(f, "block has no timing line"),
            WarningReason::BadIndex(s) => write!(f, "bad cue index {s:?}"),
            WarningReason::BadTimestamp(s) => write!(f, "bad timing line {s:?}"),
            WarningReason::NonPositiveDuration { start_ms, end_ms } => {
                write!(f, "cue ends at {end_ms} ms, not after its start at {start_ms} ms")
            }
        }
    }
}

/// A skipped block. `block` is the 1-based ordinal of the blank-line
/// separated block within the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub block: usize,
    pub reason: WarningReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedSrt {
    pub cues: Vec<SubtitleCue>,
    pub warnings: Vec<ParseWarning>,
}

/// Phrase-length filter. Cues longer than `max_chars` characters or with
/// fewer than `min_words` words are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CueFilterPolicy {
    pub max_chars: usize,
    pub min_words: usize,
}

impl Default for CueFilterPolicy {
    fn default() -> Self {
        CueFilterPolicy { max_chars: 100, min_words: 4 }
    }
}

impl CueFilterPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_chars == 0 {
            return Err("cue_filter.max_chars must be at least 1".into());
        }
        if self.min_words == 0 {
            return Err("cue_filter.min_words must be at least 1".into());
        }
        Ok(())
    }

    pub fn accepts(&self, cue: &SubtitleCue) -> bool {
        cue.char_count() <= self.max_chars && cue.word_count() >= self.min_words
    }
}

pub fn word_count(text: &str) -> usize {
    text.split(' ').filter(|w| !w.is_empty()).count()
}

/// Parse a whole `.srt` file.
pub fn parse_srt(raw: &[u8]) -> Result<ParsedSrt, SrtError> {
    let text = std::str::from_utf8(raw).map_err(|e| SrtError::NotUtf8 { offset: e.valid_up_to() })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);

    let mut parsed = ParsedSrt::default();
    let mut block: Vec<&str> = Vec::new();
    let mut ordinal = 0;
    let text = text.replace("\r\n", "\n").replace('\r', "\n");
    for line in text.split('\n') {
        if line.trim().is_empty() {
            if !block.is_empty() {
                ordinal += 1;
                parse_block(&block, ordinal, &mut parsed);
                block.clear();
            }
        } else {
            block.push(line);
        }
    }
    if !block.is_empty() {
        ordinal += 1;
        parse_block(&block, ordinal, &mut parsed);
    }

    if parsed.cues.is_empty() {
        return Err(SrtError::EmptyFile);
    }
    Ok(parsed)
}

fn parse_block(lines: &[&str], ordinal: usize, out: &mut ParsedSrt) {
    let warn = |out: &mut ParsedSrt, reason| out.warnings.push(ParseWarning { block: ordinal, reason });

    let timing_at = match lines.iter().take(2).position(|l| l.contains("-->")) {
        Some(i) => i,
        None => return warn(out, WarningReason::MissingTiming),
    };
    let index = if timing_at == 1 {
        match lines[0].trim().parse::<u32>() {
            Ok(i) if i > 0 => i,
            _ => return warn(out, WarningReason::BadIndex(lines[0].trim().to_string())),
        }
    } else {
        // Some rippers omit the counter; fall back to the block ordinal.
        u32::try_from(ordinal).unwrap_or(u32::MAX)
    };
    let (start_ms, end_ms) = match parse_timing_line(lines[timing_at]) {
        Some(t) => t,
        None => return warn(out, WarningReason::BadTimestamp(lines[timing_at].trim().to_string())),
    };
    if end_ms <= start_ms {
        return warn(out, WarningReason::NonPositiveDuration { start_ms, end_ms });
    }

    out.cues.push(SubtitleCue {
        index,
        start_ms,
        end_ms,
        text: normalize_text(&lines[timing_at + 1..]),
    });
}

fn parse_timing_line(line: &str) -> Option<(u64, u64)> {
    let (start, rest) = line.split_once("-->")?;
    // Anything after the end timestamp (position hints like `X1:40`) is ignored.
    let end = rest.split_whitespace().next()?;
    Some((parse_timestamp(start.trim())?, parse_timestamp(end)?))
}

/// `HH:MM:SS,mmm` to milliseconds. A `.` decimal separator is tolerated.
pub fn parse_timestamp(s: &str) -> Option<u64> {
    let (hms, millis) = s.split_once([',', '.'])?;
    let mut parts = hms.split(':');
    let (h, m, sec) = (parts.next()?, parts.next()?, parts.next()?);
    if parts.next().is_some() || m.len() != 2 || sec.len() != 2 || millis.len() != 3 {
        return None;
    }
    let field = |f: &str| -> Option<u64> {
        if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        f.parse().ok()
    };
    let (h, m, sec, millis) = (field(h)?, field(m)?, field(sec)?, field(millis)?);
    if m >= 60 || sec >= 60 {
        return None;
    }
    h.checked_mul(3_600_000)?.checked_add(m * 60_000 + sec * 1000 + millis)
}

pub fn format_timestamp(ms: u64) -> String {
    format!(
        "{:02}:{:02}:{:02},{:03}",
        ms / 3_600_000,
        (ms / 60_000) % 60,
        (ms / 1000) % 60,
        ms % 1000
    )
}

/// Strip `<...>` markup, join lines with a single space and collapse
/// whitespace runs.
pub fn normalize_text(lines: &[&str]) -> String {
    let joined = lines.join(" ");
    collapse_whitespace(&strip_tags(&joined))
}

fn strip_tags(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(open) = rest.find('<') {
        match rest[open..].find('>') {
            Some(close) => {
                out.push_str(&rest[..open]);
                rest = &rest[open + close + 1..];
            }
            None => break,
        }
    }
    out.push_str(rest);
    out
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Render cues back to SubRip text. Cue text is written on one line.
pub fn write_srt(cues: &[SubtitleCue]) -> String {
    let mut out = String::new();
    for cue in cues {
        out.push_str(&format!(
            "{}\n{} --> {}\n{}\n\n",
            cue.index,
            format_timestamp(cue.start_ms),
            format_timestamp(cue.end_ms),
            cue.text
        ));
    }
    out
}

/// Keep the cues accepted by `policy`, preserving order.
pub fn filter_cues(cues: &[SubtitleCue], policy: &CueFilterPolicy) -> Vec<SubtitleCue> {
    cues.iter().filter(|c| policy.accepts(c)).cloned().collect()
}
