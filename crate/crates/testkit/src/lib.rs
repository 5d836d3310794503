//! Slow, obviously-correct reference implementations and test fixtures.
//! Nothing here shares code with the library paths it is used to check.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use emomine::corpus::{write_wav, AudioBuffer};
use emomine::neural::GruParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

/// Naive O(n^2) DFT, returned as `(re, im)` pairs for bins `0..n`.
pub fn naive_dft(frame: &[f64]) -> Vec<(f64, f64)> {
    let n = frame.len();
    (0..n)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (t, &x) in frame.iter().enumerate() {
                // Reduce the phase index first to keep the angle small.
                let angle = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                re += x * angle.cos();
                im += x * angle.sin();
            }
            (re, im)
        })
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One GRU step written element by element:
/// z = sig(x Uz + s Wz), r = sig(x Ur + s Wr), h = tanh(x Uh + (s*r) Wh),
/// s' = (1 - z) h + z s.
#[allow(clippy::too_many_arguments)]
fn naive_step(x: &[f64], s: &[f64], uz: &[f64], ur: &[f64], uh: &[f64], wz: &[f64], wr: &[f64], wh: &[f64]) -> Vec<f64> {
    let b = x.len();
    let h = s.len();
    let mut out = vec![0.0; h];
    let mut r = vec![0.0; h];
    for j in 0..h {
        let mut a = 0.0;
        for i in 0..b {
            a += x[i] * ur[i * h + j];
        }
        for i in 0..h {
            a += s[i] * wr[i * h + j];
        }
        r[j] = sigmoid(a);
    }
    for j in 0..h {
        let mut az = 0.0;
        let mut ah = 0.0;
        for i in 0..b {
            az += x[i] * uz[i * h + j];
            ah += x[i] * uh[i * h + j];
        }
        for i in 0..h {
            az += s[i] * wz[i * h + j];
            ah += s[i] * r[i] * wh[i * h + j];
        }
        let z = sigmoid(az);
        out[j] = (1.0 - z) * ah.tanh() + z * s[j];
    }
    out
}

/// Class probabilities of the bi-GRU with mean pooling and a softmax head,
/// computed with plain loops over `frames` (all treated as valid).
pub fn naive_forward(p: &GruParams<f64>, frames: &[Vec<f64>]) -> Vec<f64> {
    let t_len = frames.len();
    let h = p.fw.w_z.rows();
    let c = p.head_b.len();
    let mut fw_states = vec![vec![0.0; h]; t_len];
    let mut s = vec![0.0; h];
    for t in 0..t_len {
        let d = &p.fw;
        s = naive_step(&frames[t], &s, d.u_z.as_slice(), d.u_r.as_slice(), d.u_h.as_slice(), d.w_z.as_slice(), d.w_r.as_slice(), d.w_h.as_slice());
        fw_states[t] = s.clone();
    }
    let mut bw_states = vec![vec![0.0; h]; t_len];
    let mut s = vec![0.0; h];
    for t in (0..t_len).rev() {
        let d = &p.bw;
        s = naive_step(&frames[t], &s, d.u_z.as_slice(), d.u_r.as_slice(), d.u_h.as_slice(), d.w_z.as_slice(), d.w_r.as_slice(), d.w_h.as_slice());
        bw_states[t] = s.clone();
    }
    let mut pooled = vec![0.0; 2 * h];
    for t in 0..t_len {
        for j in 0..h {
            pooled[j] += fw_states[t][j] / t_len as f64;
            pooled[h + j] += bw_states[t][j] / t_len as f64;
        }
    }
    let w = p.head_w.as_slice();
    let mut logits = p.head_b.clone();
    for k in 0..c {
        for i in 0..2 * h {
            logits[k] += pooled[i] * w[i * c + k];
        }
    }
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|v| v / z).collect()
}

/// Sentiment score by linear search over `(token, valence)` entries.
pub fn brute_force_score(text: &str, entries: &[(String, f64)], alpha: f64) -> f64 {
    let mut sum = 0.0;
    let mut word = String::new();
    for ch in text.chars().chain(std::iter::once(' ')) {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
        } else if !word.is_empty() {
            for (tok, v) in entries {
                if *tok == word {
                    sum += v;
                }
            }
            word.clear();
        }
    }
    if sum == 0.0 {
        0.0
    } else {
        sum / (sum * sum + alpha).sqrt()
    }
}

const FILLER: &[&str] = &["the", "a", "we", "you", "it", "was", "is", "so", "not", "very", "today", "home", "really", "and"];

/// Random sentence mixing `vocab` words, filler and punctuation.
pub fn random_sentence(rng: &mut ChaCha8Rng, vocab: &[String]) -> String {
    let n = rng.gen_range(1..16);
    let mut out = String::new();
    for i in 0..n {
        if i > 0 {
            out.push_str([" ", " ", ", ", "! ", " - "][rng.gen_range(0..5)]);
        }
        let w = if !vocab.is_empty() && rng.gen_bool(0.4) {
            vocab[rng.gen_range(0..vocab.len())].clone()
        } else {
            FILLER[rng.gen_range(0..FILLER.len())].to_string()
        };
        if rng.gen_bool(0.2) {
            out.push_str(&w.to_uppercase());
        } else {
            out.push_str(&w);
        }
    }
    out
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ExpectedSrt {
    /// `[index, start_ms, end_ms, text]`.
    pub cues: Vec<(u32, u64, u64, String)>,
    pub warnings: usize,
}

/// Every golden subtitle file with its expected parse.
pub fn golden_srt_cases() -> Vec<(String, Vec<u8>, ExpectedSrt)> {
    let dir = fixtures_dir().join("srt");
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .expect("fixture dir")
        .filter_map(|e| {
            let name = e.ok()?.file_name().into_string().ok()?;
            name.strip_suffix(".srt").map(str::to_string)
        })
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|n| {
            let raw = std::fs::read(dir.join(format!("{n}.srt"))).expect("srt fixture");
            let exp = serde_json::from_slice(&std::fs::read(dir.join(format!("{n}.expected.json"))).expect("expected fixture"))
                .expect("expected json");
            (n, raw, exp)
        })
        .collect()
}

const POSITIVE_LINES: &[&str] = &[
    "I love you so much my friend",
    "What a wonderful and beautiful day",
    "This is the best and most amazing thing",
    "Thank you this is perfect and great",
];
const NEGATIVE_LINES: &[&str] = &[
    "I hate you and I want you dead",
    "This is terrible awful and horrible",
    "You stupid liar I will kill you",
    "The worst and most miserable pain ever",
];
const NEUTRAL_LINES: &[&str] = &[
    "Put the box on the table please",
    "We leave at seven in the morning",
    "The train goes north from here",
    "Turn left after the second door",
    "He said it was on the shelf",
    "Call me when you get there",
];

/// Write `<id>.srt` and `<id>.wav` (16 kHz noise, `cues` two-second cues
/// one second apart) into `dir`.
pub fn write_fixture_movie(dir: &Path, id: &str, cues: usize, seed: u64) -> (PathBuf, PathBuf) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut srt = String::new();
    for i in 0..cues {
        let start = 1000 + i as u64 * 3000;
        let pool = match i % 4 {
            0 => POSITIVE_LINES,
            1 => NEGATIVE_LINES,
            _ => NEUTRAL_LINES,
        };
        let text = pool[rng.gen_range(0..pool.len())];
        srt.push_str(&format!(
            "{}\n{} --> {}\n{}\n\n",
            i + 1,
            emomine::srt::format_timestamp(start),
            emomine::srt::format_timestamp(start + 2000),
            text
        ));
    }
    let n = ((cues as u64 * 3000 + 1000) * 16) as usize;
    let samples: Vec<f32> = (0..n).map(|_| rng.gen_range(-0.3f32..0.3)).collect();
    let audio = AudioBuffer::new(samples, 16_000).expect("valid audio");
    let srt_path = dir.join(format!("{id}.srt"));
    let wav_path = dir.join(format!("{id}.wav"));
    std::fs::write(&srt_path, srt).expect("write srt");
    std::fs::write(&wav_path, write_wav(&audio).expect("encode wav")).expect("write wav");
    (srt_path, wav_path)
}
