//! The pipeline config file: one TOML document, strictly validated, with
//! `--set key=value` overrides applied before validation.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use emomine::corpus::{LabelingPolicy, MANIFEST_FILE_NAME};
use emomine::features::StftConfig;
use emomine::neural::TrainConfig;
use emomine::srt::CueFilterPolicy;
use emomine::transfer::SplitSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPair {
    pub srt: PathBuf,
    pub wav: PathBuf,
    /// Defaults to the SRT file stem.
    pub source_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SentimentSection {
    pub alpha: f64,
}

impl Default for SentimentSection {
    fn default() -> Self {
        SentimentSection { alpha: emomine::sentiment::DEFAULT_ALPHA }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainSection {
    /// Weak-label manifest; defaults to the one `build-corpus` writes.
    pub manifest: Option<PathBuf>,
    /// Defaults to `<output_dir>/models/pretrained.emog`.
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FinetuneSection {
    /// Target manifest labeled with emotion classes.
    pub manifest: Option<PathBuf>,
    /// Defaults to the pretrain model path.
    pub pretrained_model: Option<PathBuf>,
    /// Defaults to `<output_dir>/models/finetuned.emog`.
    pub model: Option<PathBuf>,
    /// Defaults to angry, happy, sad, neutral.
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub manifest: Option<PathBuf>,
    /// Defaults to the fine-tuned model path.
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BinarySection {
    pub positive_class: String,
    pub negative_class: String,
    pub train_manifest: Option<PathBuf>,
    pub eval_manifest: Option<PathBuf>,
    /// Weak-label manifest whose positives and negatives augment training;
    /// defaults to the `build-corpus` output.
    pub mined_manifest: Option<PathBuf>,
}

impl Default for BinarySection {
    fn default() -> Self {
        BinarySection {
            positive_class: "happy".into(),
            negative_class: "fear".into(),
            train_manifest: None,
            eval_manifest: None,
            mined_manifest: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Tab-separated `token<TAB>valence` file; the built-in demo lexicon is
    /// used when absent.
    pub lexicon: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub inputs: Vec<InputPair>,
    #[serde(default)]
    pub cue_filter: CueFilterPolicy,
    #[serde(default)]
    pub labeling: LabelingPolicy,
    #[serde(default)]
    pub sentiment: SentimentSection,
    #[serde(default)]
    pub stft: StftConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub pretrain: PretrainSection,
    #[serde(default)]
    pub finetune: FinetuneSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub binary: BinarySection,
}

/// Set `dotted.key` in a TOML table. The value is parsed as a TOML value
/// and taken as a plain string if that fails.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| anyhow!("--set expects key=value, got {assignment:?}"))?;
    let key = key.trim();
    let value = parse_value(raw.trim());
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| anyhow!("empty key in --set {assignment:?}"))?;
    let mut table = doc;
    for part in parts {
        let entry = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| anyhow!("--set {key}: {part:?} is not a table"))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl PipelineConfig {
    /// Read, override, deserialize, validate, and make paths absolute
    /// relative to the config file's directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut doc: toml::Table = text.parse().with_context(|| format!("{} is not valid TOML", path.display()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let mut cfg: PipelineConfig =
            toml::Value::Table(doc).try_into().with_context(|| format!("invalid config {}", path.display()))?;
        cfg.validate()?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            self.cue_filter.validate(),
            self.labeling.validate(),
            self.stft.validate().map_err(|e| e.to_string()),
            self.train.validate(),
            self.split.validate(),
        ];
        for c in checks {
            c.map_err(|e| anyhow!(e))?;
        }
        if !(self.sentiment.alpha > 0.0 && self.sentiment.alpha.is_finite()) {
            bail!("sentiment.alpha must be positive");
        }
        for input in &self.inputs {
            if let Some(id) = &input.source_id {
                emomine::corpus::validate_source_id(id).map_err(|e| anyhow!(e))?;
            }
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let fix_opt = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                fix(p);
            }
        };
        fix_opt(&mut self.lexicon);
        fix(&mut self.output_dir);
        for input in &mut self.inputs {
            fix(&mut input.srt);
            fix(&mut input.wav);
        }
        fix_opt(&mut self.pretrain.manifest);
        fix_opt(&mut self.pretrain.model);
        fix_opt(&mut self.finetune.manifest);
        fix_opt(&mut self.finetune.pretrained_model);
        fix_opt(&mut self.finetune.model);
        fix_opt(&mut self.eval.manifest);
        fix_opt(&mut self.eval.model);
        fix_opt(&mut self.binary.train_manifest);
        fix_opt(&mut self.binary.eval_manifest);
        fix_opt(&mut self.binary.mined_manifest);
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.output_dir.join("corpus")
    }

    pub fn corpus_manifest(&self) -> PathBuf {
        self.pretrain.manifest.clone().unwrap_or_else(|| self.corpus_dir().join(MANIFEST_FILE_NAME))
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.output_dir.join("reports")
    }

    pub fn pretrained_model(&self) -> PathBuf {
        self.pretrain.model.clone().unwrap_or_else(|| self.output_dir.join("models").join("pretrained.emog"))
    }

    pub fn finetuned_model(&self) -> PathBuf {
        self.finetune.model.clone().unwrap_or_else(|| self.output_dir.join("models").join("finetuned.emog"))
    }

    /// Every manifest the config refers to, corpus first, without duplicates.
    pub fn manifests(&self) -> Vec<PathBuf> {
        let mut out = vec![self.corpus_manifest()];
        let extra = [&self.finetune.manifest, &self.eval.manifest, &self.binary.train_manifest, &self.binary.eval_manifest, &self.binary.mined_manifest];
        for p in extra.into_iter().flatten() {
            if !out.contains(p) {
                out.push(p.clone());
            }
        }
        out
    }
}
