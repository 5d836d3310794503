//! Pretraining on weak labels, head replacement, fine-tuning with early
//! stopping, and evaluation.

pub mod metrics;
pub mod report;

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{read_manifest, ManifestError};
use crate::features::{read_features, BandStats, FeatureError, Spectrogram};
use crate::neural::{evaluate_loss, init_head, init_params, train_epoch, AdamState, Dims, Example, GruParams, Model, NeuralError, TrainConfig};

pub use metrics::{ClassMetrics, MetricsReport};
pub use report::{EpochRecord, RunReport};

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("no training examples")]
    EmptyCorpus,
    #[error("training data holds a single class ({0})")]
    SingleClassCorpus(String),
    #[error("no evaluation examples")]
    EmptyEvalSet,
    #[error("the validation split is empty; every class needs at least two examples")]
    EmptyValidation,
    #[error("label {label:?} is not one of {space:?}")]
    UnknownLabel { label: String, space: Vec<String> },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Features { path: String, source: FeatureError },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

impl TransferError {
    /// Whether training diverged rather than the inputs being unusable.
    pub fn is_numerical(&self) -> bool {
        matches!(self, TransferError::Neural(NeuralError::NonFiniteLoss { .. }))
    }
}

/// Ordered class names of a classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelSpace {
    names: Vec<String>,
}

impl LabelSpace {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, TransferError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let unique: BTreeSet<&String> = names.iter().collect();
        if names.len() < 2 || unique.len() != names.len() || names.iter().any(|n| n.is_empty()) {
            return Err(TransferError::Config(format!("label space {names:?} needs two or more unique, non-empty names")));
        }
        Ok(LabelSpace { names })
    }

    /// Weak labels produced by corpus mining.
    pub fn pretrain() -> Self {
        LabelSpace::new(["positive", "negative", "neutral"]).expect("static labels")
    }

    /// Emotion categories for fine-tuning.
    pub fn finetune() -> Self {
        LabelSpace::new(["angry", "happy", "sad", "neutral"]).expect("static labels")
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Result<usize, TransferError> {
        self.names
            .iter()
            .position(|n| n == label)
            .ok_or_else(|| TransferError::UnknownLabel { label: label.to_string(), space: self.names.clone() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub validation_fraction: f64,
    pub rng_seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { validation_fraction: 0.10, rng_seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 0.5) {
            return Err("split.validation_fraction must lie in (0, 0.5)".into());
        }
        Ok(())
    }
}

/// Stratified split into sorted `(train, validation)` index lists.
///
/// Each class is shuffled with its own generator derived from the seed and
/// contributes `round(fraction * n)` examples to validation, at least one when
/// it has two or more examples and never all of them.
pub fn stratified_split(labels: &[usize], spec: &SplitSpec) -> (Vec<usize>, Vec<usize>) {
    let classes: BTreeSet<usize> = labels.iter().copied().collect();
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed.wrapping_mul(0x100_0000_01b3).wrapping_add(class as u64));
        members.shuffle(&mut rng);
        let n = members.len();
        let mut n_val = (spec.validation_fraction * n as f64).round() as usize;
        if n >= 2 {
            n_val = n_val.clamp(1, n - 1);
        } else {
            n_val = 0;
        }
        val.extend_from_slice(&members[..n_val]);
        train.extend_from_slice(&members[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Raw (unstandardized) features with a string label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    pub label: String,
    pub features: Spectrogram<f64>,
}

/// Read every manifest row's `.feat` file.
pub fn load_manifest_features(manifest: &Path) -> Result<Vec<LabeledFeatures>, TransferError> {
    let rows = read_manifest(manifest)?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    rows.iter()
        .map(|row| {
            let path = row.resolve_features(dir);
            let features = read_features::<f64>(&path)
                .map_err(|source| TransferError::Features { path: path.display().to_string(), source })?;
            Ok(LabeledFeatures { label: row.label.clone(), features })
        })
        .collect()
}

/// Map labels to class indices, failing on any label outside `space`.
pub fn encode_labels(data: &[LabeledFeatures], space: &LabelSpace) -> Result<Vec<usize>, TransferError> {
    data.iter().map(|d| space.index_of(&d.label)).collect()
}

/// Keep only the examples whose label is in `space`.
pub fn restrict_to(data: &[LabeledFeatures], space: &LabelSpace) -> Vec<LabeledFeatures> {
    data.iter().filter(|d| space.index_of(&d.label).is_ok()).cloned().collect()
}

/// Result of one early-stopped training run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: GruParams<f64>,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl FitResult {
    /// First epoch whose validation accuracy reached `threshold`.
    pub fn epochs_to_accuracy(&self, threshold: f64) -> Option<usize> {
        self.history.iter().find(|r| r.val_accuracy >= threshold).map(|r| r.epoch)
    }
}

/// Train until validation loss has not improved for `patience` epochs (or
/// `max_epochs` is reached) and return the parameters of the epoch with the
/// lowest validation loss.
pub fn fit(
    mut params: GruParams<f64>,
    train: &[Example<f64>],
    val: &[Example<f64>],
    cfg: &TrainConfig,
) -> Result<FitResult, TransferError> {
    cfg.validate().map_err(TransferError::Config)?;
    if train.is_empty() {
        return Err(TransferError::EmptyCorpus);
    }
    if val.is_empty() {
        return Err(TransferError::EmptyValidation);
    }
    let mut opt = AdamState::new(&params);
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, GruParams<f64>)> = None;
    let mut since_best = 0;
    for epoch in 1..=cfg.max_epochs {
        let train_loss = train_epoch(&mut params, &mut opt, train, cfg, epoch)?;
        let (val_loss, val_accuracy) = evaluate_loss(&params, val)?;
        if !val_loss.is_finite() {
            return Err(NeuralError::NonFiniteLoss { epoch }.into());
        }
        history.push(EpochRecord { epoch, train_loss, val_loss, val_accuracy });
        log::debug!("epoch {epoch}: train {train_loss:.5} val {val_loss:.5} acc {val_accuracy:.3}");
        if best.as_ref().is_none_or(|(l, _, _)| val_loss < *l) {
            best = Some((val_loss, epoch, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch ran");
    Ok(FitResult { params, history, best_epoch })
}

/// A trained classifier with its training record.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: Model<f64>,
    pub fit: FitResult,
    /// Metrics on the held-out validation split.
    pub validation: MetricsReport,
}

/// Where training starts from.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    /// Fresh parameters; standardization is fit on the training split.
    Scratch,
    /// Continue from a model whose label space matches the data; its
    /// standardization is kept.
    From(Box<Model<f64>>),
}

fn to_examples(data: &[LabeledFeatures], classes: &[usize], idx: &[usize], stats: &BandStats) -> Vec<Example<f64>> {
    idx.iter().map(|&i| Example { features: stats.apply(&data[i].features), label: classes[i] }).collect()
}

fn check_corpus(data: &[LabeledFeatures], classes: &[usize]) -> Result<(), TransferError> {
    if data.is_empty() {
        return Err(TransferError::EmptyCorpus);
    }
    let distinct: BTreeSet<usize> = classes.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(TransferError::SingleClassCorpus(data[0].label.clone()));
    }
    Ok(())
}

/// Split, standardize, and fit a classifier over `space` with early stopping.
/// `extra_train` examples join the training split only.
pub fn train_classifier(
    data: &[LabeledFeatures],
    extra_train: &[LabeledFeatures],
    space: &LabelSpace,
    start: Start,
    cfg: &TrainConfig,
    split: &SplitSpec,
) -> Result<TrainedModel, TransferError> {
    split.validate().map_err(TransferError::Config)?;
    cfg.validate().map_err(TransferError::Config)?;
    let classes = encode_labels(data, space)?;
    let extra_classes = encode_labels(extra_train, space)?;
    check_corpus(data, &classes)?;
    let n_bands = data[0].features.n_bands();
    if let Some(bad) = data.iter().chain(extra_train).find(|d| d.features.n_bands() != n_bands) {
        return Err(NeuralError::DimensionMismatch { expected: n_bands, got: bad.features.n_bands() }.into());
    }

    let (train_idx, val_idx) = stratified_split(&classes, split);
    let (params, stats) = match start {
        Start::Scratch => {
            let train_specs = train_idx.iter().map(|&i| &data[i].features).chain(extra_train.iter().map(|d| &d.features));
            let stats = BandStats::fit(train_specs).ok_or(TransferError::EmptyCorpus)?;
            let dims = Dims { inputs: n_bands, hidden: cfg.hidden_size, classes: space.len() };
            (init_params::<f64>(cfg.rng_seed, dims), stats)
        }
        Start::From(model) => {
            if model.labels != space.names() {
                return Err(TransferError::Config(format!(
                    "model labels {:?} do not match {:?}; replace the head first",
                    model.labels,
                    space.names()
                )));
            }
            let model = *model;
            (model.params, model.stats)
        }
    };

    let mut train = to_examples(data, &classes, &train_idx, &stats);
    let all_extra: Vec<usize> = (0..extra_train.len()).collect();
    train.extend(to_examples(extra_train, &extra_classes, &all_extra, &stats));
    let val = to_examples(data, &classes, &val_idx, &stats);

    let fit = fit(params, &train, &val, cfg)?;
    let model = Model::new(fit.params.clone(), space.names().to_vec(), stats)?;
    let truth: Vec<usize> = val.iter().map(|e| e.label).collect();
    let predicted = val
        .iter()
        .map(|e| crate::neural::forward(&model.params, &e.features).map(|s| crate::neural::argmax(&s.probs)))
        .collect::<Result<Vec<_>, _>>()?;
    let validation = MetricsReport::from_predictions(space.names(), &truth, &predicted);
    Ok(TrainedModel { model, fit, validation })
}

/// Train the weak-label classifier (positive / negative / neutral).
pub fn pretrain(data: &[LabeledFeatures], cfg: &TrainConfig, split: &SplitSpec) -> Result<TrainedModel, TransferError> {
    train_classifier(data, &[], &LabelSpace::pretrain(), Start::Scratch, cfg, split)
}

/// Swap the softmax head for a freshly initialized one over `space`. The
/// recurrent weights and standardization are copied unchanged.
pub fn replace_head(model: &Model<f64>, space: &LabelSpace, rng_seed: u64) -> Model<f64> {
    let mut params = model.params.clone();
    let (w, b) = init_head::<f64>(rng_seed, params.dims().hidden, space.len());
    params.head_w = w;
    params.head_b = b;
    Model { params, labels: space.names().to_vec(), stats: model.stats.clone() }
}

/// Fine-tune every parameter of `model` (head already replaced) on target
/// data labeled in the model's label space.
pub fn finetune(
    model: Model<f64>,
    data: &[LabeledFeatures],
    cfg: &TrainConfig,
    split: &SplitSpec,
) -> Result<TrainedModel, TransferError> {
    let space = LabelSpace::new(model.labels.clone())?;
    train_classifier(data, &[], &space, Start::From(Box::new(model)), cfg, split)
}

pub fn evaluate(model: &Model<f64>, data: &[LabeledFeatures]) -> Result<MetricsReport, TransferError> {
    if data.is_empty() {
        return Err(TransferError::EmptyEvalSet);
    }
    let space = LabelSpace::new(model.labels.clone())?;
    let truth = encode_labels(data, &space)?;
    let predicted = data.iter().map(|d| model.predict(&d.features)).collect::<Result<Vec<_>, _>>()?;
    Ok(MetricsReport::from_predictions(space.names(), &truth, &predicted))
}

/// A two-class target task, e.g. happy vs fear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinaryTask {
    pub positive_class: String,
    pub negative_class: String,
}

impl BinaryTask {
    pub fn name(&self) -> String {
        format!("{}_vs_{}", self.positive_class, self.negative_class)
    }

    pub fn space(&self) -> Result<LabelSpace, TransferError> {
        LabelSpace::new([self.positive_class.clone(), self.negative_class.clone()])
    }

    /// Mined positives become the positive class, mined negatives the
    /// negative class; neutral mined segments are unused.
    pub fn relabel_mined(&self, mined: &[LabeledFeatures]) -> Vec<LabeledFeatures> {
        mined
            .iter()
            .filter_map(|m| {
                let label = match m.label.as_str() {
                    "positive" => &self.positive_class,
                    "negative" => &self.negative_class,
                    _ => return None,
                };
                Some(LabeledFeatures { label: label.clone(), features: m.features.clone() })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryOutcome {
    pub baseline: TrainedModel,
    pub baseline_eval: MetricsReport,
    pub augmented: TrainedModel,
    pub augmented_eval: MetricsReport,
}

/// Train the task on the target data alone and again with relabeled mined
/// segments added to the training split; evaluate both on `target_eval`.
pub fn run_binary_task(
    task: &BinaryTask,
    target_train: &[LabeledFeatures],
    target_eval: &[LabeledFeatures],
    mined: &[LabeledFeatures],
    cfg: &TrainConfig,
    split: &SplitSpec,
) -> Result<BinaryOutcome, TransferError> {
    let space = task.space()?;
    let train = restrict_to(target_train, &space);
    let eval = restrict_to(target_eval, &space);
    if eval.is_empty() {
        return Err(TransferError::EmptyEvalSet);
    }
    let baseline = train_classifier(&train, &[], &space, Start::Scratch, cfg, split)?;
    let baseline_eval = evaluate(&baseline.model, &eval)?;
    let extra = task.relabel_mined(mined);
    let augmented = train_classifier(&train, &extra, &space, Start::Scratch, cfg, split)?;
    let augmented_eval = evaluate(&augmented.model, &eval)?;
    Ok(BinaryOutcome { baseline, baseline_eval, augmented, augmented_eval })
}
