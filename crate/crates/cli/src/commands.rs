use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use emomine::corpus::{self, read_manifest, read_wav, CorpusError, CorpusPolicies, MovieInput};
use emomine::features::{stft_bands, write_features};
use emomine::neural::gradcheck::gradcheck as run_gradcheck;
use emomine::neural::{Model, NeuralError};
use emomine::sentiment::{load_lexicon, SentimentLexicon};
use emomine::transfer::{self, BinaryTask, LabelSpace, LabeledFeatures, RunReport, Start, TrainedModel, TransferError};
use rayon::prelude::*;

use crate::config::PipelineConfig;

pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_CONFIG, error: error.into() }
    }

    pub fn data(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_DATA, error: error.into() }
    }
}

impl From<TransferError> for Failure {
    fn from(e: TransferError) -> Self {
        let code = match &e {
            _ if e.is_numerical() => EXIT_NUMERICAL,
            TransferError::Config(_) => EXIT_CONFIG,
            _ => EXIT_DATA,
        };
        Failure { code, error: e.into() }
    }
}

fn load_lexicon_file(cfg: &PipelineConfig) -> Result<SentimentLexicon, Failure> {
    let Some(path) = &cfg.lexicon else {
        return Ok(SentimentLexicon::demo());
    };
    let raw = std::fs::read(path).with_context(|| format!("cannot read lexicon {}", path.display())).map_err(Failure::config)?;
    let (lex, dups) = load_lexicon(&raw).with_context(|| format!("lexicon {}", path.display())).map_err(Failure::config)?;
    for d in dups {
        log::warn!("{}: {d:?}", path.display());
    }
    Ok(lex)
}

pub fn build_corpus(cfg: &PipelineConfig) -> Result<(), Failure> {
    let lexicon = load_lexicon_file(cfg)?;
    if cfg.inputs.is_empty() {
        return Err(Failure::config(anyhow!("config lists no [[inputs]]")));
    }
    let movies = cfg
        .inputs
        .iter()
        .map(|i| MovieInput {
            srt: i.srt.clone(),
            wav: i.wav.clone(),
            source_id: i.source_id.clone().unwrap_or_else(|| {
                i.srt.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
            }),
        })
        .collect::<Vec<_>>();
    let policies = CorpusPolicies { cue_filter: cfg.cue_filter, labeling: cfg.labeling, sentiment_alpha: Some(cfg.sentiment.alpha) };
    let out_dir = cfg.corpus_dir();
    let outcome = match corpus::build_corpus(&movies, &lexicon, &policies, &out_dir) {
        Ok(o) => o,
        Err(CorpusError::Policy(m)) => return Err(Failure::config(anyhow!(m))),
        Err(CorpusError::NoSegments { diagnostics }) => {
            for d in &diagnostics {
                log::warn!("{}: {}", d.file.display(), d.reason);
            }
            return Err(Failure::data(anyhow!("no labeled segments were produced")));
        }
        Err(e) => return Err(Failure::data(e)),
    };
    for d in &outcome.diagnostics {
        log::warn!("{}{}: {}", d.file.display(), d.block.map(|b| format!(" block {b}")).unwrap_or_default(), d.reason);
    }
    let s = &outcome.summary;
    println!("positive {}", s.positive);
    println!("negative {}", s.negative);
    println!("neutral {}", s.neutral);
    println!("segments {}", outcome.segments.len());
    println!("manifest {}", outcome.manifest_path.display());
    Ok(())
}

fn is_fresh(feat: &Path, wav: &Path) -> bool {
    let modified = |p: &Path| std::fs::metadata(p).and_then(|m| m.modified()).ok();
    matches!((modified(feat), modified(wav)), (Some(f), Some(w)) if f >= w)
}

enum FeatOutcome {
    Computed,
    Cached,
    Failed(String),
}

pub fn featurize(cfg: &PipelineConfig, only: &[PathBuf]) -> Result<(), Failure> {
    let manifests: Vec<PathBuf> = if only.is_empty() {
        let existing: Vec<PathBuf> = cfg.manifests().into_iter().filter(|m| m.exists()).collect();
        if existing.is_empty() {
            return Err(Failure::data(anyhow!("no manifest found; run build-corpus first")));
        }
        existing
    } else {
        only.to_vec()
    };

    let mut jobs = Vec::new();
    for m in &manifests {
        let rows = read_manifest(m).with_context(|| format!("manifest {}", m.display())).map_err(Failure::data)?;
        let dir = m.parent().unwrap_or(Path::new(".")).to_path_buf();
        for row in rows {
            let (wav, feat) = (row.resolve_audio(&dir), row.resolve_features(&dir));
            if !jobs.iter().any(|(w, _): &(PathBuf, PathBuf)| *w == wav) {
                jobs.push((wav, feat));
            }
        }
    }

    let outcomes: Vec<FeatOutcome> = jobs
        .par_iter()
        .map(|(wav, feat)| {
            if is_fresh(feat, wav) {
                return FeatOutcome::Cached;
            }
            let result = std::fs::read(wav)
                .map_err(|e| e.to_string())
                .and_then(|raw| read_wav(&raw).map_err(|e| e.to_string()))
                .and_then(|audio| stft_bands::<f32>(&audio, &cfg.stft).map_err(|e| e.to_string()))
                .and_then(|spec| write_features(feat, &spec).map_err(|e| e.to_string()));
            match result {
                Ok(()) => FeatOutcome::Computed,
                Err(e) => FeatOutcome::Failed(format!("{}: {e}", wav.display())),
            }
        })
        .collect();

    let computed = outcomes.iter().filter(|o| matches!(o, FeatOutcome::Computed)).count();
    let cached = outcomes.iter().filter(|o| matches!(o, FeatOutcome::Cached)).count();
    let failed: Vec<&String> = outcomes.iter().filter_map(|o| if let FeatOutcome::Failed(m) = o { Some(m) } else { None }).collect();
    println!("{computed} computed, {cached} cached");
    if !failed.is_empty() {
        for f in &failed {
            eprintln!("{f}");
        }
        return Err(Failure::data(anyhow!("{} file(s) could not be featurized", failed.len())));
    }
    Ok(())
}

fn load_set(path: &Path) -> Result<Vec<LabeledFeatures>, Failure> {
    transfer::load_manifest_features(path).map_err(|e| {
        let hint = if matches!(e, TransferError::Features { .. }) { " (run featurize first)" } else { "" };
        Failure::data(anyhow!("{}: {e}{hint}", path.display()))
    })
}

fn required(path: &Option<PathBuf>, key: &str) -> Result<PathBuf, Failure> {
    path.clone().ok_or_else(|| Failure::config(anyhow!("config key {key} is required for this command")))
}

fn config_echo(cfg: &PipelineConfig) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

fn save_model(model: &Model<f64>, path: &Path) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display())).map_err(Failure::data)?;
    }
    model.save(path).with_context(|| format!("cannot write model {}", path.display())).map_err(Failure::data)
}

fn write_report(cfg: &PipelineConfig, report: &RunReport) -> Result<PathBuf, Failure> {
    let dir = cfg.reports_dir();
    std::fs::create_dir_all(&dir)
        .and_then(|()| report.write(&dir))
        .with_context(|| format!("cannot write report into {}", dir.display()))
        .map_err(Failure::data)
}

fn training_report(cfg: &PipelineConfig, task: &str, trained: &TrainedModel, started: Instant) -> RunReport {
    let mut report = RunReport::new(task, cfg.train.rng_seed, config_echo(cfg));
    report.epochs = trained.fit.history.clone();
    report.best_epoch = Some(trained.fit.best_epoch);
    report.add_metrics("validation", &trained.validation);
    report.add_timing("total", started.elapsed().as_secs_f64());
    report
}

fn print_training(trained: &TrainedModel, model_path: &Path, report_path: &Path) {
    println!("best epoch {}", trained.fit.best_epoch);
    println!("validation accuracy {:.4}", trained.validation.accuracy);
    println!("validation macro_f1 {:.4}", trained.validation.macro_f1);
    println!("model {}", model_path.display());
    println!("report {}", report_path.display());
}

pub fn pretrain(cfg: &PipelineConfig) -> Result<(), Failure> {
    let started = Instant::now();
    let data = load_set(&cfg.corpus_manifest())?;
    let trained = transfer::pretrain(&data, &cfg.train, &cfg.split)?;
    let path = cfg.pretrained_model();
    save_model(&trained.model, &path)?;
    let report = write_report(cfg, &training_report(cfg, "pretrain", &trained, started))?;
    print_training(&trained, &path, &report);
    Ok(())
}

pub fn finetune(cfg: &PipelineConfig, from_scratch: bool) -> Result<(), Failure> {
    let started = Instant::now();
    let space = match &cfg.finetune.labels {
        Some(names) => LabelSpace::new(names.clone())?,
        None => LabelSpace::finetune(),
    };
    let manifest = required(&cfg.finetune.manifest, "finetune.manifest")?;
    let (start, task) = if from_scratch {
        (Start::Scratch, "scratch")
    } else {
        let pre = cfg.finetune.pretrained_model.clone().unwrap_or_else(|| cfg.pretrained_model());
        if !pre.exists() {
            return Err(Failure::config(anyhow!(
                "no pretrained model at {}; run pretrain or pass --from-scratch",
                pre.display()
            )));
        }
        let model = Model::<f64>::load(&pre).with_context(|| format!("model {}", pre.display())).map_err(Failure::data)?;
        (Start::From(Box::new(transfer::replace_head(&model, &space, cfg.train.rng_seed))), "finetune")
    };
    let data = load_set(&manifest)?;
    let trained = transfer::train_classifier(&data, &[], &space, start, &cfg.train, &cfg.split)?;
    let path = cfg.finetuned_model();
    save_model(&trained.model, &path)?;
    let report = write_report(cfg, &training_report(cfg, task, &trained, started))?;
    print_training(&trained, &path, &report);
    Ok(())
}

pub fn eval(cfg: &PipelineConfig, model: Option<PathBuf>, manifest: Option<PathBuf>) -> Result<(), Failure> {
    let started = Instant::now();
    let model_path = model.or_else(|| cfg.eval.model.clone()).unwrap_or_else(|| cfg.finetuned_model());
    let manifest = match manifest {
        Some(m) => m,
        None => required(&cfg.eval.manifest, "eval.manifest")?,
    };
    let model = Model::<f64>::load(&model_path)
        .with_context(|| format!("model {}", model_path.display()))
        .map_err(|e| match e.downcast_ref::<NeuralError>() {
            Some(NeuralError::Io(_)) => Failure::config(e),
            _ => Failure::data(e),
        })?;
    let data = load_set(&manifest)?;
    let metrics = transfer::evaluate(&model, &data)?;
    let mut report = RunReport::new("eval", cfg.train.rng_seed, config_echo(cfg));
    report.add_metrics("eval", &metrics);
    report.add_timing("total", started.elapsed().as_secs_f64());
    write_report(cfg, &report)?;
    println!("accuracy: {:.4}", metrics.accuracy);
    println!("macro_f1: {:.4}", metrics.macro_f1);
    Ok(())
}

pub fn binary(cfg: &PipelineConfig, positive: Option<String>, negative: Option<String>) -> Result<(), Failure> {
    let started = Instant::now();
    let task = BinaryTask {
        positive_class: positive.unwrap_or_else(|| cfg.binary.positive_class.clone()),
        negative_class: negative.unwrap_or_else(|| cfg.binary.negative_class.clone()),
    };
    task.space()?;
    let train = load_set(&required(&cfg.binary.train_manifest, "binary.train_manifest")?)?;
    let eval = load_set(&required(&cfg.binary.eval_manifest, "binary.eval_manifest")?)?;
    let mined = load_set(&cfg.binary.mined_manifest.clone().unwrap_or_else(|| cfg.corpus_manifest()))?;
    let out = transfer::run_binary_task(&task, &train, &eval, &mined, &cfg.train, &cfg.split)?;

    let mut report = RunReport::new(task.name(), cfg.train.rng_seed, config_echo(cfg));
    report.epochs = out.augmented.fit.history.clone();
    report.best_epoch = Some(out.augmented.fit.best_epoch);
    report.add_metrics("baseline", &out.baseline_eval);
    report.add_metrics("augmented", &out.augmented_eval);
    report.add_timing("total", started.elapsed().as_secs_f64());
    let path = write_report(cfg, &report)?;
    println!("baseline accuracy {:.4}", out.baseline_eval.accuracy);
    println!("augmented accuracy {:.4}", out.augmented_eval.accuracy);
    println!("report {}", path.display());
    Ok(())
}

pub fn gradcheck(seed: u64, corrupt: Option<&str>) -> Result<(), Failure> {
    let report = run_gradcheck(seed, corrupt).map_err(Failure::config)?;
    for t in &report.tensors {
        println!("{:<8} {:.3e}", t.name, t.max_relative_error);
    }
    if report.passed() {
        println!("gradcheck passed (seed {seed})");
        Ok(())
    } else {
        let worst = report.worst();
        Err(Failure {
            code: EXIT_CHECK_FAILED,
            error: anyhow!("gradient check failed for {} (relative error {:.3e})", worst.name, worst.max_relative_error),
        })
    }
}
