//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use emomine::corpus::{assign_label, AudioBuffer, LabelingPolicy, WeakLabel};
use emomine::features::{frame_energy_check, stft_bands, RealFft, StftConfig};
use emomine::neural::{forward, init_params, Dims, TrainConfig};
use emomine::sentiment::{score_text, SentimentLexicon, SentimentScore, DEFAULT_ALPHA};
use emomine::srt::parse_srt;
use emomine::synth::{self, corrupt_labels, finetune_classes, generate, pretrain_classes, write_corpus, SynthConfig};
use emomine::transfer::{self, MetricsReport, SplitSpec};
use emomine_testkit::{brute_force_score, golden_srt_cases, naive_dft, naive_forward, random_sentence, write_fixture_movie};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn emomine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emomine")).args(args).env("RUST_LOG", "error").output().expect("run emomine")
}

fn run_ok(args: &[&str]) -> Result<String, String> {
    let out = emomine(args);
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!("`emomine {}` exited {:?}: {}", args.join(" "), out.status.code(), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    ensure(elapsed <= Duration::from_secs(limit_s), format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64()))
}

fn gradient_correctness() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let out = run_ok(&["gradcheck", "--seed", &seed.to_string()])?;
        for line in out.lines().filter(|l| !l.starts_with("gradcheck")) {
            let err: f64 = line.split_whitespace().nth(1).and_then(|v| v.parse().ok()).ok_or(format!("bad line {line:?}"))?;
            worst = worst.max(err);
        }
    }
    ensure(worst < 1e-4, format!("worst relative error {worst:.3e}"))?;
    within(start.elapsed(), 60)?;
    Ok(format!("10/10 seeds, worst relative error {worst:.2e}, {:.1}s", start.elapsed().as_secs_f64()))
}

fn forward_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let dims = Dims { inputs: rng.gen_range(1..16), hidden: rng.gen_range(1..12), classes: rng.gen_range(2..6) };
        let mut params = init_params::<f64>(seed, dims);
        params.head_b.iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
        let steps = rng.gen_range(1..40);
        let rows: Vec<Vec<f64>> = (0..steps).map(|_| (0..dims.inputs).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let spec = emomine::features::Spectrogram::from_rows(&rows).map_err(|e| e.to_string())?;
        let fast = forward(&params, &spec).map_err(|e| e.to_string())?.probs;
        for (a, b) in fast.iter().zip(naive_forward(&params, &rows)) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-10, format!("max deviation {worst:.3e}"))?;
    Ok(format!("20 instances, max deviation {worst:.2e}"))
}

fn dft_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let fft = RealFft::<f64>::new(1024).map_err(|e| e.to_string())?;
    let (mut worst, mut worst_parseval) = (0.0f64, 0.0f64);
    for _ in 0..10 {
        let frame: Vec<f64> = (0..1024).map(|_| rng.sample(StandardNormal)).collect();
        let fast = fft.full_spectrum(&frame).map_err(|e| e.to_string())?;
        for (f, (re, im)) in fast.iter().zip(naive_dft(&frame)) {
            worst = worst.max((f.re - re).abs()).max((f.im - im).abs());
        }
        let time: f64 = frame.iter().map(|x| x * x).sum();
        let freq: f64 = fast.iter().map(|c| c.norm_sqr()).sum::<f64>() / 1024.0;
        worst_parseval = worst_parseval.max(((time - freq) / time).abs());
        ensure(frame_energy_check(&frame, &fft.process(&frame).map_err(|e| e.to_string())?), "one-sided energy check failed")?;
    }
    ensure(worst <= 1e-9, format!("max coefficient error {worst:.3e}"))?;
    ensure(worst_parseval < 1e-6, format!("Parseval relative error {worst_parseval:.3e}"))?;
    Ok(format!("10 frames, max coefficient error {worst:.2e}, Parseval {worst_parseval:.2e}"))
}

fn shape_law() -> Check {
    let cfg = StftConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..200 {
        let n: usize = rng.gen_range(1024..400_000);
        let spec = stft_bands::<f32>(&AudioBuffer::new(vec![0.0; n], 16_000).map_err(|e| e.to_string())?, &cfg).map_err(|e| e.to_string())?;
        let expected = ((n - 1024) / 512 + 1).min(515);
        ensure(spec.valid_frames() == expected && spec.n_bands() == 128, format!("n={n}: got {} frames", spec.valid_frames()))?;
    }
    let band = (0..128)
        .find(|&k| {
            let edge = |k: usize| 60.0 * (8000.0f64 / 60.0).powf(k as f64 / 128.0);
            edge(k) <= 1000.0 && 1000.0 < edge(k + 1)
        })
        .ok_or("no band holds 1 kHz")?;
    let tone: Vec<f32> = (0..16_000).map(|i| (0.5 * (std::f64::consts::TAU * 1000.0 * i as f64 / 16_000.0).sin()) as f32).collect();
    let spec = stft_bands::<f64>(&AudioBuffer::new(tone, 16_000).map_err(|e| e.to_string())?, &cfg).map_err(|e| e.to_string())?;
    for frame in spec.frames() {
        let argmax = (0..128).max_by(|&a, &b| frame[a].total_cmp(&frame[b])).unwrap_or(0);
        ensure(argmax == band, format!("1 kHz peak in band {argmax}, expected {band}"))?;
    }
    Ok(format!("200 random lengths; 1 kHz tone peaks in band {band} in all {} frames", spec.valid_frames()))
}

fn srt_parser() -> Check {
    let cases = golden_srt_cases();
    for (name, raw, expected) in &cases {
        let parsed = parse_srt(raw).map_err(|e| format!("{name}: {e}"))?;
        let got: Vec<(u32, u64, u64, String)> = parsed.cues.iter().map(|c| (c.index, c.start_ms, c.end_ms, c.text.clone())).collect();
        ensure(got == expected.cues && parsed.warnings.len() == expected.warnings, format!("golden file {name} differs"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let alphabet = b"0123456789:,.-> \n\r<>ab\xef\xbb\xbf";
    let prev = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut crashes = 0;
    for i in 0..10_000 {
        let len = rng.gen_range(0..512);
        let bytes: Vec<u8> = if i % 2 == 0 {
            (0..len).map(|_| rng.gen()).collect()
        } else {
            (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
        };
        crashes += usize::from(catch_unwind(|| parse_srt(&bytes)).is_err());
    }
    std::panic::set_hook(prev);
    ensure(crashes == 0, format!("{crashes} crashes in fuzz run"))?;
    Ok(format!("{} golden files; 10000 fuzz inputs, 0 crashes", cases.len()))
}

fn sentiment_oracle() -> Check {
    let lex = SentimentLexicon::demo();
    let mut entries: Vec<(String, f64)> = lex.tokens().map(|(t, v)| (t.to_string(), v)).collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let vocab: Vec<String> = entries.iter().map(|e| e.0.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let s = random_sentence(&mut rng, &vocab);
        worst = worst.max((score_text(&s, &lex).value() - brute_force_score(&s, &entries, DEFAULT_ALPHA)).abs());
    }
    ensure(worst <= 1e-12, format!("max deviation {worst:.3e}"))?;
    let policy = LabelingPolicy::default();
    for i in 0..=200_000 {
        let s = -1.0 + i as f64 * 1e-5;
        let regions = [s > 0.7, s < -0.6, s.abs() <= 0.05];
        ensure(regions.iter().filter(|r| **r).count() <= 1, format!("overlapping regions at {s}"))?;
        let ok = match assign_label(SentimentScore(s), &policy) {
            Some(WeakLabel::Positive) => regions[0],
            Some(WeakLabel::Negative) => regions[1],
            Some(WeakLabel::Neutral) => regions[2],
            None => !regions.iter().any(|r| *r),
        };
        ensure(ok, format!("score {s} labeled outside its region"))?;
    }
    Ok(format!("1000 sentences, max deviation {worst:.2e}; label regions disjoint on 200001 scores"))
}

fn corpus_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut config = String::from("output_dir = \"run1\"\n");
    for (i, id) in ["m1", "m2", "m3"].iter().enumerate() {
        write_fixture_movie(dir.path(), id, 40, i as u64);
        config.push_str(&format!("\n[[inputs]]\nsrt = \"{id}.srt\"\nwav = \"{id}.wav\"\n"));
    }
    config.push_str("\n[labeling]\nrng_seed = 17\n");
    let path = dir.path().join("emomine.toml");
    std::fs::write(&path, config).map_err(|e| e.to_string())?;
    let c = path.to_str().ok_or("path")?;
    run_ok(&["build-corpus", "-c", c])?;
    run_ok(&["build-corpus", "-c", c, "--set", "output_dir=run2"])?;
    let a = std::fs::read(dir.path().join("run1/corpus/manifest.csv")).map_err(|e| e.to_string())?;
    let b = std::fs::read(dir.path().join("run2/corpus/manifest.csv")).map_err(|e| e.to_string())?;
    ensure(a == b, "manifests differ")?;
    let rows = a.iter().filter(|&&c| c == b'\n').count() - 1;
    ensure(rows > 0, "empty manifest")?;
    Ok(format!("two runs, {rows}-row manifests byte-identical"))
}

fn synthetic_pretraining() -> Check {
    let start = Instant::now();
    let stft = StftConfig::default();
    let data = synth::labeled_features(&pretrain_classes(), 100, &SynthConfig::default(), &stft, 106).map_err(|e| e.to_string())?;
    let held_out = synth::labeled_features(&pretrain_classes(), 50, &SynthConfig::default(), &stft, 107).map_err(|e| e.to_string())?;
    let cfg = TrainConfig { max_epochs: 50, rng_seed: 106, ..TrainConfig::default() };
    let trained = transfer::pretrain(&data, &cfg, &SplitSpec { validation_fraction: 0.1, rng_seed: 106 }).map_err(|e| e.to_string())?;
    let acc = transfer::evaluate(&trained.model, &held_out).map_err(|e| e.to_string())?.accuracy;
    ensure(trained.fit.history.len() <= 50, "more than 50 epochs")?;
    ensure(acc >= 0.90, format!("held-out accuracy {acc:.3}"))?;
    within(start.elapsed(), 300)?;
    Ok(format!(
        "300 utterances, held-out accuracy {acc:.3} (validation {:.3}, best epoch {}), {:.1}s",
        trained.validation.accuracy,
        trained.fit.best_epoch,
        start.elapsed().as_secs_f64()
    ))
}

fn read_report(path: &Path) -> Result<serde_json::Value, String> {
    let raw = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_slice(&raw).map_err(|e| e.to_string())
}

fn epochs_to(report: &serde_json::Value, threshold: f64, cap: usize) -> usize {
    report["epochs"]
        .as_array()
        .and_then(|e| e.iter().find(|r| r["val_accuracy"].as_f64().unwrap_or(0.0) >= threshold))
        .and_then(|r| r["epoch"].as_u64())
        .map_or(cap + 1, |e| e as usize)
}

fn median(v: &mut [usize]) -> usize {
    v.sort_unstable();
    v[v.len() / 2]
}

/// One seed of the paired experiment, run through the command-line tool.
fn transfer_seed(root: &Path, seed: u64) -> Result<(usize, usize, f64, f64), String> {
    let dir = root.join(format!("seed{seed}"));
    let clean = SynthConfig::default();
    let noisy = SynthConfig { snr_db: -5.0, ..clean };
    let write = |name: &str, items: &[(String, AudioBuffer)]| -> Result<PathBuf, String> {
        write_corpus(&dir.join(name), name, items).map_err(|e| e.to_string())
    };
    write("pre", &generate(&pretrain_classes(), 100, &clean, 100 + seed).map_err(|e| e.to_string())?)?;
    write("target", &generate(&finetune_classes(), 30, &clean, 200 + seed).map_err(|e| e.to_string())?)?;
    let mut small = generate(&finetune_classes(), 8, &noisy, 300 + seed).map_err(|e| e.to_string())?;
    let names: Vec<String> = finetune_classes().into_iter().map(|c| c.label).collect();
    corrupt_labels(small.iter_mut().map(|(l, _)| l), &names, 0.2, seed);
    write("btrain", &small)?;
    write("beval", &generate(&finetune_classes(), 50, &noisy, 400 + seed).map_err(|e| e.to_string())?)?;

    let config = format!(
        "output_dir = \"out\"\n\n[pretrain]\nmanifest = \"pre/manifest.csv\"\n\n[finetune]\nmanifest = \"target/manifest.csv\"\n\n\
         [binary]\npositive_class = \"happy\"\nnegative_class = \"angry\"\ntrain_manifest = \"btrain/manifest.csv\"\n\
         eval_manifest = \"beval/manifest.csv\"\nmined_manifest = \"pre/manifest.csv\"\n\n\
         [train]\nmax_epochs = 50\nrng_seed = {seed}\n\n[split]\nvalidation_fraction = 0.25\nrng_seed = {seed}\n"
    );
    let path = dir.join("emomine.toml");
    std::fs::write(&path, config).map_err(|e| e.to_string())?;
    let c = path.to_str().ok_or("path")?;
    run_ok(&["featurize", "-c", c])?;
    run_ok(&["pretrain", "-c", c])?;
    run_ok(&["finetune", "-c", c])?;
    run_ok(&["finetune", "-c", c, "--from-scratch"])?;
    run_ok(&["binary", "-c", c])?;

    let reports = dir.join("out/reports");
    let ft = epochs_to(&read_report(&reports.join(format!("finetune_{seed}.report.json")))?, 0.80, 50);
    let sc = epochs_to(&read_report(&reports.join(format!("scratch_{seed}.report.json")))?, 0.80, 50);
    let bin = read_report(&reports.join(format!("happy_vs_angry_{seed}.report.json")))?;
    let acc = |k: &str| bin["metrics"][k]["accuracy"].as_f64().ok_or(format!("missing {k} accuracy"));
    Ok((ft, sc, acc("baseline")?, acc("augmented")?))
}

fn transfer_benefit() -> Check {
    let start = Instant::now();
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (mut ft, mut sc, mut wins, mut detail) = (Vec::new(), Vec::new(), 0, Vec::new());
    for seed in 0..5 {
        let (f, s, base, aug) = transfer_seed(root.path(), seed)?;
        ft.push(f);
        sc.push(s);
        wins += usize::from(aug >= base);
        detail.push(format!("{base:.2}->{aug:.2}"));
    }
    let (ft_med, sc_med) = (median(&mut ft), median(&mut sc));
    ensure(ft_med < sc_med, format!("median epochs to 0.80: pretrained {ft_med}, scratch {sc_med}"))?;
    ensure(wins >= 3, format!("augmented >= baseline in {wins}/5 seeds ({})", detail.join(", ")))?;
    within(start.elapsed(), 600)?;
    Ok(format!(
        "median epochs to 0.80: pretrained {ft_med} vs scratch {sc_med}; augmented >= baseline in {wins}/5 ({}); {:.1}s",
        detail.join(", "),
        start.elapsed().as_secs_f64()
    ))
}

fn metrics_hand_example() -> Check {
    let labels = vec!["a".to_string(), "b".to_string()];
    let truth: Vec<usize> = (0..100).map(|i| i % 2).collect();
    let m = MetricsReport::from_predictions(&labels, &truth, &[0; 100]);
    ensure(m.accuracy == 0.5, format!("accuracy {}", m.accuracy))?;
    ensure(m.macro_f1 == (2.0 / 3.0 + 0.0) / 2.0, format!("macro F1 {}", m.macro_f1))?;
    Ok(format!("accuracy {}, macro F1 {}", m.accuracy, m.macro_f1))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("gradient correctness", gradient_correctness),
        ("forward oracle", forward_oracle),
        ("DFT oracle", dft_oracle),
        ("spectrogram shape law", shape_law),
        ("SRT parser", srt_parser),
        ("sentiment oracle", sentiment_oracle),
        ("corpus determinism", corpus_determinism),
        ("synthetic pretraining", synthetic_pretraining),
        ("transfer benefit", transfer_benefit),
        ("metrics", metrics_hand_example),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
