use emomine::corpus::AudioBuffer;
use emomine::features::*;
use emomine_testkit::naive_dft;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[test]
fn fft_matches_naive_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let fft = RealFft::<f64>::new(1024).unwrap();
    for _ in 0..10 {
        let frame: Vec<f64> = (0..1024).map(|_| rng.sample(StandardNormal)).collect();
        let fast = fft.full_spectrum(&frame).unwrap();
        let slow = naive_dft(&frame);
        for (k, (f, (re, im))) in fast.iter().zip(&slow).enumerate() {
            assert!((f.re - re).abs() <= 1e-9 && (f.im - im).abs() <= 1e-9, "bin {k}: {f} vs {re}+{im}i");
        }
        let half = fft.process(&frame).unwrap();
        assert_eq!(half.len(), 513);
        assert!(frame_energy_check(&frame, &half));
    }
}

#[test]
fn parseval_relative_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let frame: Vec<f64> = (0..1024).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let spec = naive_dft(&frame);
    let time: f64 = frame.iter().map(|x| x * x).sum();
    let freq: f64 = spec.iter().map(|(r, i)| r * r + i * i).sum::<f64>() / 1024.0;
    let fast: f64 = RealFft::<f64>::new(1024).unwrap().full_spectrum(&frame).unwrap().iter().map(|c| c.norm_sqr()).sum::<f64>() / 1024.0;
    assert!(((time - freq) / time).abs() < 1e-6);
    assert!(((time - fast) / time).abs() < 1e-6);
}

#[test]
fn shape_law_over_random_lengths() {
    let cfg = StftConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..200 {
        let n: usize = if i < 5 { [1024, 1535, 1536, 1024 + 514 * 512, 1024 + 515 * 512][i] } else { rng.gen_range(1024..300_000) };
        let audio = AudioBuffer::new(vec![0.01; n], 16_000).unwrap();
        let spec = stft_bands::<f32>(&audio, &cfg).unwrap();
        let expected = ((n - 1024) / 512 + 1).min(515);
        assert_eq!(spec.valid_frames(), expected, "n = {n}");
        assert_eq!(spec.rows(), expected);
        assert_eq!(spec.n_bands(), 128);
    }
    let short = AudioBuffer::new(vec![0.0; 1023], 16_000).unwrap();
    assert!(matches!(stft_bands::<f32>(&short, &cfg), Err(FeatureError::TooShort { .. })));
}

#[test]
fn one_khz_tone_lands_in_its_band() {
    let cfg = StftConfig::default();
    // Analytic geometric edges: 60 * (8000/60)^(k/128).
    let band = (0..128)
        .find(|&k| {
            let lo = 60.0 * (8000.0f64 / 60.0).powf(k as f64 / 128.0);
            let hi = 60.0 * (8000.0f64 / 60.0).powf((k + 1) as f64 / 128.0);
            (lo..hi).contains(&1000.0)
        })
        .unwrap();
    let samples: Vec<f32> = (0..16_000).map(|i| (0.5 * (std::f64::consts::TAU * 1000.0 * i as f64 / 16_000.0).sin()) as f32).collect();
    let spec = stft_bands::<f64>(&AudioBuffer::new(samples, 16_000).unwrap(), &cfg).unwrap();
    for frame in spec.frames() {
        let argmax = (0..128).max_by(|&a, &b| frame[a].total_cmp(&frame[b])).unwrap();
        assert_eq!(argmax, band);
    }
}

#[test]
fn features_are_finite_and_cache_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let samples: Vec<f32> = (0..20_000).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    let spec = stft_bands::<f32>(&AudioBuffer::new(samples, 16_000).unwrap(), &StftConfig::default()).unwrap();
    assert!(spec.is_finite());
    assert!(spec.values().iter().all(|&v| v >= 0.0));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.feat");
    write_features(&path, &spec).unwrap();
    assert_eq!(read_features::<f32>(&path).unwrap(), spec);
    let raw = std::fs::read(&path).unwrap();
    assert_eq!(&raw[..4], b"EMOF");
    assert_eq!(raw.len(), 16 + spec.values().len() * 4);
    assert!(decode_features::<f32>(&raw[..raw.len() - 1]).is_err());
}

#[test]
fn silence_maps_to_zero_with_log_compression() {
    let spec = stft_bands::<f64>(&AudioBuffer::new(vec![0.0; 4096], 16_000).unwrap(), &StftConfig::default()).unwrap();
    assert!(spec.values().iter().all(|&v| v == 0.0));
}

#[test]
fn standardization_uses_unit_divisor_for_constant_bands() {
    let a = Spectrogram::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
    let stats = BandStats::fit([&a]).unwrap();
    assert_eq!(stats.mean, vec![2.0, 5.0]);
    assert_eq!(stats.std, vec![1.0, 1.0]);
    assert_eq!(stats.apply(&a).values(), &[-1.0, 0.0, 1.0, 0.0]);
}
