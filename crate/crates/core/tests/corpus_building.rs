use std::path::Path;

use emomine::corpus::*;
use emomine::sentiment::SentimentLexicon;
use emomine_testkit::write_fixture_movie;

fn movies(dir: &Path) -> Vec<MovieInput> {
    ["m1", "m2", "m3"]
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let (srt, wav) = write_fixture_movie(dir, id, 24, i as u64);
            MovieInput { srt, wav, source_id: id.to_string() }
        })
        .collect()
}

fn policies(seed: u64) -> CorpusPolicies {
    CorpusPolicies { labeling: LabelingPolicy { rng_seed: seed, ..LabelingPolicy::default() }, ..CorpusPolicies::default() }
}

#[test]
fn builds_labeled_segments_and_manifest() {
    let inputs = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let movies = movies(inputs.path());
    let outcome = build_corpus(&movies, &SentimentLexicon::demo(), &policies(1), out.path()).unwrap();
    let s = &outcome.summary;
    assert_eq!(s.movies, 3);
    assert_eq!(s.cues_parsed, 72);
    assert!(s.positive > 0 && s.negative > 0);
    assert_eq!(s.neutral, ((s.positive + s.negative) / 2).min(s.neutral_candidates));

    let rows = read_manifest(&outcome.manifest_path).unwrap();
    assert_eq!(rows.len(), s.positive + s.negative + s.neutral);
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| (&a.source_id, a.start_ms, a.end_ms).cmp(&(&b.source_id, b.start_ms, b.end_ms)));
    assert_eq!(rows, sorted);
    for row in &rows {
        let audio = read_wav(&std::fs::read(row.resolve_audio(out.path())).unwrap()).unwrap();
        assert_eq!(audio.len() as u64, ms_to_sample(row.end_ms, 16_000) - ms_to_sample(row.start_ms, 16_000));
        match row.label.as_str() {
            "positive" => assert!(row.score > 0.7),
            "negative" => assert!(row.score < -0.6),
            "neutral" => assert!(row.score.abs() <= 0.05),
            other => panic!("unexpected label {other}"),
        }
    }
}

#[test]
fn identical_runs_give_identical_manifests() {
    let inputs = tempfile::tempdir().unwrap();
    let movies = movies(inputs.path());
    let run = |seed| {
        let out = tempfile::tempdir().unwrap();
        build_corpus(&movies, &SentimentLexicon::demo(), &policies(seed), out.path()).unwrap();
        std::fs::read(out.path().join(MANIFEST_FILE_NAME)).unwrap()
    };
    let a = run(3);
    assert_eq!(a, run(3));
    assert!(a.starts_with(b"source_id,start_ms,end_ms,label,score,audio_path,text\n"));
}

#[test]
fn movie_order_does_not_matter() {
    let inputs = tempfile::tempdir().unwrap();
    let mut movies = movies(inputs.path());
    let a = tempfile::tempdir().unwrap();
    build_corpus(&movies, &SentimentLexicon::demo(), &policies(4), a.path()).unwrap();
    movies.reverse();
    let b = tempfile::tempdir().unwrap();
    build_corpus(&movies, &SentimentLexicon::demo(), &policies(4), b.path()).unwrap();
    assert_eq!(std::fs::read(a.path().join(MANIFEST_FILE_NAME)).unwrap(), std::fs::read(b.path().join(MANIFEST_FILE_NAME)).unwrap());
}

#[test]
fn bad_movie_is_skipped_with_a_diagnostic() {
    let inputs = tempfile::tempdir().unwrap();
    let mut movies = movies(inputs.path());
    let broken = inputs.path().join("broken.srt");
    std::fs::write(&broken, b"\xff\xfe garbage").unwrap();
    movies.push(MovieInput { srt: broken, wav: movies[0].wav.clone(), source_id: "broken".into() });
    let out = tempfile::tempdir().unwrap();
    let outcome = build_corpus(&movies, &SentimentLexicon::demo(), &policies(1), out.path()).unwrap();
    assert_eq!(outcome.summary.movies_skipped, 1);
    assert!(outcome.diagnostics.iter().any(|d| d.file.ends_with("broken.srt")));
}

#[test]
fn duplicate_ids_and_empty_results_are_errors() {
    let inputs = tempfile::tempdir().unwrap();
    let mut movies = movies(inputs.path());
    movies[1].source_id = "m1".into();
    let out = tempfile::tempdir().unwrap();
    assert!(matches!(build_corpus(&movies, &SentimentLexicon::demo(), &policies(1), out.path()), Err(CorpusError::Policy(_))));

    let strict = CorpusPolicies {
        cue_filter: emomine::srt::CueFilterPolicy { max_chars: 100, min_words: 50 },
        ..CorpusPolicies::default()
    };
    let out = tempfile::tempdir().unwrap();
    assert!(matches!(build_corpus(&movies[..1], &SentimentLexicon::demo(), &strict, out.path()), Err(CorpusError::NoSegments { .. })));
}
