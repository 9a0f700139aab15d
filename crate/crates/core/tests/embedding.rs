use tsc_spoiler_core::corpus::{TscRecord, VideoStream};
use tsc_spoiler_core::embedding::{build_vocab, train_skipgram, SkipGramConfig, PAD, UNK};
use tsc_spoiler_core::math::cosine;

fn corpus() -> Vec<VideoStream> {
    let a = ["apple", "banana", "cherry", "grape"];
    let b = ["engine", "piston", "gear", "clutch"];
    let mut records = Vec::new();
    for i in 0..400usize {
        let group = if i % 2 == 0 { &a } else { &b };
        let tokens: Vec<String> = (0..4).map(|k| group[(i / 2 + k * (i % 3 + 1)) % 4].to_string()).collect();
        records.push(TscRecord {
            video_id: "e".into(),
            timestamp: i as f64,
            raw_text: tokens.join(" "),
            tokens,
            label: None,
        });
    }
    vec![VideoStream::new("e".into(), records, None)]
}

#[test]
fn co_occurring_words_cluster() {
    let videos = corpus();
    let vocab = build_vocab(&videos, 1);
    assert_eq!(vocab.len(), 10);
    assert_eq!(vocab.id("<unk>"), UNK);
    assert_eq!(vocab.id("<pad>"), PAD);
    let cfg = SkipGramConfig {
        dim: 10,
        window: 3,
        epochs: 8,
        seed: 3,
        ..SkipGramConfig::default()
    };
    let run = train_skipgram(&videos, &vocab, &cfg).unwrap();
    assert!(run.epoch_losses.last().unwrap() < &run.epoch_losses[0]);
    let e = &run.embeddings;
    let sim = |x: &str, y: &str| cosine(e.row(vocab.id(x)), e.row(vocab.id(y)), 1e-8).unwrap();
    let within = [sim("apple", "banana"), sim("cherry", "grape"), sim("engine", "gear"), sim("piston", "clutch")];
    let across = [sim("apple", "engine"), sim("banana", "gear"), sim("cherry", "clutch"), sim("grape", "piston")];
    let w = within.iter().sum::<f64>() / 4.0;
    let x = across.iter().sum::<f64>() / 4.0;
    assert!(w > x + 0.3, "within {w} across {x}");
}

#[test]
fn training_is_deterministic_per_seed() {
    let videos = corpus();
    let vocab = build_vocab(&videos, 1);
    let cfg = SkipGramConfig { dim: 4, epochs: 1, ..SkipGramConfig::default() };
    let a = train_skipgram(&videos, &vocab, &cfg).unwrap();
    let b = train_skipgram(&videos, &vocab, &cfg).unwrap();
    assert_eq!(a.embeddings, b.embeddings);
    let c = train_skipgram(&videos, &vocab, &SkipGramConfig { seed: 99, ..cfg }).unwrap();
    assert_ne!(a.embeddings, c.embeddings);
}

#[test]
fn unknown_tokens_map_to_unk() {
    let vocab = build_vocab(&corpus(), 1);
    assert_eq!(vocab.encode(&["apple".into(), "zebra".into()])[1], UNK);
    let rare = build_vocab(&corpus(), 1000);
    assert_eq!(rare.len(), 2);
}
