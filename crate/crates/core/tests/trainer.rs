mod support;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tsc_spoiler_core::embedding::{build_vocab, EmbeddingMatrix};
use tsc_spoiler_core::matrix::Matrix;
use tsc_spoiler_core::model::{labeled_examples, prepare_videos, Example, ModelConfig, ModelParams, PreparedVideo};
use tsc_spoiler_core::optim::AdamConfig;
use tsc_spoiler_core::sbn::SbnOptions;
use tsc_spoiler_core::trainer::{beta_grid, split_examples, sweep_beta, train, Checkpoint, TrainConfig};
use tsc_spoiler_core::Error;

struct Fixture {
    videos: Vec<PreparedVideo>,
    examples: Vec<Example>,
    embeddings: EmbeddingMatrix,
    cfg: TrainConfig,
}

fn fixture() -> Fixture {
    let raw = support::tiny_videos(21, 3, 8);
    let vocab = build_vocab(&raw, 1);
    let cfg = TrainConfig {
        model: ModelConfig {
            hidden_dim: 3,
            neighbors: 3,
            keyframes: 2,
            sbn: SbnOptions::sbn_iva(0.15),
            ..ModelConfig::default()
        },
        adam: AdamConfig { lr: 0.05, ..AdamConfig::default() },
        epochs: 25,
        batch_size: 8,
        patience: 100,
        ..TrainConfig::default()
    };
    let (videos, _) = prepare_videos(&raw, &vocab, &cfg.model).unwrap();
    let examples: Vec<Example> = labeled_examples(&videos).into_iter().flatten().filter(|e| e.index > 0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let embeddings = EmbeddingMatrix(Matrix::uniform(vocab.len(), 4, 1.0, &mut rng));
    Fixture {
        videos,
        examples,
        embeddings,
        cfg,
    }
}

#[test]
fn zero_epochs_returns_the_initialization() {
    let f = fixture();
    let cfg = TrainConfig { epochs: 0, ..f.cfg.clone() };
    let ck = train(&f.videos, &f.examples, &[], f.embeddings.clone(), &cfg).unwrap();
    assert_eq!(ck.epoch, 0);
    assert_eq!(ck.history.len(), 1);
    assert_eq!(ck.params, ModelParams::init(f.embeddings, 3, cfg.seed));
}

#[test]
fn loss_decreases_on_a_small_set() {
    let f = fixture();
    assert!(f.examples.len() >= 20);
    let ck = train(&f.videos, &f.examples[..20], &[], f.embeddings.clone(), &f.cfg).unwrap();
    let first = ck.history[0].train_loss;
    let last = ck.history.last().unwrap().train_loss;
    assert!(last < 0.8 * first, "loss {first} -> {last}");
    assert_eq!(ck.epoch, f.cfg.epochs);
}

#[test]
fn frozen_embeddings_stay_put() {
    let f = fixture();
    let cfg = TrainConfig { epochs: 3, ..f.cfg.clone() };
    let ck = train(&f.videos, &f.examples, &[], f.embeddings.clone(), &cfg).unwrap();
    assert_eq!(ck.params.embeddings, f.embeddings);
    let cfg = TrainConfig { freeze_embeddings: false, ..cfg };
    let ck = train(&f.videos, &f.examples, &[], f.embeddings.clone(), &cfg).unwrap();
    assert_ne!(ck.params.embeddings, f.embeddings);
}

#[test]
fn training_is_reproducible_and_round_trips() {
    let f = fixture();
    let cfg = TrainConfig { epochs: 4, ..f.cfg.clone() };
    let (tr, va) = f.examples.split_at(18);
    let a = train(&f.videos, tr, va, f.embeddings.clone(), &cfg).unwrap();
    let b = train(&f.videos, tr, va, f.embeddings.clone(), &cfg).unwrap();
    assert_eq!(a, b);
    let json = serde_json::to_string(&a).unwrap();
    let back: Checkpoint = serde_json::from_str(&json).unwrap();
    assert_eq!(back, a);
    assert!(a.validation().is_some());
}

#[test]
fn early_stopping_keeps_the_best_epoch() {
    let f = fixture();
    let cfg = TrainConfig { patience: 2, epochs: 30, ..f.cfg.clone() };
    let (tr, va) = f.examples.split_at(16);
    let ck = train(&f.videos, tr, va, f.embeddings.clone(), &cfg).unwrap();
    let best = ck.validation().unwrap().f1;
    for r in &ck.history {
        assert!(r.validation.unwrap().f1 <= best);
    }
    // Stopped within `patience` epochs of the retained one.
    assert!(ck.history.last().unwrap().epoch <= ck.epoch + 2);
}

#[test]
fn invalid_inputs_are_rejected() {
    let f = fixture();
    let only_first = [Example { video: 0, index: 0 }];
    assert!(matches!(
        train(&f.videos, &only_first, &[], f.embeddings.clone(), &f.cfg),
        Err(Error::EmptyTrainingSet)
    ));
    let bad = TrainConfig { batch_size: 0, ..f.cfg.clone() };
    assert!(train(&f.videos, &f.examples, &[], f.embeddings.clone(), &bad).is_err());
    assert!(sweep_beta(&f.videos, &f.examples, &[], &f.embeddings, &[0.1], &f.cfg).is_err());
    assert!(sweep_beta(&f.videos, &f.examples, &f.examples, &f.embeddings, &[], &f.cfg).is_err());
}

#[test]
fn sweep_reports_one_point_per_distinct_beta() {
    let f = fixture();
    let cfg = TrainConfig { epochs: 2, ..f.cfg.clone() };
    let (tr, va) = f.examples.split_at(16);
    let betas = [0.0, 0.2, 0.2, 0.4];
    let s = sweep_beta(&f.videos, tr, va, &f.embeddings, &betas, &cfg).unwrap();
    assert_eq!(s.curve.iter().map(|p| p.beta).collect::<Vec<_>>(), vec![0.0, 0.2, 0.4]);
    let max = s.curve.iter().map(|p| p.f1).fold(f64::MIN, f64::max);
    let first_max = s.curve.iter().find(|p| p.f1 == max).unwrap().beta;
    assert_eq!(s.best_beta, first_max);
    assert_eq!(beta_grid(0.0, 0.5, 0.05).unwrap().len(), 11);
}

#[test]
fn split_keeps_every_example_once() {
    let f = fixture();
    let groups = labeled_examples(&f.videos);
    let total: usize = groups.iter().map(Vec::len).sum();
    let s = split_examples(&groups, 4).unwrap();
    let mut all: Vec<Example> = s.train.iter().chain(&s.test).chain(&s.validation).copied().collect();
    all.sort();
    all.dedup();
    assert_eq!(all.len(), total);
    assert_eq!(split_examples(&groups, 4).unwrap(), s);
}
