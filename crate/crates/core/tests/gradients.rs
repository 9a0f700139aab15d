mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsc_spoiler_core::embedding::{build_vocab, EmbeddingMatrix};
use tsc_spoiler_core::matrix::Matrix;
use tsc_spoiler_core::model::{labeled_examples, prepare_videos, Example, ModelConfig, ModelParams, GROUP_NAMES};
use tsc_spoiler_core::sbn::SbnOptions;
use tsc_spoiler_core::trainer::batch_gradients;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn check(seed: u64, sbn: SbnOptions) {
    let videos = support::tiny_videos(seed, 2, 7);
    let vocab = build_vocab(&videos, 1);
    let cfg = ModelConfig {
        hidden_dim: 2,
        neighbors: 3,
        keyframes: 2,
        sbn,
        ..ModelConfig::default()
    };
    let (prepared, excluded) = prepare_videos(&videos, &vocab, &cfg).unwrap();
    assert!(excluded.is_empty());
    let batch: Vec<Example> = labeled_examples(&prepared)
        .into_iter()
        .flatten()
        .filter(|e| e.index > 0)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let emb = EmbeddingMatrix(Matrix::uniform(vocab.len(), 3, 1.0, &mut rng));
    let params = ModelParams::init(emb, cfg.hidden_dim, seed);

    let (_, grads) = batch_gradients(&params, &cfg, &prepared, &batch, true).unwrap();
    let loss_at = |p: &ModelParams| batch_gradients(p, &cfg, &prepared, &batch, true).unwrap().0;
    for (g, name) in GROUP_NAMES.iter().enumerate() {
        let len = params.groups()[g].len();
        // A handful of coordinates per group keeps the suite fast.
        let picks: Vec<usize> = (0..6).map(|_| rng.gen_range(0..len)).collect();
        for k in picks {
            let mut plus = params.clone();
            plus.groups_mut()[g][k] += STEP;
            let mut minus = params.clone();
            minus.groups_mut()[g][k] -= STEP;
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * STEP);
            let analytic = grads[g][k];
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-5);
            assert!(
                rel < TOL,
                "seed {seed} group {name}[{k}]: analytic {analytic} numeric {numeric}"
            );
        }
    }
}

#[test]
fn sbn_iva_gradients_match_finite_differences() {
    for seed in 0..8 {
        check(seed, SbnOptions::sbn_iva(0.15));
    }
}

#[test]
fn sbn_gradients_match_finite_differences() {
    for seed in 8..14 {
        check(seed, SbnOptions::sbn(0.3));
    }
}

#[test]
fn renormalized_and_uniform_variants_match_finite_differences() {
    for seed in 14..17 {
        check(seed, SbnOptions { renormalize_iva: true, ..SbnOptions::sbn_iva(0.1) });
    }
    for seed in 17..20 {
        check(seed, SbnOptions::sbn_wt());
    }
}

#[test]
fn frozen_embeddings_get_no_gradient() {
    let videos = support::tiny_videos(1, 1, 6);
    let vocab = build_vocab(&videos, 1);
    let cfg = ModelConfig { hidden_dim: 2, neighbors: 2, ..ModelConfig::default() };
    let (prepared, _) = prepare_videos(&videos, &vocab, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = ModelParams::init(EmbeddingMatrix(Matrix::uniform(vocab.len(), 3, 1.0, &mut rng)), 2, 1);
    let batch = vec![Example { video: 0, index: 3 }];
    let (_, grads) = batch_gradients(&params, &cfg, &prepared, &batch, false).unwrap();
    assert!(grads[0].iter().all(|&g| g == 0.0));
    assert!(grads[1..].iter().any(|g| g.iter().any(|&x| x != 0.0)));
}
