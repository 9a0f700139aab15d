//! Vocabulary construction and skip-gram (negative sampling) word embeddings.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::VideoStream;
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

pub const UNK: usize = 0;
pub const PAD: usize = 1;
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_TOKEN: &str = "<pad>";

/// Dense token ids. Ids 0 and 1 are reserved for the unknown and padding tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Vocabulary holding only the reserved tokens.
    pub fn empty() -> Self {
        Self::from_parts(
            vec![UNK_TOKEN.to_string(), PAD_TOKEN.to_string()],
            vec![0, 0],
        )
        .expect("reserved tokens are valid")
    }

    /// Rebuilds a vocabulary from its id-ordered token list.
    pub fn from_parts(tokens: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        if tokens.len() != counts.len() {
            return Err(Error::ShapeMismatch {
                op: "vocabulary",
                left: (tokens.len(), 1),
                right: (counts.len(), 1),
            });
        }
        if tokens.len() < 2 || tokens[UNK] != UNK_TOKEN || tokens[PAD] != PAD_TOKEN {
            return Err(Error::InvalidConfig(
                "vocabulary must start with the reserved <unk> and <pad> tokens".to_string(),
            ));
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidConfig(alloc::format!("duplicate token `{t}`")));
            }
        }
        Ok(Vocabulary {
            tokens,
            counts,
            index,
        })
    }

    /// Restores the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of `token`, or [`UNK`] when it is not in the vocabulary.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts.get(id).copied().unwrap_or(0)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }
}

/// Counts every token of every comment; tokens seen fewer than `min_freq`
/// times map to [`UNK`]. Ids are assigned by descending frequency, then
/// lexicographically.
pub fn build_vocab(videos: &[VideoStream], min_freq: u64) -> Vocabulary {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for v in videos {
        for r in &v.records {
            for t in &r.tokens {
                *counts.entry(t.as_str()).or_insert(0) += 1;
            }
        }
    }
    let mut kept: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(t, c)| c >= min_freq.max(1) && t != UNK_TOKEN && t != PAD_TOKEN)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut tokens = vec![UNK_TOKEN.to_string(), PAD_TOKEN.to_string()];
    let mut freq = vec![0, 0];
    for (t, c) in kept {
        tokens.push(t.to_string());
        freq.push(c);
    }
    Vocabulary::from_parts(tokens, freq).expect("tokens are unique")
}

/// `|V| x d` word vectors, row `i` belonging to token id `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingMatrix(pub Matrix);

impl EmbeddingMatrix {
    pub fn dim(&self) -> usize {
        self.0.cols
    }

    pub fn vocab_size(&self) -> usize {
        self.0.rows
    }

    pub fn row(&self, id: usize) -> &[f64] {
        self.0.row(id)
    }

    /// Uniform in `[-0.5/d, 0.5/d]`.
    pub fn init<R: Rng + ?Sized>(vocab_size: usize, dim: usize, rng: &mut R) -> Self {
        EmbeddingMatrix(Matrix::uniform(vocab_size, dim, 0.5 / dim as f64, rng))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 128,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            seed: 1,
        }
    }
}

/// Result of [`train_skipgram`].
#[derive(Clone, Debug)]
pub struct SkipGramRun {
    pub embeddings: EmbeddingMatrix,
    /// Mean negative-sampling loss per (center, context) pair, one entry per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Cumulative unigram^0.75 distribution used to draw negatives.
struct NegativeTable {
    cumulative: Vec<f64>,
}

impl NegativeTable {
    fn new(vocab: &Vocabulary) -> Option<Self> {
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(vocab.len());
        for id in 0..vocab.len() {
            if id != PAD {
                acc += libm::pow(vocab.count(id) as f64, 0.75);
            }
            cumulative.push(acc);
        }
        if acc > 0.0 {
            Some(NegativeTable { cumulative })
        } else {
            None
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u = rng.gen_range(0.0..total);
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

/// Skip-gram with negative sampling over every comment of every video.
///
/// Each comment is one sentence; the context of a token is every other token
/// within `window` positions. Updates are plain SGD at a constant rate.
pub fn train_skipgram(videos: &[VideoStream], vocab: &Vocabulary, cfg: &SkipGramConfig) -> Result<SkipGramRun> {
    if cfg.dim == 0 {
        return Err(Error::InvalidConfig("embedding dimension must be positive".to_string()));
    }
    if cfg.window == 0 {
        return Err(Error::InvalidConfig("window must be positive".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.dim;
    let mut input = EmbeddingMatrix::init(vocab.len(), d, &mut rng);
    let mut output = Matrix::zeros(vocab.len(), d);
    let sentences: Vec<Vec<usize>> = videos
        .iter()
        .flat_map(|v| v.records.iter().map(|r| vocab.encode(&r.tokens)))
        .collect();
    let table = NegativeTable::new(vocab);

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut grad_in = vec![0.0; d];
    for _ in 0..cfg.epochs {
        let mut total = 0.0;
        let mut pairs = 0usize;
        for sent in &sentences {
            for (pos, &center) in sent.iter().enumerate() {
                let lo = pos.saturating_sub(cfg.window);
                let hi = (pos + cfg.window + 1).min(sent.len());
                for (cpos, &ctx) in sent.iter().enumerate().take(hi).skip(lo) {
                    if cpos == pos {
                        continue;
                    }
                    grad_in.iter_mut().for_each(|g| *g = 0.0);
                    total += sgns_update(&input, &mut output, center, ctx, 1.0, cfg.lr, &mut grad_in);
                    if let Some(table) = &table {
                        for _ in 0..cfg.negatives {
                            let neg = table.sample(&mut rng);
                            if neg == ctx {
                                continue;
                            }
                            total += sgns_update(&input, &mut output, center, neg, 0.0, cfg.lr, &mut grad_in);
                        }
                    }
                    input
                        .0
                        .row_mut(center)
                        .iter_mut()
                        .zip(&grad_in)
                        .for_each(|(w, g)| *w += g);
                    pairs += 1;
                }
            }
        }
        epoch_losses.push(if pairs > 0 { total / pairs as f64 } else { 0.0 });
    }
    Ok(SkipGramRun {
        embeddings: input,
        epoch_losses,
    })
}

/// One logistic step for the pair (center, target) with the given label.
/// Updates the output vector in place and accumulates the input-vector step in
/// `grad_in`. Returns the pair's loss.
fn sgns_update(
    input: &EmbeddingMatrix,
    output: &mut Matrix,
    center: usize,
    target: usize,
    label: f64,
    lr: f64,
    grad_in: &mut [f64],
) -> f64 {
    let w = input.row(center);
    let score = math::dot(w, output.row(target));
    let p = math::sigmoid(score);
    let loss = if label > 0.5 {
        -libm::log(p.max(1e-12))
    } else {
        -libm::log((1.0 - p).max(1e-12))
    };
    let step = lr * (label - p);
    let c = output.row_mut(target);
    for k in 0..w.len() {
        grad_in[k] += step * c[k];
        c[k] += step * w[k];
    }
    loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TscRecord;

    fn corpus(sentences: &[&[&str]]) -> Vec<VideoStream> {
        let records = sentences
            .iter()
            .enumerate()
            .map(|(i, s)| TscRecord {
                video_id: "v".to_string(),
                timestamp: i as f64,
                raw_text: String::new(),
                tokens: s.iter().map(|t| t.to_string()).collect(),
                label: None,
            })
            .collect();
        vec![VideoStream::new("v".to_string(), records, None)]
    }

    #[test]
    fn vocab_threshold_maps_rare_tokens_to_unk() {
        let v = corpus(&[&["a", "a", "a"], &["a", "a", "b"]]);
        let vocab = build_vocab(&v, 2);
        assert_eq!(vocab.len(), 3);
        assert_eq!(vocab.id("a"), 2);
        assert_eq!(vocab.id("b"), UNK);
    }

    #[test]
    fn empty_corpus_has_reserved_tokens_only() {
        let vocab = build_vocab(&[], 1);
        assert_eq!(vocab.tokens(), &[UNK_TOKEN.to_string(), PAD_TOKEN.to_string()]);
    }

    #[test]
    fn ids_follow_frequency_then_lexicographic_order() {
        let v = corpus(&[&["b", "c", "a", "c", "a", "d"]]);
        let vocab = build_vocab(&v, 1);
        assert_eq!(&vocab.tokens()[2..], &["a", "c", "b", "d"]);
        assert_eq!(build_vocab(&v, 1), vocab);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let v = corpus(&[&["a", "b"], &["c", "d"]]);
        let vocab = build_vocab(&v, 1);
        let cfg = SkipGramConfig {
            dim: 8,
            epochs: 0,
            ..SkipGramConfig::default()
        };
        let run = train_skipgram(&v, &vocab, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        assert_eq!(run.embeddings, EmbeddingMatrix::init(vocab.len(), 8, &mut rng));
        assert!(run.epoch_losses.is_empty());
    }

    #[test]
    fn invalid_dimensions_are_rejected() {
        let vocab = Vocabulary::empty();
        for cfg in [
            SkipGramConfig { dim: 0, ..SkipGramConfig::default() },
            SkipGramConfig { window: 0, ..SkipGramConfig::default() },
        ] {
            assert!(matches!(train_skipgram(&[], &vocab, &cfg), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn training_is_seeded() {
        let v = corpus(&[&["a", "b", "c"], &["c", "d", "a"]]);
        let vocab = build_vocab(&v, 1);
        let cfg = SkipGramConfig {
            dim: 6,
            epochs: 3,
            ..SkipGramConfig::default()
        };
        let a = train_skipgram(&v, &vocab, &cfg).unwrap();
        let b = train_skipgram(&v, &vocab, &cfg).unwrap();
        assert_eq!(a.embeddings, b.embeddings);
    }

    #[test]
    fn vocabulary_rejects_missing_reserved_tokens() {
        assert!(Vocabulary::from_parts(vec!["a".to_string(), "b".to_string()], vec![1, 1]).is_err());
    }
}
