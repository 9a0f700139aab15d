//! Mini-batch Adam training of the encoder and similarity network, with
//! validation-driven checkpoint selection and decay-rate sweeps.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::split_stratified;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::evaluator::{compute_metrics, Metrics, DEFAULT_THRESHOLD};
use crate::model::{score_examples, Example, Graph, ModelConfig, ModelParams, PreparedVideo};
use crate::optim::{clip_global_norm, Adam, AdamConfig};
use crate::sbn::{self, bce_on_tape};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub freeze_embeddings: bool,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            adam: AdamConfig::default(),
            epochs: 30,
            batch_size: 64,
            seed: 7,
            freeze_embeddings: true,
            patience: 5,
            clip_norm: Some(5.0),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let bad = |msg: &str| Err(Error::InvalidConfig(String::from(msg)));
        let a = &self.adam;
        if !(a.lr > 0.0) || !a.lr.is_finite() {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(a.eps > 0.0) {
            return bad("Adam epsilon must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return bad("clip_norm must be positive");
            }
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad("threshold must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Statistics after one epoch; epoch 0 describes the initialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss: over the whole set for epoch 0, over batches after.
    pub train_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<Metrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub config: TrainConfig,
    /// Epoch the parameters come from.
    pub epoch: usize,
    pub history: Vec<EpochRecord>,
}

impl Checkpoint {
    /// Validation metrics of the retained epoch.
    pub fn validation(&self) -> Option<Metrics> {
        self.history.iter().find(|r| r.epoch == self.epoch).and_then(|r| r.validation)
    }
}

/// Train/test/validation examples, split 70/20/10 within each video.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleSplit {
    pub train: Vec<Example>,
    pub test: Vec<Example>,
    pub validation: Vec<Example>,
}

pub fn split_examples(groups: &[Vec<Example>], seed: u64) -> Result<ExampleSplit> {
    let flat: Vec<Example> = groups.iter().flatten().copied().collect();
    let mut offset = 0;
    let index_groups: Vec<Vec<usize>> = groups
        .iter()
        .map(|g| {
            let ids = (offset..offset + g.len()).collect();
            offset += g.len();
            ids
        })
        .collect();
    let s = split_stratified(&index_groups, seed)?;
    let pick = |ids: &[usize]| ids.iter().map(|&i| flat[i]).collect();
    Ok(ExampleSplit {
        train: pick(&s.train),
        test: pick(&s.test),
        validation: pick(&s.validation),
    })
}

/// Mean loss and metrics of frozen parameters on labeled examples.
pub fn evaluate(
    params: &ModelParams,
    cfg: &ModelConfig,
    videos: &[PreparedVideo],
    examples: &[Example],
    threshold: f64,
) -> Result<(f64, Metrics)> {
    let scored = score_examples(params, cfg, videos, examples)?;
    let mut pairs = Vec::with_capacity(scored.len());
    let mut total = 0.0;
    for s in &scored {
        let ex = s.example;
        let label = label_of(videos, ex)?;
        total += sbn::loss(s.score.probability, label);
        pairs.push((s.score.probability, label));
    }
    let metrics = compute_metrics(&pairs, threshold)?;
    Ok((total / scored.len() as f64, metrics))
}

fn label_of(videos: &[PreparedVideo], ex: Example) -> Result<u8> {
    let pv = videos.get(ex.video).ok_or(Error::OutOfRange {
        index: ex.video,
        len: videos.len(),
    })?;
    pv.label(ex.index).ok_or_else(|| Error::MissingLabel {
        video: pv.stream.video_id.clone(),
        index: ex.index,
    })
}

/// Mean batch loss and its gradient per parameter group (embeddings first).
pub fn batch_gradients(
    params: &ModelParams,
    cfg: &ModelConfig,
    videos: &[PreparedVideo],
    batch: &[Example],
    train_embeddings: bool,
) -> Result<(f64, Vec<Vec<f64>>)> {
    if batch.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut graph = Graph::new(params, true, train_embeddings);
    let mut losses = Vec::with_capacity(batch.len());
    for &ex in batch {
        let label = label_of(videos, ex)?;
        let vars = graph.score(videos, ex, cfg)?;
        losses.push(bce_on_tape(&mut graph.tape, vars.probability, label));
    }
    let loss = graph.tape.mean_of(&losses)?;
    let grads = graph.tape.backward(loss)?;

    let sizes = params.groups().map(<[f64]>::len);
    let mut out: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
    let v = &graph.vars;
    let encoder_vars = [
        v.forward.w,
        v.forward.u,
        v.forward.b,
        v.backward.w,
        v.backward.u,
        v.backward.b,
        v.w_s,
        v.u_s,
    ];
    for (k, var) in encoder_vars.into_iter().enumerate() {
        if let Some(g) = grads.get(var) {
            out[k + 1].copy_from_slice(g);
        }
    }
    if train_embeddings {
        let d = params.embeddings.dim();
        for (id, var) in graph.binder.rows() {
            if let Some(g) = grads.get(var) {
                for (acc, x) in out[0][id * d..(id + 1) * d].iter_mut().zip(g) {
                    *acc += x;
                }
            }
        }
    }
    Ok((graph.tape.item(loss), out))
}

fn batches(train: &[Example], batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Example>> {
    // Examples of one video stay together so its keyframes are encoded once per batch.
    let mut by_video: BTreeMap<usize, Vec<Example>> = BTreeMap::new();
    for &ex in train {
        by_video.entry(ex.video).or_default().push(ex);
    }
    let mut groups: Vec<Vec<Example>> = by_video.into_values().collect();
    for g in groups.iter_mut() {
        g.shuffle(rng);
    }
    groups.shuffle(rng);
    let order: Vec<Example> = groups.into_iter().flatten().collect();
    order.chunks(batch_size).map(<[Example]>::to_vec).collect()
}

/// Trains a fresh encoder on top of `embeddings`.
///
/// Targets without any earlier comment are skipped. The returned checkpoint
/// holds the parameters of the epoch with the best validation F1 (ties go to
/// the lower validation loss, then the earlier epoch); without a validation
/// set it holds the last epoch.
pub fn train(
    videos: &[PreparedVideo],
    train_set: &[Example],
    val_set: &[Example],
    embeddings: EmbeddingMatrix,
    cfg: &TrainConfig,
) -> Result<Checkpoint> {
    cfg.validate()?;
    let params = ModelParams::init(embeddings, cfg.model.hidden_dim, cfg.seed);
    train_from(videos, train_set, val_set, params, cfg)
}

/// Like [`train`] but starting from the given parameters.
pub fn train_from(
    videos: &[PreparedVideo],
    train_set: &[Example],
    val_set: &[Example],
    mut params: ModelParams,
    cfg: &TrainConfig,
) -> Result<Checkpoint> {
    cfg.validate()?;
    params.validate()?;
    let train_set: Vec<Example> = train_set.iter().copied().filter(|ex| ex.index > 0).collect();
    if train_set.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    for &ex in train_set.iter().chain(val_set) {
        label_of(videos, ex)?;
    }
    let train_embeddings = !cfg.freeze_embeddings;
    let first = usize::from(!train_embeddings);
    let sizes: Vec<usize> = params.groups().iter().skip(first).map(|g| g.len()).collect();
    let mut adam = Adam::new(cfg.adam, &sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));

    let validate = |p: &ModelParams| -> Result<(Option<f64>, Option<Metrics>)> {
        if val_set.is_empty() {
            return Ok((None, None));
        }
        let (loss, m) = evaluate(p, &cfg.model, videos, val_set, cfg.threshold)?;
        Ok((Some(loss), Some(m)))
    };

    let (initial_loss, _) = evaluate(&params, &cfg.model, videos, &train_set, cfg.threshold)?;
    let (validation_loss, validation) = validate(&params)?;
    let mut history = vec![EpochRecord {
        epoch: 0,
        train_loss: initial_loss,
        validation_loss,
        validation,
    }];
    let mut best = (params.clone(), 0usize, validation, validation_loss);
    let mut stale = 0;

    for epoch in 1..=cfg.epochs {
        let mut total = 0.0;
        let batch_list = batches(&train_set, cfg.batch_size, &mut rng);
        for (b, batch) in batch_list.iter().enumerate() {
            let (loss, mut grads) = batch_gradients(&params, &cfg.model, videos, batch, train_embeddings)?;
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, batch: b });
            }
            let mut grads = grads.split_off(first);
            if let Some(c) = cfg.clip_norm {
                clip_global_norm(&mut grads, c);
            }
            let mut groups = params.groups_mut();
            adam.step(&mut groups[first..], &grads)?;
            total += loss;
        }
        if !params.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: batch_list.len(),
            });
        }
        let (validation_loss, validation) = validate(&params)?;
        history.push(EpochRecord {
            epoch,
            train_loss: total / batch_list.len() as f64,
            validation_loss,
            validation,
        });
        let improved = match (validation, best.2) {
            (Some(m), Some(b)) => {
                m.f1 > b.f1 || (m.f1 == b.f1 && validation_loss.unwrap_or(f64::INFINITY) < best.3.unwrap_or(f64::INFINITY))
            }
            _ => true,
        };
        if improved {
            best = (params.clone(), epoch, validation, validation_loss);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok(Checkpoint {
        params: best.0,
        config: cfg.clone(),
        epoch: best.1,
        history,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaPoint {
    pub beta: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaSweep {
    pub best_beta: f64,
    pub curve: Vec<BetaPoint>,
}

/// `start, start + step, ...` up to and including `stop` (within rounding).
pub fn beta_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::InvalidConfig(String::from("beta grid needs start <= stop and step > 0")));
    }
    let n = libm::floor((stop - start) / step + 1e-9) as usize;
    Ok((0..=n).map(|k| libm::round((start + k as f64 * step) * 1e9) / 1e9).collect())
}

/// One training run per distinct decay rate; the best is the one with the
/// highest validation F1 (earliest on ties).
pub fn sweep_beta(
    videos: &[PreparedVideo],
    train_set: &[Example],
    val_set: &[Example],
    embeddings: &EmbeddingMatrix,
    betas: &[f64],
    cfg: &TrainConfig,
) -> Result<BetaSweep> {
    let mut distinct: Vec<f64> = Vec::new();
    for &b in betas {
        if !distinct.iter().any(|&d| d == b) {
            distinct.push(b);
        }
    }
    if distinct.is_empty() {
        return Err(Error::InvalidConfig(String::from("no beta values to sweep")));
    }
    if val_set.is_empty() {
        return Err(Error::InvalidConfig(String::from("a beta sweep needs a validation set")));
    }
    let mut curve = Vec::with_capacity(distinct.len());
    for beta in distinct {
        let mut c = cfg.clone();
        c.model.sbn.beta = beta;
        let ckpt = train(videos, train_set, val_set, embeddings.clone(), &c)?;
        let f1 = ckpt.validation().map(|m| m.f1).unwrap_or(0.0);
        curve.push(BetaPoint { beta, f1 });
    }
    let mut best = curve[0];
    for p in &curve[1..] {
        if p.f1 > best.f1 {
            best = *p;
        }
    }
    Ok(BetaSweep {
        best_beta: best.beta,
        curve,
    })
}
