//! The full detector: embeddings and encoder parameters, per-video inputs, and
//! the scoring graph shared by training and inference.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::corpus::VideoStream;
use crate::embedding::{EmbeddingMatrix, Vocabulary};
use crate::encoder::{self, EmbeddingBinder, EncoderParams, EncoderVars, DEFAULT_HIDDEN, DEFAULT_MAX_TOKENS};
use crate::error::{Error, Result};
use crate::keyframes::{extract_keyframes, Keyframe, DEFAULT_FRAME_LEN, DEFAULT_KEYFRAMES};
use crate::sbn::{self, SbnOptions, ScoreVars, SpoilerScore, DEFAULT_NEIGHBORS};

/// Architecture and scoring settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub max_tokens: usize,
    /// Former neighbors per target (`R`).
    pub neighbors: usize,
    /// Keyframes per video (`P`).
    pub keyframes: usize,
    pub frame_len: f64,
    pub sbn: SbnOptions,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_dim: DEFAULT_HIDDEN,
            max_tokens: DEFAULT_MAX_TOKENS,
            neighbors: DEFAULT_NEIGHBORS,
            keyframes: DEFAULT_KEYFRAMES,
            frame_len: DEFAULT_FRAME_LEN,
            sbn: SbnOptions::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(String::from(msg)));
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be at least 1");
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be at least 1");
        }
        if self.neighbors == 0 {
            return bad("neighbors (R) must be at least 1");
        }
        if self.sbn.use_iva && self.neighbors < 2 {
            return bad("variance attention needs at least 2 neighbors");
        }
        if self.keyframes == 0 {
            return bad("keyframes (P) must be at least 1");
        }
        if !(self.frame_len > 0.0) {
            return bad("frame_len must be positive");
        }
        if !(self.sbn.beta >= 0.0) || !self.sbn.beta.is_finite() {
            return bad("beta must be a finite non-negative number");
        }
        Ok(())
    }
}

/// Every trainable tensor of the detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub embeddings: EmbeddingMatrix,
    pub encoder: EncoderParams,
}

impl ModelParams {
    /// Fresh encoder on top of pretrained embeddings.
    pub fn init(embeddings: EmbeddingMatrix, hidden_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = EncoderParams::init(embeddings.dim(), hidden_dim, &mut rng);
        ModelParams { embeddings, encoder }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.encoder.forward.input_dim != self.embeddings.dim() {
            return Err(Error::ShapeMismatch {
                op: "embedding",
                left: self.embeddings.0.shape(),
                right: (self.embeddings.vocab_size(), self.encoder.forward.input_dim),
            });
        }
        Ok(())
    }

    /// Flat views of the parameter groups, embeddings first.
    pub fn groups(&self) -> [&[f64]; 9] {
        let e = &self.encoder;
        [
            &self.embeddings.0.data,
            &e.forward.w.data,
            &e.forward.u.data,
            &e.forward.b,
            &e.backward.w.data,
            &e.backward.u.data,
            &e.backward.b,
            &e.attention.w_s.data,
            &e.attention.u_s,
        ]
    }

    pub fn groups_mut(&mut self) -> [&mut [f64]; 9] {
        let e = &mut self.encoder;
        [
            &mut self.embeddings.0.data,
            &mut e.forward.w.data,
            &mut e.forward.u.data,
            &mut e.forward.b,
            &mut e.backward.w.data,
            &mut e.backward.u.data,
            &mut e.backward.b,
            &mut e.attention.w_s.data,
            &mut e.attention.u_s,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.groups().iter().all(|g| g.iter().all(|v| v.is_finite()))
    }
}

pub const GROUP_NAMES: [&str; 9] = [
    "embeddings",
    "forward.w",
    "forward.u",
    "forward.b",
    "backward.w",
    "backward.u",
    "backward.b",
    "attention.w_s",
    "attention.u_s",
];

/// A video ready for scoring: token ids per comment and its keyframes.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedVideo {
    pub stream: VideoStream,
    /// Token ids per record, truncated to `max_tokens`.
    pub tokens: Vec<Vec<usize>>,
    pub keyframes: Vec<Keyframe>,
}

impl PreparedVideo {
    /// Fails with [`Error::NoKeyframes`] when the last quarter is empty.
    pub fn new(stream: VideoStream, vocab: &Vocabulary, cfg: &ModelConfig) -> Result<Self> {
        let keyframes = extract_keyframes(&stream, cfg.keyframes, cfg.frame_len)?;
        if keyframes.is_empty() {
            return Err(Error::NoKeyframes);
        }
        let mut tokens = Vec::with_capacity(stream.len());
        for r in &stream.records {
            if r.tokens.is_empty() {
                return Err(Error::EmptyTokens);
            }
            let mut ids = vocab.encode(&r.tokens);
            ids.truncate(cfg.max_tokens);
            tokens.push(ids);
        }
        Ok(PreparedVideo {
            stream,
            tokens,
            keyframes,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn label(&self, index: usize) -> Option<u8> {
        self.stream.records.get(index).and_then(|r| r.label)
    }
}

/// Prepares every video, setting aside those without keyframes.
/// Returns the prepared videos and the ids of the excluded ones.
pub fn prepare_videos(
    videos: &[VideoStream],
    vocab: &Vocabulary,
    cfg: &ModelConfig,
) -> Result<(Vec<PreparedVideo>, Vec<String>)> {
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for v in videos {
        match PreparedVideo::new(v.clone(), vocab, cfg) {
            Ok(p) => kept.push(p),
            Err(Error::NoKeyframes) | Err(Error::Empty(_)) | Err(Error::ZeroDuration(_)) => {
                excluded.push(v.video_id.clone())
            }
            Err(e) => return Err(e),
        }
    }
    Ok((kept, excluded))
}

/// A target comment: record `index` of video `video`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Example {
    pub video: usize,
    pub index: usize,
}

/// Labeled examples grouped per video, for stratified splitting.
pub fn labeled_examples(videos: &[PreparedVideo]) -> Vec<Vec<Example>> {
    videos
        .iter()
        .enumerate()
        .map(|(v, pv)| {
            (0..pv.len())
                .filter(|&i| pv.label(i).is_some())
                .map(|i| Example { video: v, index: i })
                .collect()
        })
        .collect()
}

/// Indices of the `r` comments before `index`, oldest first. Near the start of
/// a video the list is left-padded with the earliest available comment; the
/// first comment has no neighbors at all.
pub fn neighbor_indices(index: usize, r: usize) -> Vec<usize> {
    if index == 0 {
        return Vec::new();
    }
    let first = index.saturating_sub(r);
    let mut out = Vec::with_capacity(r);
    for _ in 0..r - (index - first) {
        out.push(first);
    }
    out.extend(first..index);
    out
}

/// Encoder output of one comment on a [`Graph`].
#[derive(Clone, Copy, Debug)]
pub struct CommentVars {
    pub sentence: Var,
    pub word_weights: Var,
}

/// One tape holding the encoder, the comments encoded so far and the keyframe
/// vectors of the videos touched. Each comment and keyframe is encoded once.
#[derive(Debug)]
pub struct Graph<'a> {
    pub tape: Tape,
    pub vars: EncoderVars,
    pub binder: EmbeddingBinder<'a>,
    comments: BTreeMap<(usize, usize), CommentVars>,
    keyframes: BTreeMap<usize, Vec<Var>>,
}

impl<'a> Graph<'a> {
    pub fn new(params: &'a ModelParams, train_encoder: bool, train_embeddings: bool) -> Self {
        let mut tape = Tape::new();
        let vars = params.encoder.bind(&mut tape, train_encoder);
        Graph {
            tape,
            vars,
            binder: EmbeddingBinder::new(&params.embeddings, train_embeddings),
            comments: BTreeMap::new(),
            keyframes: BTreeMap::new(),
        }
    }

    pub fn comment(&mut self, videos: &[PreparedVideo], video: usize, index: usize) -> Result<CommentVars> {
        if let Some(&c) = self.comments.get(&(video, index)) {
            return Ok(c);
        }
        let pv = videos.get(video).ok_or(Error::OutOfRange {
            index: video,
            len: videos.len(),
        })?;
        let tokens = pv.tokens.get(index).ok_or(Error::OutOfRange {
            index,
            len: pv.len(),
        })?;
        let enc = encoder::encode_tokens(&mut self.tape, &self.vars, &mut self.binder, tokens)?;
        let c = CommentVars {
            sentence: enc.sentence,
            word_weights: enc.word_weights,
        };
        self.comments.insert((video, index), c);
        Ok(c)
    }

    /// Mean sentence vector of every member of each keyframe.
    pub fn keyframes(&mut self, videos: &[PreparedVideo], video: usize) -> Result<Vec<Var>> {
        if let Some(k) = self.keyframes.get(&video) {
            return Ok(k.clone());
        }
        let pv = videos.get(video).ok_or(Error::OutOfRange {
            index: video,
            len: videos.len(),
        })?;
        let mut out = Vec::with_capacity(pv.keyframes.len());
        for kf in &pv.keyframes {
            if kf.member_indices.is_empty() {
                return Err(Error::EmptyKeyframe);
            }
            let members = kf
                .member_indices
                .iter()
                .map(|&i| self.comment(videos, video, i).map(|c| c.sentence))
                .collect::<Result<Vec<_>>>()?;
            out.push(self.tape.mean_of(&members)?);
        }
        self.keyframes.insert(video, out.clone());
        Ok(out)
    }

    pub fn score(&mut self, videos: &[PreparedVideo], ex: Example, cfg: &ModelConfig) -> Result<ScoreVars> {
        let keyframes = self.keyframes(videos, ex.video)?;
        let target = self.comment(videos, ex.video, ex.index)?.sentence;
        let stream = &videos[ex.video].stream;
        let mut neighbors = Vec::with_capacity(cfg.neighbors);
        for j in neighbor_indices(ex.index, cfg.neighbors) {
            let v = self.comment(videos, ex.video, j)?.sentence;
            neighbors.push((v, stream.records[j].timestamp));
        }
        let t_i = stream.records[ex.index].timestamp;
        sbn::score_on_tape(&mut self.tape, target, t_i, &neighbors, &keyframes, &cfg.sbn)
    }
}

/// Score and word attention of one comment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredComment {
    pub example: Example,
    pub score: SpoilerScore,
    pub word_attention: Vec<f64>,
}

/// One line of prediction output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub video_id: String,
    pub index: usize,
    pub timestamp: f64,
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    pub g_nsim: f64,
    pub g_ksim: f64,
    #[serde(default)]
    pub iva_weights: Option<Vec<f64>>,
    pub decay_weights: Vec<f64>,
    pub word_attention: Vec<f64>,
}

impl ScoredComment {
    pub fn to_prediction(&self, videos: &[PreparedVideo]) -> Prediction {
        let pv = &videos[self.example.video];
        let r = &pv.stream.records[self.example.index];
        Prediction {
            video_id: pv.stream.video_id.clone(),
            index: self.example.index,
            timestamp: r.timestamp,
            probability: self.score.probability,
            label: r.label,
            g_nsim: self.score.g_nsim,
            g_ksim: self.score.g_ksim,
            iva_weights: self.score.iva_weights.clone(),
            decay_weights: self.score.decay_weights.clone(),
            word_attention: self.word_attention.clone(),
        }
    }
}

/// Scores the given examples with frozen parameters, in input order.
pub fn score_examples(
    params: &ModelParams,
    cfg: &ModelConfig,
    videos: &[PreparedVideo],
    examples: &[Example],
) -> Result<Vec<ScoredComment>> {
    let mut by_video: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, ex) in examples.iter().enumerate() {
        by_video.entry(ex.video).or_default().push(k);
    }
    let mut out: Vec<Option<ScoredComment>> = alloc::vec![None; examples.len()];
    for positions in by_video.values() {
        let mut graph = Graph::new(params, false, false);
        for &k in positions {
            let ex = examples[k];
            let vars = graph.score(videos, ex, cfg)?;
            let words = graph.comment(videos, ex.video, ex.index)?.word_weights;
            out[k] = Some(ScoredComment {
                example: ex,
                score: vars.read(&graph.tape),
                word_attention: graph.tape.value(words).to_vec(),
            });
        }
    }
    Ok(out.into_iter().map(|s| s.expect("every example scored")).collect())
}

/// Scores every comment of video `video`.
pub fn score_video(
    params: &ModelParams,
    cfg: &ModelConfig,
    videos: &[PreparedVideo],
    video: usize,
) -> Result<Vec<ScoredComment>> {
    let pv = videos.get(video).ok_or(Error::OutOfRange {
        index: video,
        len: videos.len(),
    })?;
    let examples: Vec<Example> = (0..pv.len()).map(|index| Example { video, index }).collect();
    score_examples(params, cfg, videos, &examples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn neighbor_padding() {
        assert!(neighbor_indices(0, 5).is_empty());
        assert_eq!(neighbor_indices(1, 5), vec![0, 0, 0, 0, 0]);
        assert_eq!(neighbor_indices(3, 5), vec![0, 0, 0, 1, 2]);
        assert_eq!(neighbor_indices(9, 5), vec![4, 5, 6, 7, 8]);
        assert_eq!(neighbor_indices(5, 5), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::default().validate().is_ok());
        let mut c = ModelConfig::default();
        c.neighbors = 1;
        assert!(c.validate().is_err());
        c.sbn.use_iva = false;
        assert!(c.validate().is_ok());
        c.keyframes = 0;
        assert!(c.validate().is_err());
    }
}
