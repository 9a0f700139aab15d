//! Word-level attentive encoder: a bidirectional LSTM over a comment's word
//! vectors followed by additive word attention.
//!
//! For word states `h_k = [→h_k ; ←h_k]` the attention weights are
//! `α_k = softmax_k( tanh(W_s · h_k) · u_s )` and the sentence vector is
//! `Σ_k α_k · h_k`. Both directions start from zero hidden and cell states.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::keyframes::Keyframe;
use crate::matrix::Matrix;

/// Comments longer than this are truncated before encoding.
pub const DEFAULT_MAX_TOKENS: usize = 50;
pub const DEFAULT_HIDDEN: usize = 64;

/// One LSTM direction. Gate rows are stacked as input, forget, output, candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `4h x input_dim`
    pub w: Matrix,
    /// `4h x h`
    pub u: Matrix,
    /// `4h`
    pub b: Vec<f64>,
}

impl LstmParams {
    /// Xavier-uniform matrices, zero biases except the forget gate at +1.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let h = hidden_dim;
        let mut b = alloc::vec![0.0; 4 * h];
        b[h..2 * h].iter_mut().for_each(|v| *v = 1.0);
        LstmParams {
            input_dim,
            hidden_dim,
            w: Matrix::xavier(4 * h, input_dim, rng),
            u: Matrix::xavier(4 * h, h, rng),
            b,
        }
    }

    fn validate(&self) -> Result<()> {
        let h = self.hidden_dim;
        if self.w.shape() != (4 * h, self.input_dim) || self.u.shape() != (4 * h, h) || self.b.len() != 4 * h {
            return Err(Error::ShapeMismatch {
                op: "lstm",
                left: self.w.shape(),
                right: (4 * h, self.input_dim),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordAttentionParams {
    /// `a x 2h`
    pub w_s: Matrix,
    /// context vector, length `a`
    pub u_s: Vec<f64>,
}

impl WordAttentionParams {
    pub fn init<R: Rng + ?Sized>(state_dim: usize, attn_dim: usize, rng: &mut R) -> Self {
        WordAttentionParams {
            w_s: Matrix::xavier(attn_dim, state_dim, rng),
            u_s: Matrix::xavier(attn_dim, 1, rng).data,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub forward: LstmParams,
    pub backward: LstmParams,
    pub attention: WordAttentionParams,
}

impl EncoderParams {
    /// Attention inner dimension defaults to the state dimension `2h`.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let forward = LstmParams::init(input_dim, hidden_dim, rng);
        let backward = LstmParams::init(input_dim, hidden_dim, rng);
        let attention = WordAttentionParams::init(2 * hidden_dim, 2 * hidden_dim, rng);
        EncoderParams {
            forward,
            backward,
            attention,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.forward.hidden_dim
    }

    /// Dimension of sentence vectors, `2h`.
    pub fn output_dim(&self) -> usize {
        2 * self.forward.hidden_dim
    }

    pub fn validate(&self) -> Result<()> {
        self.forward.validate()?;
        self.backward.validate()?;
        if self.forward.hidden_dim != self.backward.hidden_dim || self.forward.input_dim != self.backward.input_dim {
            return Err(Error::ShapeMismatch {
                op: "bilstm",
                left: (self.forward.hidden_dim, self.forward.input_dim),
                right: (self.backward.hidden_dim, self.backward.input_dim),
            });
        }
        let a = &self.attention;
        if a.w_s.cols != self.output_dim() || a.w_s.rows != a.u_s.len() || a.u_s.is_empty() {
            return Err(Error::ShapeMismatch {
                op: "word_attention",
                left: a.w_s.shape(),
                right: (a.u_s.len(), self.output_dim()),
            });
        }
        Ok(())
    }

    /// Places the parameters on `tape`, as trainable leaves or as constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> EncoderVars {
        let leaf = |tape: &mut Tape, m: &Matrix| {
            if trainable {
                tape.param_matrix(m)
            } else {
                tape.constant_matrix(m)
            }
        };
        let vec_leaf = |tape: &mut Tape, v: &[f64]| {
            if trainable {
                tape.param(v.to_vec())
            } else {
                tape.constant(v.to_vec())
            }
        };
        let forward = LstmVars {
            w: leaf(tape, &self.forward.w),
            u: leaf(tape, &self.forward.u),
            b: vec_leaf(tape, &self.forward.b),
        };
        let backward = LstmVars {
            w: leaf(tape, &self.backward.w),
            u: leaf(tape, &self.backward.u),
            b: vec_leaf(tape, &self.backward.b),
        };
        EncoderVars {
            forward,
            backward,
            w_s: leaf(tape, &self.attention.w_s),
            u_s: vec_leaf(tape, &self.attention.u_s),
            hidden: self.hidden_dim(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    pub w: Var,
    pub u: Var,
    pub b: Var,
}

/// Encoder parameters bound to a tape.
#[derive(Clone, Copy, Debug)]
pub struct EncoderVars {
    pub forward: LstmVars,
    pub backward: LstmVars,
    pub w_s: Var,
    pub u_s: Var,
    hidden: usize,
}

/// Embedding rows bound to a tape, one leaf per distinct token id.
#[derive(Debug)]
pub struct EmbeddingBinder<'a> {
    emb: &'a EmbeddingMatrix,
    trainable: bool,
    rows: BTreeMap<usize, Var>,
}

impl<'a> EmbeddingBinder<'a> {
    pub fn new(emb: &'a EmbeddingMatrix, trainable: bool) -> Self {
        EmbeddingBinder {
            emb,
            trainable,
            rows: BTreeMap::new(),
        }
    }

    pub fn lookup(&mut self, tape: &mut Tape, id: usize) -> Result<Var> {
        if id >= self.emb.vocab_size() {
            return Err(Error::OutOfRange {
                index: id,
                len: self.emb.vocab_size(),
            });
        }
        if let Some(&v) = self.rows.get(&id) {
            return Ok(v);
        }
        let row = self.emb.row(id).to_vec();
        let v = if self.trainable { tape.param(row) } else { tape.constant(row) };
        self.rows.insert(id, v);
        Ok(v)
    }

    /// Bound rows as `(token id, var)` pairs.
    pub fn rows(&self) -> impl Iterator<Item = (usize, Var)> + '_ {
        self.rows.iter().map(|(&id, &v)| (id, v))
    }
}

/// Sentence vector, word weights and per-word states of one comment on a tape.
#[derive(Clone, Debug)]
pub struct EncodedVars {
    pub sentence: Var,
    pub word_weights: Var,
    pub states: Vec<Var>,
}

fn lstm_step(tape: &mut Tape, p: &LstmVars, h: usize, x: Var, prev: Option<(Var, Var)>) -> Result<(Var, Var)> {
    let wx = tape.matvec(p.w, x)?;
    let pre = match prev {
        Some((h_prev, _)) => {
            let uh = tape.matvec(p.u, h_prev)?;
            tape.add(wx, uh)?
        }
        None => wx,
    };
    let z = tape.add(pre, p.b)?;
    let zi = tape.slice(z, 0, h)?;
    let zf = tape.slice(z, h, h)?;
    let zo = tape.slice(z, 2 * h, h)?;
    let zg = tape.slice(z, 3 * h, h)?;
    let i = tape.sigmoid(zi);
    let f = tape.sigmoid(zf);
    let o = tape.sigmoid(zo);
    let g = tape.tanh(zg);
    let ig = tape.mul(i, g)?;
    let c = match prev {
        Some((_, c_prev)) => {
            let fc = tape.mul(f, c_prev)?;
            tape.add(fc, ig)?
        }
        None => ig,
    };
    let tc = tape.tanh(c);
    let h_new = tape.mul(o, tc)?;
    Ok((h_new, c))
}

/// Encodes already-bound word vectors.
pub fn encode_on_tape(tape: &mut Tape, vars: &EncoderVars, inputs: &[Var]) -> Result<EncodedVars> {
    if inputs.is_empty() {
        return Err(Error::EmptyTokens);
    }
    let h = vars.hidden;
    let k = inputs.len();

    let mut fwd = Vec::with_capacity(k);
    let mut state = None;
    for &x in inputs {
        let s = lstm_step(tape, &vars.forward, h, x, state)?;
        fwd.push(s.0);
        state = Some(s);
    }
    let mut bwd = alloc::vec![fwd[0]; k];
    let mut state = None;
    for j in (0..k).rev() {
        let s = lstm_step(tape, &vars.backward, h, inputs[j], state)?;
        bwd[j] = s.0;
        state = Some(s);
    }

    let mut states = Vec::with_capacity(k);
    let mut scores = Vec::with_capacity(k);
    for j in 0..k {
        let hj = tape.concat(&[fwd[j], bwd[j]])?;
        let proj = tape.matvec(vars.w_s, hj)?;
        let act = tape.tanh(proj);
        scores.push(tape.dot(act, vars.u_s)?);
        states.push(hj);
    }
    let logits = tape.stack(&scores)?;
    let word_weights = tape.softmax(logits)?;
    let sentence = tape.weighted_sum(word_weights, &states)?;
    Ok(EncodedVars {
        sentence,
        word_weights,
        states,
    })
}

/// Looks up `tokens` through `binder` and encodes them.
pub fn encode_tokens(
    tape: &mut Tape,
    vars: &EncoderVars,
    binder: &mut EmbeddingBinder<'_>,
    tokens: &[usize],
) -> Result<EncodedVars> {
    let inputs = tokens
        .iter()
        .map(|&id| binder.lookup(tape, id))
        .collect::<Result<Vec<_>>>()?;
    encode_on_tape(tape, vars, &inputs)
}

/// Sentence vector and word attention of one comment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedComment {
    pub sentence: Vec<f64>,
    pub word_weights: Vec<f64>,
}

/// Encodes one comment given token ids.
pub fn encode(tokens: &[usize], emb: &EmbeddingMatrix, params: &EncoderParams) -> Result<EncodedComment> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape, false);
    let mut binder = EmbeddingBinder::new(emb, false);
    let out = encode_tokens(&mut tape, &vars, &mut binder, tokens)?;
    Ok(EncodedComment {
        sentence: tape.value(out.sentence).to_vec(),
        word_weights: tape.value(out.word_weights).to_vec(),
    })
}

/// Per-word Bi-LSTM states `[→h_k ; ←h_k]` of one comment.
pub fn word_states(tokens: &[usize], emb: &EmbeddingMatrix, params: &EncoderParams) -> Result<Vec<Vec<f64>>> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape, false);
    let mut binder = EmbeddingBinder::new(emb, false);
    let out = encode_tokens(&mut tape, &vars, &mut binder, tokens)?;
    Ok(out.states.iter().map(|&s| tape.value(s).to_vec()).collect())
}

/// Mean of the sentence vectors of a keyframe's member comments.
///
/// `comment_tokens[i]` holds the token ids of record `i` of the video.
pub fn encode_keyframe(
    keyframe: &Keyframe,
    comment_tokens: &[Vec<usize>],
    emb: &EmbeddingMatrix,
    params: &EncoderParams,
) -> Result<Vec<f64>> {
    if keyframe.member_indices.is_empty() {
        return Err(Error::EmptyKeyframe);
    }
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape, false);
    let mut binder = EmbeddingBinder::new(emb, false);
    let mut members = Vec::with_capacity(keyframe.member_indices.len());
    for &i in &keyframe.member_indices {
        let tokens = comment_tokens.get(i).ok_or(Error::OutOfRange {
            index: i,
            len: comment_tokens.len(),
        })?;
        members.push(encode_tokens(&mut tape, &vars, &mut binder, tokens)?.sentence);
    }
    let mean = tape.mean_of(&members)?;
    Ok(tape.value(mean).to_vec())
}
