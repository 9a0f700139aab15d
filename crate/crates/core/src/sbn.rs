//! Similarity-based network with interactive variance attention.
//!
//! A target comment is scored by comparing how similar it is to the comments
//! just before it (neighbor similarity) against how similar it is to the
//! video's keyframes (keyframe similarity):
//!
//! ```text
//! Nsim_r = cos(Nseq_r, Tseq)            Ksim_p = cos(Kseq_p, Tseq)
//! decay_r = softmax_r(-β (t_i - t_r))   G_K = max_p Ksim_p
//! G_N = Σ_r decay_r · Nsim_r                       (plain)
//! G_N = Σ_r iva_r · decay_r · Nsim_r               (with variance attention)
//! ŷ = sigmoid(G_K - G_N)
//! ```
//!
//! Variance attention compares the neighbors with each other: row `r` of the
//! pairwise cosine matrix is softmax-normalized, its population variance `D_r`
//! measures how concentrated neighbor `r`'s similarity is, and the weights are
//! `softmax(1 / (D_r + ε))`. Neighbors unrelated to the rest (noise) have
//! concentrated rows, high variance and low weight.
//!
//! Every quantity is built on an autodiff [`Tape`]; the plain-value functions
//! in this module construct a throwaway tape of constants, so inference and
//! training share one code path.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

pub const DEFAULT_BETA: f64 = 0.15;
pub const DEFAULT_NEIGHBORS: usize = 5;
/// Added to each norm in cosine similarities.
pub const SIM_EPS: f64 = 1e-8;
/// Added to `D_r` before taking its reciprocal.
pub const VARIANCE_EPS: f64 = 1e-8;
pub const LOG_FLOOR: f64 = 1e-12;

/// Orientation of the decay exponent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecaySign {
    /// `exp(-β (t_i - t_r))`: older neighbors weigh less.
    #[default]
    GapPenalty,
    /// `exp(-β (t_r - t_i))`: the literal printed form, which favors older neighbors.
    AsPrinted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SbnOptions {
    pub use_iva: bool,
    /// `false` replaces the decay weights with uniform `1/R`.
    pub use_decay: bool,
    pub beta: f64,
    pub decay_sign: DecaySign,
    /// Divide the IVA-weighted sum by `Σ iva_r · decay_r`.
    pub renormalize_iva: bool,
}

impl SbnOptions {
    pub fn sbn(beta: f64) -> Self {
        SbnOptions {
            use_iva: false,
            use_decay: true,
            beta,
            decay_sign: DecaySign::GapPenalty,
            renormalize_iva: false,
        }
    }

    pub fn sbn_wt() -> Self {
        SbnOptions {
            use_decay: false,
            ..Self::sbn(0.0)
        }
    }

    pub fn sbn_iva(beta: f64) -> Self {
        SbnOptions {
            use_iva: true,
            ..Self::sbn(beta)
        }
    }
}

impl Default for SbnOptions {
    fn default() -> Self {
        Self::sbn_iva(DEFAULT_BETA)
    }
}

/// Softmax over `-β · gap` for each neighbor timestamp.
pub fn decay_weights(timestamps: &[f64], t_i: f64, beta: f64, sign: DecaySign) -> Vec<f64> {
    if timestamps.is_empty() {
        return Vec::new();
    }
    let logits: Vec<f64> = timestamps
        .iter()
        .map(|&t| match sign {
            DecaySign::GapPenalty => -beta * (t_i - t),
            DecaySign::AsPrinted => -beta * (t - t_i),
        })
        .collect();
    crate::math::softmax(&logits)
}

/// Weights applied to the neighbor similarities before variance attention.
pub fn neighbor_weights(timestamps: &[f64], t_i: f64, opts: &SbnOptions) -> Vec<f64> {
    if opts.use_decay {
        decay_weights(timestamps, t_i, opts.beta, opts.decay_sign)
    } else {
        let r = timestamps.len();
        vec![1.0 / r as f64; r]
    }
}

/// Row-wise softmax of the pairwise neighbor similarity matrix.
pub fn similarity_rows_on_tape(tape: &mut Tape, neighbors: &[Var]) -> Result<Vec<Var>> {
    let r = neighbors.len();
    if r < 2 {
        return Err(Error::TooFewNeighbors(r));
    }
    let mut sims = vec![vec![None::<Var>; r]; r];
    for i in 0..r {
        for j in i..r {
            let s = tape.cosine_sim(neighbors[i], neighbors[j], SIM_EPS)?;
            sims[i][j] = Some(s);
            sims[j][i] = Some(s);
        }
    }
    let mut rows = Vec::with_capacity(r);
    for row in &sims {
        let row: Vec<Var> = row.iter().map(|s| s.expect("filled above")).collect();
        let s = tape.stack(&row)?;
        rows.push(tape.softmax(s)?);
    }
    Ok(rows)
}

/// Variance-attention weights over neighbor sentence vectors.
pub fn iva_on_tape(tape: &mut Tape, neighbors: &[Var]) -> Result<Var> {
    let rows = similarity_rows_on_tape(tape, neighbors)?;
    let mut variances = Vec::with_capacity(rows.len());
    for row in rows {
        variances.push(tape.variance(row)?);
    }
    let d = tape.stack(&variances)?;
    let shifted = tape.add_const(d, VARIANCE_EPS);
    let inv = tape.recip(shifted);
    tape.softmax(inv)
}

/// Nodes produced by [`score_on_tape`].
#[derive(Clone, Debug)]
pub struct ScoreVars {
    pub probability: Var,
    pub g_nsim: Var,
    pub g_ksim: Var,
    pub neighbor_sims: Option<Var>,
    pub keyframe_sims: Var,
    pub iva_weights: Option<Var>,
    /// Weights actually applied (decay or uniform); empty without neighbors.
    pub neighbor_weights: Vec<f64>,
}

/// Builds the scoring graph for one target. `neighbors` pairs each neighbor
/// vector with its timestamp, oldest first. An empty neighbor list scores the
/// target with `G_N = 0`.
pub fn score_on_tape(
    tape: &mut Tape,
    target: Var,
    target_time: f64,
    neighbors: &[(Var, f64)],
    keyframes: &[Var],
    opts: &SbnOptions,
) -> Result<ScoreVars> {
    if keyframes.is_empty() {
        return Err(Error::NoKeyframes);
    }
    let ksims = keyframes
        .iter()
        .map(|&k| tape.cosine_sim(k, target, SIM_EPS))
        .collect::<Result<Vec<_>>>()?;
    let keyframe_sims = tape.stack(&ksims)?;
    let g_ksim = tape.max_index_select(keyframe_sims)?;

    let (g_nsim, neighbor_sims, iva_weights, weights) = if neighbors.is_empty() {
        (tape.scalar(0.0), None, None, Vec::new())
    } else {
        let times: Vec<f64> = neighbors.iter().map(|n| n.1).collect();
        let weights = neighbor_weights(&times, target_time, opts);
        let nsims = neighbors
            .iter()
            .map(|&(v, _)| tape.cosine_sim(v, target, SIM_EPS))
            .collect::<Result<Vec<_>>>()?;
        let nsims = tape.stack(&nsims)?;
        let w = tape.constant(weights.clone());
        if opts.use_iva {
            let vecs: Vec<Var> = neighbors.iter().map(|n| n.0).collect();
            let iva = iva_on_tape(tape, &vecs)?;
            let combined = tape.mul(iva, w)?;
            let mut g = tape.dot(combined, nsims)?;
            if opts.renormalize_iva {
                let total = tape.sum(combined)?;
                let inv = tape.recip(total);
                g = tape.mul(g, inv)?;
            }
            (g, Some(nsims), Some(iva), weights)
        } else {
            (tape.dot(nsims, w)?, Some(nsims), None, weights)
        }
    };

    let diff = tape.sub(g_ksim, g_nsim)?;
    let probability = tape.sigmoid(diff);
    Ok(ScoreVars {
        probability,
        g_nsim,
        g_ksim,
        neighbor_sims,
        keyframe_sims,
        iva_weights,
        neighbor_weights: weights,
    })
}

/// Binary cross-entropy `-[y ln ŷ + (1 - y) ln(1 - ŷ)]` with clamped logs.
pub fn bce_on_tape(tape: &mut Tape, probability: Var, label: u8) -> Var {
    if label == 1 {
        let l = tape.ln(probability, LOG_FLOOR);
        tape.scale_const(l, -1.0)
    } else {
        let neg = tape.scale_const(probability, -1.0);
        let q = tape.add_const(neg, 1.0);
        let l = tape.ln(q, LOG_FLOOR);
        tape.scale_const(l, -1.0)
    }
}

/// A neighbor comment: sentence vector plus timestamp.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub vector: Vec<f64>,
    pub timestamp: f64,
}

/// Everything needed to score one target comment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborContext {
    pub target: Vec<f64>,
    pub target_time: f64,
    /// Oldest first; timestamps non-decreasing and not after `target_time`.
    pub neighbors: Vec<Neighbor>,
    pub keyframes: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpoilerScore {
    pub probability: f64,
    pub g_nsim: f64,
    pub g_ksim: f64,
    pub decay_weights: Vec<f64>,
    #[serde(default)]
    pub iva_weights: Option<Vec<f64>>,
    pub neighbor_sims: Vec<f64>,
    pub keyframe_sims: Vec<f64>,
}

impl ScoreVars {
    pub fn read(&self, tape: &Tape) -> SpoilerScore {
        SpoilerScore {
            probability: tape.item(self.probability),
            g_nsim: tape.item(self.g_nsim),
            g_ksim: tape.item(self.g_ksim),
            decay_weights: self.neighbor_weights.clone(),
            iva_weights: self.iva_weights.map(|v| tape.value(v).to_vec()),
            neighbor_sims: self
                .neighbor_sims
                .map(|v| tape.value(v).to_vec())
                .unwrap_or_default(),
            keyframe_sims: tape.value(self.keyframe_sims).to_vec(),
        }
    }
}

/// Cosine similarity of each neighbor to the target.
pub fn neighbor_similarities(ctx: &NeighborContext) -> Result<Vec<f64>> {
    ctx.neighbors
        .iter()
        .map(|n| crate::math::cosine(&n.vector, &ctx.target, SIM_EPS))
        .collect()
}

/// `Σ_r nsim_r · w_r`, or `Σ_r iva_r · nsim_r · w_r` when `iva` is given.
pub fn overall_neighbor_similarity(nsims: &[f64], weights: &[f64], iva: Option<&[f64]>) -> Result<f64> {
    let mut tape = Tape::new();
    let n = tape.constant(nsims.to_vec());
    let w = tape.constant(weights.to_vec());
    let g = match iva {
        Some(iva) => {
            let a = tape.constant(iva.to_vec());
            let combined = tape.mul(a, w)?;
            tape.dot(combined, n)?
        }
        None => tape.dot(n, w)?,
    };
    Ok(tape.item(g))
}

/// Variance-attention weights for a set of neighbor vectors.
pub fn iva_weights(vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = vectors.iter().map(|v| tape.constant(v.clone())).collect();
    let w = iva_on_tape(&mut tape, &vars)?;
    Ok(tape.value(w).to_vec())
}

/// Softmaxed similarity rows used by [`iva_weights`].
pub fn similarity_rows(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = vectors.iter().map(|v| tape.constant(v.clone())).collect();
    let rows = similarity_rows_on_tape(&mut tape, &vars)?;
    Ok(rows.into_iter().map(|r| tape.value(r).to_vec()).collect())
}

/// Maximum keyframe similarity.
pub fn overall_keyframe_similarity(ksims: &[f64]) -> Result<f64> {
    if ksims.is_empty() {
        return Err(Error::NoKeyframes);
    }
    let mut tape = Tape::new();
    let k = tape.constant(ksims.to_vec());
    let m = tape.max_index_select(k)?;
    Ok(tape.item(m))
}

/// Scores one target comment.
pub fn predict(ctx: &NeighborContext, opts: &SbnOptions) -> Result<SpoilerScore> {
    let mut tape = Tape::new();
    let target = tape.constant(ctx.target.clone());
    let neighbors: Vec<(Var, f64)> = ctx
        .neighbors
        .iter()
        .map(|n| (tape.constant(n.vector.clone()), n.timestamp))
        .collect();
    let keyframes: Vec<Var> = ctx.keyframes.iter().map(|k| tape.constant(k.clone())).collect();
    let vars = score_on_tape(&mut tape, target, ctx.target_time, &neighbors, &keyframes, opts)?;
    Ok(vars.read(&tape))
}

/// Binary cross-entropy of one prediction.
pub fn loss(probability: f64, label: u8) -> f64 {
    let mut tape = Tape::new();
    let p = tape.constant(vec![probability]);
    let l = bce_on_tape(&mut tape, p, label);
    tape.item(l)
}
