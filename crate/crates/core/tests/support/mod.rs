//! Straight-line reference implementations used by the integration tests.
//! Nothing here goes through the tape or the crate's math helpers.

#![allow(dead_code)]

use tsc_spoiler_core::encoder::{EncoderParams, LstmParams};

pub const EPS: f64 = 1e-8;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();
    let mut total = 0.0;
    for &v in x {
        let e = (v - m).exp();
        out.push(e);
        total += e;
    }
    for v in out.iter_mut() {
        *v /= total;
    }
    out
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for k in 0..a.len() {
        ab += a[k] * b[k];
        aa += a[k] * a[k];
        bb += b[k] * b[k];
    }
    ab / ((aa.sqrt() + EPS) * (bb.sqrt() + EPS))
}

/// One direction over `xs`, visiting positions in `order`. Returns the hidden
/// state at each position.
fn lstm(p: &LstmParams, xs: &[Vec<f64>], order: &[usize]) -> Vec<Vec<f64>> {
    let h = p.hidden_dim;
    let mut hid = vec![0.0; h];
    let mut cell = vec![0.0; h];
    let mut out = vec![Vec::new(); xs.len()];
    for &k in order {
        let x = &xs[k];
        let mut z = vec![0.0; 4 * h];
        for r in 0..4 * h {
            let mut s = p.b[r];
            for c in 0..p.input_dim {
                s += p.w.data[r * p.input_dim + c] * x[c];
            }
            for c in 0..h {
                s += p.u.data[r * h + c] * hid[c];
            }
            z[r] = s;
        }
        for j in 0..h {
            let i = sigmoid(z[j]);
            let f = sigmoid(z[h + j]);
            let o = sigmoid(z[2 * h + j]);
            let g = z[3 * h + j].tanh();
            cell[j] = f * cell[j] + i * g;
            hid[j] = o * cell[j].tanh();
        }
        out[k] = hid.clone();
    }
    out
}

/// Word states, attention weights and sentence vector of one comment.
pub fn encode(p: &EncoderParams, xs: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let n = xs.len();
    let fwd_order: Vec<usize> = (0..n).collect();
    let bwd_order: Vec<usize> = (0..n).rev().collect();
    let f = lstm(&p.forward, xs, &fwd_order);
    let b = lstm(&p.backward, xs, &bwd_order);
    let states: Vec<Vec<f64>> = (0..n).map(|k| [f[k].clone(), b[k].clone()].concat()).collect();
    let a = &p.attention;
    let mut scores = Vec::new();
    for s in &states {
        let mut score = 0.0;
        for r in 0..a.w_s.rows {
            let mut z = 0.0;
            for c in 0..a.w_s.cols {
                z += a.w_s.data[r * a.w_s.cols + c] * s[c];
            }
            score += z.tanh() * a.u_s[r];
        }
        scores.push(score);
    }
    let alpha = softmax(&scores);
    let mut sentence = vec![0.0; states[0].len()];
    for k in 0..n {
        for c in 0..sentence.len() {
            sentence[c] += alpha[k] * states[k][c];
        }
    }
    (states, alpha, sentence)
}

pub fn decay(times: &[f64], t_i: f64, beta: f64) -> Vec<f64> {
    let raw: Vec<f64> = times.iter().map(|&t| -beta * (t_i - t)).collect();
    softmax(&raw)
}

pub fn g_nsim(nsims: &[f64], weights: &[f64]) -> f64 {
    let mut g = 0.0;
    for r in 0..nsims.len() {
        g += nsims[r] * weights[r];
    }
    g
}

pub fn g_ksim(ksims: &[f64]) -> f64 {
    let mut best = ksims[0];
    for &k in &ksims[1..] {
        if k > best {
            best = k;
        }
    }
    best
}

pub fn probability(g_k: f64, g_n: f64) -> f64 {
    sigmoid(g_k - g_n)
}

/// Similarity matrix, softmaxed rows, row variances and final weights.
pub struct IvaTrace {
    pub sims: Vec<Vec<f64>>,
    pub rows: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn iva(vectors: &[Vec<f64>]) -> IvaTrace {
    let r = vectors.len();
    let mut sims = vec![vec![0.0; r]; r];
    for i in 0..r {
        for j in 0..r {
            sims[i][j] = cosine(&vectors[i], &vectors[j]);
        }
    }
    let rows: Vec<Vec<f64>> = sims.iter().map(|s| softmax(s)).collect();
    let mut variances = Vec::new();
    for row in &rows {
        let mean = row.iter().sum::<f64>() / r as f64;
        let mut v = 0.0;
        for &x in row {
            v += (x - mean) * (x - mean);
        }
        variances.push(v / r as f64);
    }
    let inv: Vec<f64> = variances.iter().map(|&d| 1.0 / (d + EPS)).collect();
    let weights = softmax(&inv);
    IvaTrace {
        sims,
        rows,
        variances,
        weights,
    }
}

pub fn g_nsim_iva(nsims: &[f64], decay: &[f64], iva: &[f64]) -> f64 {
    let mut g = 0.0;
    for r in 0..nsims.len() {
        g += iva[r] * nsims[r] * decay[r];
    }
    g
}

pub fn bce(p: f64, y: u8) -> f64 {
    if y == 1 {
        -p.max(1e-12).ln()
    } else {
        -(1.0 - p).max(1e-12).ln()
    }
}

/// Indices of the `p` densest `frame_len` windows tiling the last quarter,
/// counting members by scanning every timestamp.
pub fn brute_keyframes(ts: &[f64], duration: f64, p: usize, frame_len: f64) -> Vec<(f64, Vec<usize>)> {
    let origin = 0.75 * duration;
    let mut windows = Vec::new();
    let mut k = 0usize;
    while origin + k as f64 * frame_len <= duration {
        let start = origin + k as f64 * frame_len;
        let end = start + frame_len;
        let members: Vec<usize> = (0..ts.len()).filter(|&i| ts[i] >= start && ts[i] < end).collect();
        if !members.is_empty() {
            windows.push((start, members));
        }
        k += 1;
    }
    let mut chosen: Vec<(f64, Vec<usize>)> = Vec::new();
    for _ in 0..p {
        let mut best: Option<usize> = None;
        for (i, w) in windows.iter().enumerate() {
            if chosen.iter().any(|c| c.0 == w.0) {
                continue;
            }
            match best {
                Some(b) if windows[b].1.len() >= w.1.len() => {}
                _ => best = Some(i),
            }
        }
        match best {
            Some(b) => chosen.push(windows[b].clone()),
            None => break,
        }
    }
    chosen.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    chosen
}

/// A few short labeled videos over a six-word vocabulary. Every video has
/// comments in its last quarter, so each keeps at least one keyframe.
pub fn tiny_videos(seed: u64, videos: usize, comments: usize) -> Vec<tsc_spoiler_core::corpus::VideoStream> {
    use rand::{Rng, SeedableRng};
    use tsc_spoiler_core::corpus::{TscRecord, VideoStream};
    let words = ["alpha", "beta", "gamma", "delta", "omega", "sigma"];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..videos)
        .map(|v| {
            let id = format!("t{v}");
            let records = (0..comments)
                .map(|i| {
                    // Last two comments land in the final quarter of 40 s.
                    let t = if i + 2 >= comments {
                        31.0 + i as f64 * 0.5
                    } else {
                        rng.gen_range(0.0..29.0)
                    };
                    let n = rng.gen_range(1..=3);
                    let tokens: Vec<String> = (0..n).map(|_| words[rng.gen_range(0..words.len())].to_string()).collect();
                    TscRecord {
                        video_id: id.clone(),
                        timestamp: t,
                        raw_text: tokens.join(" "),
                        tokens,
                        label: Some(rng.gen_range(0..=1)),
                    }
                })
                .collect();
            VideoStream::new(id, records, Some(40.0))
        })
        .collect()
}
