//! Scalar helpers shared by the tape and the plain (tape-free) code paths.

use alloc::vec::Vec;

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    libm::sqrt(dot(x, x))
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Softmax with max-subtraction.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| libm::exp(v - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `a·b / ((|a| + eps)(|b| + eps))`.
pub fn cosine(a: &[f64], b: &[f64], eps: f64) -> Result<f64> {
    let denom = (norm(a) + eps) * (norm(b) + eps);
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::ZeroNorm);
    }
    Ok(dot(a, b) / denom)
}

/// Index of the maximum element; the lowest index wins ties.
pub fn argmax(x: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in x.iter().enumerate() {
        match best {
            Some(b) if x[b] >= *v => {}
            _ => best = Some(i),
        }
    }
    best
}
