//! Precision/recall/F1 on the spoiler class, the keyword-matching baseline,
//! method comparison tables and attention dumps.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::VideoStream;
use crate::error::{Error, Result};
use crate::model::{neighbor_indices, score_examples, Example, Graph, ModelConfig, ModelParams, PreparedVideo};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Confusion counts and derived scores for the positive (spoiler) class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
            tn,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// A comment is predicted a spoiler when `probability >= threshold`.
pub fn compute_metrics(predictions: &[(f64, u8)], threshold: f64) -> Result<Metrics> {
    if predictions.is_empty() {
        return Err(Error::EmptyPredictions);
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for &(p, y) in predictions {
        match (p >= threshold, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(Metrics::from_counts(tp, fp, fn_, tn))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPrediction {
    pub probability: f64,
    pub label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub overall: Metrics,
    pub per_category: BTreeMap<String, Metrics>,
}

/// Overall metrics plus one entry per category tag present.
pub fn compute_report(predictions: &[LabeledPrediction], threshold: f64) -> Result<MetricsReport> {
    let all: Vec<(f64, u8)> = predictions.iter().map(|p| (p.probability, p.label)).collect();
    let overall = compute_metrics(&all, threshold)?;
    let mut groups: BTreeMap<String, Vec<(f64, u8)>> = BTreeMap::new();
    for p in predictions {
        if let Some(c) = &p.category {
            groups.entry(c.clone()).or_default().push((p.probability, p.label));
        }
    }
    let mut per_category = BTreeMap::new();
    for (c, preds) in groups {
        per_category.insert(c, compute_metrics(&preds, threshold)?);
    }
    Ok(MetricsReport { overall, per_category })
}

/// Spoiler keywords keyed by scope: a video id, `category:<tag>`, or `*` for
/// every video.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeywordList {
    pub scopes: BTreeMap<String, Vec<String>>,
}

pub const GLOBAL_SCOPE: &str = "*";
pub const CATEGORY_PREFIX: &str = "category:";

impl KeywordList {
    pub fn insert(&mut self, scope: &str, keyword: &str) {
        let list = self.scopes.entry(scope.to_string()).or_default();
        if !list.iter().any(|k| k == keyword) {
            list.push(keyword.to_string());
        }
    }

    /// Union of the global, category and video scopes.
    pub fn keywords_for(&self, video_id: &str, category: Option<&str>) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        let mut add = |scope: &str| {
            if let Some(list) = self.scopes.get(scope) {
                out.extend(list.iter().map(String::as_str));
            }
        };
        add(GLOBAL_SCOPE);
        if let Some(c) = category {
            add(&format!("{CATEGORY_PREFIX}{c}"));
        }
        add(video_id);
        out
    }
}

/// Labels a comment 1 when any of its tokens is a keyword for the video.
pub fn km_baseline(video: &VideoStream, keywords: &KeywordList) -> Result<Vec<u8>> {
    let kw = keywords.keywords_for(&video.video_id, video.category.as_deref());
    if kw.is_empty() {
        return Err(Error::EmptyKeywords);
    }
    Ok(video
        .records
        .iter()
        .map(|r| u8::from(r.tokens.iter().any(|t| kw.contains(t.as_str()))))
        .collect())
}

/// How one row of a comparison table is produced.
#[derive(Clone, Debug)]
pub enum MethodSource<'a> {
    Model {
        params: &'a ModelParams,
        config: &'a ModelConfig,
    },
    Keywords(&'a KeywordList),
    /// The method could not be loaded; its rows carry this message.
    Unavailable(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub method: String,
    /// Category tag, or `all`.
    pub category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Metrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub const ALL_CATEGORIES: &str = "all";

fn method_predictions(
    source: &MethodSource<'_>,
    videos: &[PreparedVideo],
    examples: &[Example],
) -> Result<Vec<LabeledPrediction>> {
    let probs: Vec<f64> = match source {
        MethodSource::Model { params, config } => score_examples(params, config, videos, examples)?
            .into_iter()
            .map(|s| s.score.probability)
            .collect(),
        MethodSource::Keywords(kw) => {
            let mut cache: BTreeMap<usize, Vec<u8>> = BTreeMap::new();
            let mut out = Vec::with_capacity(examples.len());
            for ex in examples {
                if !cache.contains_key(&ex.video) {
                    cache.insert(ex.video, km_baseline(&videos[ex.video].stream, kw)?);
                }
                out.push(f64::from(cache[&ex.video][ex.index]));
            }
            out
        }
        MethodSource::Unavailable(msg) => return Err(Error::InvalidConfig(msg.clone())),
    };
    examples
        .iter()
        .zip(probs)
        .map(|(ex, probability)| {
            let pv = &videos[ex.video];
            let label = pv.label(ex.index).ok_or_else(|| Error::MissingLabel {
                video: pv.stream.video_id.clone(),
                index: ex.index,
            })?;
            Ok(LabeledPrediction {
                probability,
                label,
                category: pv.stream.category.clone(),
            })
        })
        .collect()
}

/// One `all` row per method followed by one row per category. A method that
/// fails yields error rows and the remaining methods still run.
pub fn run_ablation(
    videos: &[PreparedVideo],
    examples: &[Example],
    methods: &[(String, MethodSource<'_>)],
    threshold: f64,
) -> Vec<AblationRow> {
    let categories: BTreeSet<String> = examples
        .iter()
        .filter_map(|ex| videos.get(ex.video).and_then(|v| v.stream.category.clone()))
        .collect();
    let mut rows = Vec::new();
    for (name, source) in methods {
        let report = method_predictions(source, videos, examples).and_then(|p| compute_report(&p, threshold));
        match report {
            Ok(r) => {
                rows.push(AblationRow {
                    method: name.clone(),
                    category: ALL_CATEGORIES.to_string(),
                    metrics: Some(r.overall),
                    error: None,
                });
                for (c, m) in r.per_category {
                    rows.push(AblationRow {
                        method: name.clone(),
                        category: c,
                        metrics: Some(m),
                        error: None,
                    });
                }
            }
            Err(e) => {
                let msg = e.to_string();
                for c in core::iter::once(ALL_CATEGORIES.to_string()).chain(categories.iter().cloned()) {
                    rows.push(AblationRow {
                        method: name.clone(),
                        category: c,
                        metrics: None,
                        error: Some(msg.clone()),
                    });
                }
            }
        }
    }
    rows
}

/// Word attention of one comment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommentAttention {
    pub index: usize,
    pub timestamp: f64,
    pub tokens: Vec<String>,
    pub word_weights: Vec<f64>,
}

/// Word- and sentence-level weights around one target comment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionDump {
    pub video_id: String,
    pub target: CommentAttention,
    pub neighbors: Vec<CommentAttention>,
    pub neighbor_sims: Vec<f64>,
    pub decay_weights: Vec<f64>,
    #[serde(default)]
    pub iva_weights: Option<Vec<f64>>,
    /// `iva_r · decay_r`, or just `decay_r` without variance attention.
    pub sentence_weights: Vec<f64>,
    pub keyframe_sims: Vec<f64>,
    pub g_nsim: f64,
    pub g_ksim: f64,
    pub probability: f64,
}

/// Attention weights for record `index` of video `video`, which needs at
/// least `R` earlier comments.
pub fn export_attention(
    params: &ModelParams,
    cfg: &ModelConfig,
    videos: &[PreparedVideo],
    video: usize,
    index: usize,
) -> Result<AttentionDump> {
    let pv = videos.get(video).ok_or(Error::OutOfRange {
        index: video,
        len: videos.len(),
    })?;
    if index >= pv.len() {
        return Err(Error::OutOfRange { index, len: pv.len() });
    }
    if index < cfg.neighbors {
        return Err(Error::TooFewNeighbors(index));
    }
    let mut graph = Graph::new(params, false, false);
    let ex = Example { video, index };
    let vars = graph.score(videos, ex, cfg)?;
    let score = vars.read(&graph.tape);
    let attention = |graph: &mut Graph<'_>, i: usize| -> Result<CommentAttention> {
        let c = graph.comment(videos, video, i)?;
        let n = pv.tokens[i].len();
        Ok(CommentAttention {
            index: i,
            timestamp: pv.stream.records[i].timestamp,
            tokens: pv.stream.records[i].tokens.iter().take(n).cloned().collect(),
            word_weights: graph.tape.value(c.word_weights).to_vec(),
        })
    };
    let target = attention(&mut graph, index)?;
    let neighbors = neighbor_indices(index, cfg.neighbors)
        .into_iter()
        .map(|i| attention(&mut graph, i))
        .collect::<Result<Vec<_>>>()?;
    let sentence_weights = match &score.iva_weights {
        Some(iva) => iva.iter().zip(&score.decay_weights).map(|(a, d)| a * d).collect(),
        None => score.decay_weights.clone(),
    };
    Ok(AttentionDump {
        video_id: pv.stream.video_id.clone(),
        target,
        neighbors,
        neighbor_sims: score.neighbor_sims,
        decay_weights: score.decay_weights,
        iva_weights: score.iva_weights,
        sentence_weights,
        keyframe_sims: score.keyframe_sims,
        g_nsim: score.g_nsim,
        g_ksim: score.g_ksim,
        probability: score.probability,
    })
}
