//! Pipeline stages. Each reads its inputs from disk, writes its artifact and
//! returns a short summary for the caller to print.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsc_spoiler_core::corpus::{filter_videos, VideoStream};
use tsc_spoiler_core::embedding::{build_vocab, train_skipgram, EmbeddingMatrix, Vocabulary};
use tsc_spoiler_core::evaluator::{export_attention, run_ablation, AblationRow, AttentionDump, MethodSource};
use tsc_spoiler_core::keyframes::extract_keyframes;
use tsc_spoiler_core::model::{labeled_examples, prepare_videos, score_video, Example, ModelConfig, Prediction, PreparedVideo};
use tsc_spoiler_core::synth::{generate, SynthConfig};
use tsc_spoiler_core::trainer::{beta_grid, split_examples, sweep_beta, train, BetaSweep, Checkpoint, TrainConfig};

use crate::artifact::{hash_file, sha256_hex, Artifact, Kind};
use crate::config::{EmbeddingConfig, FilterConfig, PreprocessConfig};
use crate::corpus::{parse_corpus, write_corpus, LineIssue};
use crate::embeddings::{read_embeddings, write_embeddings};
use crate::error::{Error, Result};
use crate::keywords::{load_keywords, write_keywords};
use crate::text::SlangMap;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn inputs<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

// ---------------------------------------------------------------- synth

/// Writes a synthetic corpus and its keyword list.
pub fn synth(cfg: &SynthConfig, out: &Path, keywords_out: &Path) -> Result<usize> {
    let corpus = generate(cfg)?;
    let mut w = create(out)?;
    write_corpus(&mut w, &corpus.videos).map_err(|e| Error::io(out, e))?;
    w.flush().map_err(|e| Error::io(out, e))?;
    let mut k = create(keywords_out)?;
    write_keywords(&mut k, &corpus.keywords).map_err(|e| Error::io(keywords_out, e))?;
    k.flush().map_err(|e| Error::io(keywords_out, e))?;
    Ok(corpus.videos.iter().map(VideoStream::len).sum())
}

/// Default keyword path next to a synthetic corpus.
pub fn keywords_path_for(corpus: &Path) -> PathBuf {
    corpus.with_extension("keywords.tsv")
}

// ----------------------------------------------------------- preprocess

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub filter: FilterConfig,
    pub preprocess: PreprocessConfig,
}

pub type CorpusArtifact = Artifact<CorpusConfig, Vec<VideoStream>>;

#[derive(Clone, Debug)]
pub struct PreprocessSummary {
    pub videos_read: usize,
    pub videos_kept: usize,
    pub records: usize,
    pub skipped: Vec<LineIssue>,
    pub dropped_empty: usize,
}

pub fn preprocess(input: &Path, slang: Option<&Path>, cfg: &CorpusConfig, out: &Path) -> Result<PreprocessSummary> {
    let (slang_map, slang_hash) = match slang {
        Some(p) => (SlangMap::load(p)?, Some(hash_file(p)?)),
        None => (SlangMap::default(), None),
    };
    let tokenizer = cfg.preprocess.tokenizer.build();
    let parsed = parse_corpus(open(input)?, &slang_map, tokenizer.as_ref(), cfg.preprocess.strict)
        .map_err(|e| match e {
            Error::Line { line, message } => Error::format(input, format!("line {line}: {message}")),
            other => other,
        })?;
    let videos_read = parsed.videos.len();
    let kept = filter_videos(parsed.videos, cfg.filter.min_count, cfg.filter.min_density);
    let mut ins = inputs([("corpus", hash_file(input)?)]);
    if let Some(h) = slang_hash {
        ins.insert("slang".to_string(), h);
    }
    let summary = PreprocessSummary {
        videos_read,
        videos_kept: kept.len(),
        records: kept.iter().map(VideoStream::len).sum(),
        skipped: parsed.skipped,
        dropped_empty: parsed.dropped_empty,
    };
    CorpusArtifact::new(Kind::Corpus, cfg.clone(), ins, kept)?.write(out)?;
    Ok(summary)
}

/// A preprocessed corpus together with the hash of the file it came from.
pub struct LoadedCorpus {
    pub videos: Vec<VideoStream>,
    pub hash: String,
}

pub fn load_corpus(path: &Path) -> Result<LoadedCorpus> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let art = CorpusArtifact::from_json(&text, Kind::Corpus, path)?;
    Ok(LoadedCorpus {
        videos: art.payload,
        hash: sha256_hex(text.as_bytes()),
    })
}

// ------------------------------------------------------------ keyframes

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyframeConfig {
    pub p: usize,
    pub frame_len: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

pub type KeyframeArtifact = Artifact<KeyframeConfig, BTreeMap<String, Vec<Window>>>;

/// Keyframe windows of every video; videos without any are listed with none.
pub fn keyframes(input: &Path, cfg: &KeyframeConfig, out: &Path) -> Result<BTreeMap<String, Vec<Window>>> {
    let corpus = load_corpus(input)?;
    let mut map = BTreeMap::new();
    for v in &corpus.videos {
        let windows = extract_keyframes(v, cfg.p, cfg.frame_len)?
            .into_iter()
            .map(|k| Window {
                start: k.start,
                end: k.end,
                count: k.count(),
            })
            .collect();
        map.insert(v.video_id.clone(), windows);
    }
    KeyframeArtifact::new(Kind::Keyframes, cfg.clone(), inputs([("corpus", corpus.hash)]), map.clone())?.write(out)?;
    Ok(map)
}

// ------------------------------------------------------ train-embeddings

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    /// SHA-256 of the vector file this metadata describes.
    pub file: String,
    pub vocab_size: usize,
    pub dim: usize,
    pub epoch_losses: Vec<f64>,
}

pub type EmbeddingArtifact = Artifact<EmbeddingConfig, EmbeddingMeta>;

/// Sidecar metadata path of a vector file.
pub fn meta_path(embeddings: &Path) -> PathBuf {
    let mut s = embeddings.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn train_embeddings(input: &Path, cfg: &EmbeddingConfig, out: &Path) -> Result<EmbeddingMeta> {
    cfg.validate()?;
    let corpus = load_corpus(input)?;
    let vocab = build_vocab(&corpus.videos, cfg.min_freq);
    let run = train_skipgram(&corpus.videos, &vocab, &cfg.skipgram())?;
    let mut bytes = Vec::new();
    write_embeddings(&mut bytes, &vocab, &run.embeddings)?;
    std::fs::write(out, &bytes).map_err(|e| Error::io(out, e))?;
    let meta = EmbeddingMeta {
        file: sha256_hex(&bytes),
        vocab_size: vocab.len(),
        dim: cfg.dim,
        epoch_losses: run.epoch_losses,
    };
    EmbeddingArtifact::new(Kind::Embeddings, cfg.clone(), inputs([("corpus", corpus.hash)]), meta.clone())?
        .write(&meta_path(out))?;
    Ok(meta)
}

pub struct LoadedEmbeddings {
    pub vocab: Vocabulary,
    pub matrix: EmbeddingMatrix,
    pub hash: String,
    /// Corpus hash recorded by `train-embeddings`, when its metadata is present.
    pub corpus: Option<String>,
}

pub fn load_embeddings(path: &Path) -> Result<LoadedEmbeddings> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (vocab, matrix) = read_embeddings(bytes.as_slice()).map_err(|e| match e {
        Error::Line { line, message } => Error::format(path, format!("line {line}: {message}")),
        other => other,
    })?;
    let hash = sha256_hex(&bytes);
    let meta = meta_path(path);
    let corpus = if meta.exists() {
        let art = EmbeddingArtifact::read(&meta, Kind::Embeddings)?;
        if art.payload.file != hash {
            return Err(Error::Mismatch(format!(
                "{} was not written together with {}",
                meta.display(),
                path.display()
            )));
        }
        art.inputs.get("corpus").cloned()
    } else {
        None
    };
    Ok(LoadedEmbeddings {
        vocab,
        matrix,
        hash,
        corpus,
    })
}

fn check_chain(corpus: &LoadedCorpus, emb: &LoadedEmbeddings, allow_mismatch: bool) -> Result<()> {
    match &emb.corpus {
        Some(h) if *h != corpus.hash && !allow_mismatch => Err(Error::Mismatch(
            "the embeddings were trained on a different corpus artifact (pass --allow-mismatch to use them anyway)"
                .to_string(),
        )),
        _ => Ok(()),
    }
}

// ---------------------------------------------------------------- train

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelPayload {
    pub vocabulary: Vocabulary,
    pub checkpoint: Checkpoint,
    /// Videos left out because they have no keyframe.
    pub excluded_videos: Vec<String>,
}

pub type ModelArtifact = Artifact<TrainConfig, ModelPayload>;

/// Prepared videos and the stratified split used for training.
pub struct Prepared {
    pub videos: Vec<PreparedVideo>,
    pub excluded: Vec<String>,
    pub groups: Vec<Vec<Example>>,
}

pub fn prepare(videos: &[VideoStream], vocab: &Vocabulary, cfg: &ModelConfig) -> Result<Prepared> {
    let (videos, excluded) = prepare_videos(videos, vocab, cfg)?;
    let groups = labeled_examples(&videos);
    Ok(Prepared {
        videos,
        excluded,
        groups,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SplitChoice {
    Train,
    Validation,
    #[default]
    Test,
    All,
}

impl Prepared {
    pub fn examples(&self, split: SplitChoice, seed: u64) -> Result<Vec<Example>> {
        if split == SplitChoice::All {
            return Ok(self.groups.iter().flatten().copied().collect());
        }
        let s = split_examples(&self.groups, seed)?;
        Ok(match split {
            SplitChoice::Train => s.train,
            SplitChoice::Validation => s.validation,
            _ => s.test,
        })
    }
}

pub fn train_model(
    data: &Path,
    embeddings: &Path,
    cfg: &TrainConfig,
    out: &Path,
    allow_mismatch: bool,
) -> Result<Checkpoint> {
    cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
    let corpus = load_corpus(data)?;
    let emb = load_embeddings(embeddings)?;
    check_chain(&corpus, &emb, allow_mismatch)?;
    let prep = prepare(&corpus.videos, &emb.vocab, &cfg.model)?;
    let split = split_examples(&prep.groups, cfg.seed)?;
    let ckpt = train(&prep.videos, &split.train, &split.validation, emb.matrix, cfg)?;
    let payload = ModelPayload {
        vocabulary: emb.vocab,
        checkpoint: ckpt.clone(),
        excluded_videos: prep.excluded,
    };
    let ins = inputs([("corpus", corpus.hash), ("embeddings", emb.hash)]);
    ModelArtifact::new(Kind::Checkpoint, cfg.clone(), ins, payload)?.write(out)?;
    Ok(ckpt)
}

pub struct LoadedModel {
    pub artifact: ModelArtifact,
    pub hash: String,
}

impl LoadedModel {
    pub fn checkpoint(&self) -> &Checkpoint {
        &self.artifact.payload.checkpoint
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.artifact.payload.vocabulary
    }

    /// `SBN`, `SBN-WT` or `SBN-IVA`, from the scoring options.
    pub fn method_name(&self) -> String {
        let o = &self.checkpoint().config.model.sbn;
        if !o.use_decay {
            "SBN-WT".to_string()
        } else if o.use_iva {
            "SBN-IVA".to_string()
        } else {
            "SBN".to_string()
        }
    }
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut artifact = ModelArtifact::from_json(&text, Kind::Checkpoint, path)?;
    if artifact.payload.checkpoint.config != artifact.config {
        return Err(Error::Mismatch(format!(
            "{}: checkpoint config differs from the artifact config",
            path.display()
        )));
    }
    artifact.payload.vocabulary.reindex();
    artifact.payload.checkpoint.params.validate()?;
    Ok(LoadedModel {
        artifact,
        hash: sha256_hex(text.as_bytes()),
    })
}

// ----------------------------------------------------------- sweep-beta

/// Parses `start:stop:step` or a comma-separated list.
pub fn parse_betas(spec: &str) -> Result<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("invalid beta value `{s}`")))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [a, b, c] => Ok(beta_grid(num(a)?, num(b)?, num(c)?).map_err(|e| Error::Config(e.to_string()))?),
        [list] => list.split(',').map(num).collect(),
        _ => Err(Error::Config(format!("betas must be `start:stop:step` or a list, got `{spec}`"))),
    }
}

pub fn sweep(
    data: &Path,
    embeddings: &Path,
    cfg: &TrainConfig,
    betas: &[f64],
    out: Option<&Path>,
    allow_mismatch: bool,
) -> Result<BetaSweep> {
    cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
    let corpus = load_corpus(data)?;
    let emb = load_embeddings(embeddings)?;
    check_chain(&corpus, &emb, allow_mismatch)?;
    let prep = prepare(&corpus.videos, &emb.vocab, &cfg.model)?;
    let split = split_examples(&prep.groups, cfg.seed)?;
    let result = sweep_beta(&prep.videos, &split.train, &split.validation, &emb.matrix, betas, cfg)?;
    let mut csv = String::from("beta,f1\n");
    for p in &result.curve {
        csv.push_str(&format!("{},{}\n", p.beta, p.f1));
    }
    match out {
        Some(path) => std::fs::write(path, csv).map_err(|e| Error::io(path, e))?,
        None => print!("{csv}"),
    }
    Ok(result)
}

// ------------------------------------------------------------- evaluate

/// A checkpoint to evaluate, with an optional display name.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub name: Option<String>,
    pub path: PathBuf,
}

impl ModelSpec {
    /// `NAME=PATH` or just `PATH`.
    pub fn parse(s: &str) -> Self {
        match s.split_once('=') {
            Some((n, p)) if !n.is_empty() => ModelSpec {
                name: Some(n.to_string()),
                path: PathBuf::from(p),
            },
            _ => ModelSpec {
                name: None,
                path: PathBuf::from(s),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    pub split: SplitChoice,
    pub threshold: Option<f64>,
    pub methods: Vec<String>,
}

pub type ReportArtifact = Artifact<ReportConfig, Vec<AblationRow>>;

pub struct EvaluateRequest<'a> {
    pub models: &'a [ModelSpec],
    pub keywords: Option<&'a Path>,
    pub data: &'a Path,
    pub split: SplitChoice,
    /// Overrides each checkpoint's own threshold.
    pub threshold: Option<f64>,
    /// Keyframe settings and split seed for keyword-only runs.
    pub fallback: &'a TrainConfig,
}

/// One table over every checkpoint and, with a keyword file, the keyword
/// baseline. Keyword rows use the split of the first loadable checkpoint.
/// An unreadable checkpoint yields error rows.
pub fn evaluate(req: &EvaluateRequest<'_>) -> Result<ReportArtifact> {
    let corpus = load_corpus(req.data)?;
    let mut rows = Vec::new();
    let mut names = Vec::new();
    let mut ins = inputs([("data", corpus.hash.clone())]);
    let mut km_basis: Option<(Prepared, Vec<Example>)> = None;
    for (k, spec) in req.models.iter().enumerate() {
        let model = match load_model(&spec.path) {
            Ok(m) => m,
            Err(e @ Error::Mismatch(_)) => return Err(e),
            Err(e) => {
                let name = spec.name.clone().unwrap_or_else(|| spec.path.display().to_string());
                rows.extend(run_ablation(&[], &[], &[(name.clone(), MethodSource::Unavailable(e.to_string()))], 0.5));
                names.push(name);
                continue;
            }
        };
        let ckpt = model.checkpoint();
        if req.split != SplitChoice::All && model.artifact.inputs.get("corpus") != Some(&corpus.hash) {
            return Err(Error::Mismatch(format!(
                "{} was trained on a different corpus artifact; its held-out split is undefined here (use --split all)",
                spec.path.display()
            )));
        }
        let name = spec.name.clone().unwrap_or_else(|| model.method_name());
        let prep = prepare(&corpus.videos, model.vocab(), &ckpt.config.model)?;
        let examples = prep.examples(req.split, ckpt.config.seed)?;
        let source = MethodSource::Model {
            params: &ckpt.params,
            config: &ckpt.config.model,
        };
        let threshold = req.threshold.unwrap_or(ckpt.config.threshold);
        rows.extend(run_ablation(&prep.videos, &examples, &[(name.clone(), source)], threshold));
        ins.insert(format!("model{k}"), model.hash.clone());
        names.push(name);
        if km_basis.is_none() {
            km_basis = Some((prep, examples));
        }
    }
    if let Some(kw_path) = req.keywords {
        let keywords = load_keywords(kw_path)?;
        let (prep, examples) = match km_basis {
            Some(b) => b,
            None => {
                let prep = prepare(&corpus.videos, &Vocabulary::empty(), &req.fallback.model)?;
                let ex = prep.examples(req.split, req.fallback.seed)?;
                (prep, ex)
            }
        };
        let threshold = req.threshold.unwrap_or(0.5);
        rows.extend(run_ablation(
            &prep.videos,
            &examples,
            &[("KM".to_string(), MethodSource::Keywords(&keywords))],
            threshold,
        ));
        ins.insert("keywords".to_string(), hash_file(kw_path)?);
        names.push("KM".to_string());
    }
    if names.is_empty() {
        return Err(Error::MissingInput("nothing to evaluate: give --ckpt or --keywords".to_string()));
    }
    let cfg = ReportConfig {
        split: req.split,
        threshold: req.threshold,
        methods: names,
    };
    Artifact::new(Kind::Report, cfg, ins, rows)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

/// CSV columns: method, category, precision, recall, f1, tp, fp, fn, tn, error.
pub fn render_report(report: &ReportArtifact, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::format("<report>", e.to_string());
            w.write_record(["method", "category", "precision", "recall", "f1", "tp", "fp", "fn", "tn", "error"])
                .map_err(io)?;
            for r in &report.payload {
                let mut rec = vec![r.method.clone(), r.category.clone()];
                match &r.metrics {
                    Some(m) => rec.extend([
                        m.precision.to_string(),
                        m.recall.to_string(),
                        m.f1.to_string(),
                        m.tp.to_string(),
                        m.fp.to_string(),
                        m.fn_.to_string(),
                        m.tn.to_string(),
                    ]),
                    None => rec.extend(std::iter::repeat(String::new()).take(7)),
                }
                rec.push(r.error.clone().unwrap_or_default());
                w.write_record(&rec).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::format("<report>", e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}

// -------------------------------------------------------------- predict

/// Scores every comment of every video with keyframes, in video order.
/// Returns the predictions and the ids of videos that could not be scored.
pub fn predict(ckpt: &Path, data: &Path) -> Result<(Vec<Prediction>, Vec<String>)> {
    let model = load_model(ckpt)?;
    let corpus = load_corpus(data)?;
    let c = model.checkpoint();
    let prep = prepare(&corpus.videos, model.vocab(), &c.config.model)?;
    let mut out = Vec::new();
    for v in 0..prep.videos.len() {
        for s in score_video(&c.params, &c.config.model, &prep.videos, v)? {
            out.push(s.to_prediction(&prep.videos));
        }
    }
    Ok((out, prep.excluded))
}

pub fn write_jsonl<W: Write, T: Serialize>(mut out: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    out.flush().map_err(|e| Error::io("<output>", e))
}

// ------------------------------------------------------- dump-attention

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionConfig {
    pub video: String,
    pub index: usize,
}

pub type AttentionArtifact = Artifact<AttentionConfig, AttentionDump>;

pub fn dump_attention(ckpt: &Path, data: &Path, video: &str, index: usize) -> Result<AttentionArtifact> {
    let model = load_model(ckpt)?;
    let corpus = load_corpus(data)?;
    let c = model.checkpoint();
    let prep = prepare(&corpus.videos, model.vocab(), &c.config.model)?;
    let v = prep
        .videos
        .iter()
        .position(|p| p.stream.video_id == video)
        .ok_or_else(|| Error::MissingInput(format!("video `{video}` is not in the data or has no keyframes")))?;
    let dump = export_attention(&c.params, &c.config.model, &prep.videos, v, index)?;
    let cfg = AttentionConfig {
        video: video.to_string(),
        index,
    };
    Artifact::new(
        Kind::Attention,
        cfg,
        inputs([("model", model.hash), ("data", corpus.hash)]),
        dump,
    )
}
