//! Command-line interface. Flags override values from `--config`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use tsc_spoiler_core::sbn::SbnOptions;
use tsc_spoiler_core::trainer::TrainConfig;

use crate::config::{PipelineConfig, PreprocessConfig};
use crate::error::{Error, Result};
use crate::pipeline::{self, CorpusConfig, EvaluateRequest, KeyframeConfig, ModelSpec, ReportFormat, SplitChoice};
use crate::text::TokenizerKind;

#[derive(Debug, Parser)]
#[command(name = "tsc-spoiler", version, about = "Spoiler detection for time-sync comments")]
pub struct Cli {
    /// Pipeline configuration file (TOML, or JSON by extension).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic corpus and its keyword list.
    Synth(SynthArgs),
    /// Parse, normalize and filter a raw corpus file.
    Preprocess(PreprocessArgs),
    /// Extract keyframe windows per video.
    Keyframes(KeyframesArgs),
    /// Train skip-gram word vectors.
    TrainEmbeddings(EmbeddingArgs),
    /// Train the spoiler classifier.
    Train(TrainArgs),
    /// Train once per decay rate and report validation F1.
    SweepBeta(SweepArgs),
    /// Precision, recall and F1 of checkpoints and the keyword baseline.
    Evaluate(EvaluateArgs),
    /// Evaluate the keyword-matching baseline alone.
    Km(KmArgs),
    /// Spoiler probability of every comment, as JSON lines.
    Predict(PredictArgs),
    /// Word and sentence attention of one comment, as JSON.
    DumpAttention(DumpArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub videos: Option<usize>,
    #[arg(long)]
    pub comments: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of non-spoiler comments replaced by noise.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Keyword list output; defaults to `<out stem>.keywords.tsv`.
    #[arg(long)]
    pub keywords_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub slang: Option<PathBuf>,
    #[arg(long)]
    pub min_count: Option<usize>,
    #[arg(long)]
    pub min_density: Option<f64>,
    #[arg(long, value_enum)]
    pub tokenizer: Option<TokenizerKind>,
    /// Abort on the first malformed line.
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KeyframesArgs {
    /// Preprocessed corpus.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub frame_len: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbeddingArgs {
    /// Preprocessed corpus.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub neg: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub min_freq: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Sbn,
    SbnWt,
    SbnIva,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Preprocessed corpus.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train the word vectors along with the classifier.
    #[arg(long)]
    pub tune_embeddings: bool,
    /// Accept embeddings trained on a different corpus artifact.
    #[arg(long)]
    pub allow_mismatch: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long, default_value = "0:0.5:0.05")]
    pub betas: String,
    /// CSV output (`beta,f1`); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Checkpoint, optionally named: `NAME=PATH`. Repeatable.
    #[arg(long)]
    pub ckpt: Vec<String>,
    /// Also evaluate the keyword baseline with this list.
    #[arg(long)]
    pub keywords: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitChoice,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    pub report: ReportFormat,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KmArgs {
    #[arg(long)]
    pub keywords: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    pub split: SplitChoice,
    #[arg(long, value_enum, default_value = "csv")]
    pub report: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// JSON lines output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub video: String,
    #[arg(long)]
    pub index: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn need(flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| Error::MissingInput(format!("--{name} is required")))
}

fn exists(path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingInput(format!("{} does not exist", path.display())))
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn train_config(base: &TrainConfig, a: &ModelArgs) -> TrainConfig {
    let mut c = base.clone();
    if let Some(m) = a.method {
        let beta = c.model.sbn.beta;
        c.model.sbn = match m {
            Method::Sbn => SbnOptions::sbn(beta),
            Method::SbnWt => SbnOptions::sbn_wt(),
            Method::SbnIva => SbnOptions::sbn_iva(beta),
        };
    }
    if let Some(b) = a.beta {
        c.model.sbn.beta = b;
    }
    if let Some(v) = a.epochs {
        c.epochs = v;
    }
    if let Some(v) = a.lr {
        c.adam.lr = v;
    }
    if let Some(v) = a.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = a.hidden {
        c.model.hidden_dim = v;
    }
    if let Some(v) = a.patience {
        c.patience = v;
    }
    if let Some(v) = a.seed {
        c.seed = v;
    }
    if a.tune_embeddings {
        c.freeze_embeddings = false;
    }
    c
}

/// Applies flag overrides and validates the result before any stage runs.
fn resolve(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(&exists(p.clone())?)?,
        None => PipelineConfig::default(),
    };
    match &cli.command {
        Command::Synth(a) => {
            let s = &mut cfg.synth;
            s.videos = a.videos.unwrap_or(s.videos);
            s.comments_per_video = a.comments.unwrap_or(s.comments_per_video);
            s.seed = a.seed.unwrap_or(s.seed);
            s.noise_rate = a.noise.unwrap_or(s.noise_rate);
        }
        Command::Preprocess(a) => {
            cfg.filter.min_count = a.min_count.unwrap_or(cfg.filter.min_count);
            cfg.filter.min_density = a.min_density.unwrap_or(cfg.filter.min_density);
            cfg.preprocess.tokenizer = a.tokenizer.unwrap_or(cfg.preprocess.tokenizer);
            cfg.preprocess.strict |= a.strict;
        }
        Command::Keyframes(a) => {
            let m = &mut cfg.train.model;
            m.keyframes = a.p.unwrap_or(m.keyframes);
            m.frame_len = a.frame_len.unwrap_or(m.frame_len);
        }
        Command::TrainEmbeddings(a) => {
            let e = &mut cfg.embedding;
            e.dim = a.dim.unwrap_or(e.dim);
            e.window = a.window.unwrap_or(e.window);
            e.negatives = a.neg.unwrap_or(e.negatives);
            e.epochs = a.epochs.unwrap_or(e.epochs);
            e.lr = a.lr.unwrap_or(e.lr);
            e.seed = a.seed.unwrap_or(e.seed);
            e.min_freq = a.min_freq.unwrap_or(e.min_freq);
        }
        Command::Train(TrainArgs { model, .. }) | Command::SweepBeta(SweepArgs { model, .. }) => {
            cfg.train = train_config(&cfg.train, model);
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one command, writing progress to `log`.
pub fn run(cli: Cli, log: &mut dyn Write) -> Result<()> {
    let cfg = resolve(&cli)?;
    let paths = &cfg.paths;
    let mut say = |msg: String| {
        let _ = writeln!(log, "{msg}");
    };
    match cli.command {
        Command::Synth(a) => {
            let kw = a.keywords_out.unwrap_or_else(|| pipeline::keywords_path_for(&a.out));
            let n = pipeline::synth(&cfg.synth, &a.out, &kw)?;
            say(format!("wrote {n} comments to {} and keywords to {}", a.out.display(), kw.display()));
        }
        Command::Preprocess(a) => {
            let input = exists(need(a.input, &paths.corpus, "input")?)?;
            let slang = match a.slang.or_else(|| paths.slang.clone()) {
                Some(p) => Some(exists(p)?),
                None => None,
            };
            let out = need(a.out, &paths.data, "out")?;
            let corpus_cfg = CorpusConfig {
                filter: cfg.filter.clone(),
                preprocess: PreprocessConfig {
                    tokenizer: cfg.preprocess.tokenizer,
                    strict: cfg.preprocess.strict,
                },
            };
            let s = pipeline::preprocess(&input, slang.as_deref(), &corpus_cfg, &out)?;
            for issue in &s.skipped {
                say(format!("{}: line {}: {} (skipped)", input.display(), issue.line, issue.message));
            }
            say(format!(
                "kept {} of {} videos ({} comments, {} empty after normalization)",
                s.videos_kept, s.videos_read, s.records, s.dropped_empty
            ));
        }
        Command::Keyframes(a) => {
            let input = exists(need(a.input, &paths.data, "input")?)?;
            let kc = KeyframeConfig {
                p: cfg.train.model.keyframes,
                frame_len: cfg.train.model.frame_len,
            };
            let map = pipeline::keyframes(&input, &kc, &a.out)?;
            let empty = map.values().filter(|w| w.is_empty()).count();
            say(format!("{} videos, {empty} without keyframes", map.len()));
        }
        Command::TrainEmbeddings(a) => {
            let input = exists(need(a.input, &paths.data, "input")?)?;
            let out = need(a.out, &paths.embeddings, "out")?;
            let meta = pipeline::train_embeddings(&input, &cfg.embedding, &out)?;
            say(format!(
                "{} tokens x {} dims, final loss {:.4}",
                meta.vocab_size,
                meta.dim,
                meta.epoch_losses.last().copied().unwrap_or(f64::NAN)
            ));
        }
        Command::Train(a) => {
            let data = exists(need(a.model.data, &paths.data, "data")?)?;
            let emb = exists(need(a.model.embeddings, &paths.embeddings, "embeddings")?)?;
            let out = need(a.out, &paths.checkpoint, "out")?;
            let ckpt = pipeline::train_model(&data, &emb, &cfg.train, &out, a.model.allow_mismatch)?;
            let f1 = ckpt.validation().map(|m| m.f1).unwrap_or(f64::NAN);
            say(format!("best epoch {} (validation F1 {f1:.4})", ckpt.epoch));
        }
        Command::SweepBeta(a) => {
            let data = exists(need(a.model.data, &paths.data, "data")?)?;
            let emb = exists(need(a.model.embeddings, &paths.embeddings, "embeddings")?)?;
            let betas = pipeline::parse_betas(&a.betas)?;
            let r = pipeline::sweep(&data, &emb, &cfg.train, &betas, a.out.as_deref(), a.model.allow_mismatch)?;
            say(format!("best beta {}", r.best_beta));
        }
        Command::Evaluate(a) => {
            let data = exists(need(a.data, &paths.data, "data")?)?;
            let mut models: Vec<ModelSpec> = a.ckpt.iter().map(|s| ModelSpec::parse(s)).collect();
            if models.is_empty() {
                if let Some(p) = &paths.checkpoint {
                    models.push(ModelSpec { name: None, path: p.clone() });
                }
            }
            let keywords = match a.keywords {
                Some(p) => Some(exists(p)?),
                None => None,
            };
            let report = pipeline::evaluate(&EvaluateRequest {
                models: &models,
                keywords: keywords.as_deref(),
                data: &data,
                split: a.split,
                threshold: a.threshold,
                fallback: &cfg.train,
            })?;
            emit(a.out.as_deref(), &pipeline::render_report(&report, a.report)?)?;
            if report.payload.iter().all(|r| r.metrics.is_none()) {
                return Err(Error::MissingInput("no method could be evaluated".to_string()));
            }
        }
        Command::Km(a) => {
            let data = exists(need(a.data, &paths.data, "data")?)?;
            let keywords = exists(need(a.keywords, &paths.keywords, "keywords")?)?;
            let report = pipeline::evaluate(&EvaluateRequest {
                models: &[],
                keywords: Some(&keywords),
                data: &data,
                split: a.split,
                threshold: None,
                fallback: &cfg.train,
            })?;
            emit(a.out.as_deref(), &pipeline::render_report(&report, a.report)?)?;
        }
        Command::Predict(a) => {
            let ckpt = exists(need(a.ckpt, &paths.checkpoint, "ckpt")?)?;
            let data = exists(need(a.data, &paths.data, "data")?)?;
            let (preds, excluded) = pipeline::predict(&ckpt, &data)?;
            let mut buf = Vec::new();
            pipeline::write_jsonl(&mut buf, &preds)?;
            emit(a.out.as_deref(), std::str::from_utf8(&buf).expect("json is utf-8"))?;
            for id in excluded {
                say(format!("video `{id}` has no keyframes; not scored"));
            }
        }
        Command::DumpAttention(a) => {
            let ckpt = exists(need(a.ckpt, &paths.checkpoint, "ckpt")?)?;
            let data = exists(need(a.data, &paths.data, "data")?)?;
            let dump = pipeline::dump_attention(&ckpt, &data, &a.video, a.index)?;
            emit(a.out.as_deref(), &dump.to_json()?)?;
        }
    }
    Ok(())
}
