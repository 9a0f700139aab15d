//! Pipeline configuration file (TOML, or JSON when the file ends in `.json`).
//!
//! ```toml
//! [paths]
//! corpus = "comments.tsv"
//! data = "corpus.json"
//!
//! [filter]
//! min_count = 300
//! min_density = 0.1
//!
//! [train]
//! epochs = 30
//! [train.model]
//! keyframes = 3
//! frame_len = 10.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsc_spoiler_core::corpus::{DEFAULT_MIN_COUNT, DEFAULT_MIN_DENSITY};
use tsc_spoiler_core::embedding::SkipGramConfig;
use tsc_spoiler_core::synth::SynthConfig;
use tsc_spoiler_core::trainer::TrainConfig;

use crate::error::{Error, Result};
use crate::text::TokenizerKind;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Raw corpus file.
    pub corpus: Option<PathBuf>,
    pub slang: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
    /// Preprocessed corpus artifact.
    pub data: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub min_count: usize,
    pub min_density: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_count: DEFAULT_MIN_COUNT,
            min_density: DEFAULT_MIN_DENSITY,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub tokenizer: TokenizerKind,
    /// Abort on the first malformed line instead of skipping it.
    pub strict: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Tokens seen fewer times map to `<unk>`.
    pub min_freq: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        let s = SkipGramConfig::default();
        EmbeddingConfig {
            dim: s.dim,
            window: s.window,
            negatives: s.negatives,
            epochs: s.epochs,
            lr: s.lr,
            seed: s.seed,
            min_freq: 1,
        }
    }
}

impl EmbeddingConfig {
    pub fn skipgram(&self) -> SkipGramConfig {
        SkipGramConfig {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            epochs: self.epochs,
            lr: self.lr,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 {
            return Err(Error::Config("embedding.dim and embedding.window must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("embedding.lr must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub filter: FilterConfig,
    pub preprocess: PreprocessConfig,
    pub embedding: EmbeddingConfig,
    pub train: TrainConfig,
    pub synth: SynthConfig,
}

impl PipelineConfig {
    pub fn parse(text: &str, json: bool) -> Result<Self> {
        if json {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let json = path.extension().is_some_and(|e| e == "json");
        Self::parse(&text, json).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.filter;
        if !f.min_density.is_finite() || f.min_density < 0.0 {
            return Err(Error::Config("filter.min_density must be a non-negative number".into()));
        }
        self.embedding.validate()?;
        self.train.validate().map_err(|e| Error::Config(format!("train: {e}")))?;
        self.synth.validate().map_err(|e| Error::Config(format!("synth: {e}")))?;
        Ok(())
    }
}
