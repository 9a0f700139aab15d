//! Versioned JSON envelopes for stage outputs.
//!
//! ```json
//! {"format": "tsc-spoiler", "version": 1, "kind": "checkpoint",
//!  "config_hash": "<sha256 of the stage config>",
//!  "inputs": {"corpus": "<sha256 of the input file>"},
//!  "config": {...}, "payload": {...}}
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::de::{DeserializeOwned, IgnoredAny};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const FORMAT: &str = "tsc-spoiler";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Corpus,
    Keyframes,
    Embeddings,
    Checkpoint,
    Report,
    Attention,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Kind::Corpus => "corpus",
            Kind::Keyframes => "keyframes",
            Kind::Embeddings => "embeddings",
            Kind::Checkpoint => "checkpoint",
            Kind::Report => "report",
            Kind::Attention => "attention",
        };
        f.write_str(s)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the canonical (compact) JSON form of `value`.
pub fn hash_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(value)?))
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Artifact<C, T> {
    pub format: String,
    pub version: u32,
    pub kind: Kind,
    pub config_hash: String,
    /// Input name to SHA-256 of the file it was read from.
    pub inputs: BTreeMap<String, String>,
    pub config: C,
    pub payload: T,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
    kind: Kind,
    #[allow(dead_code)]
    payload: IgnoredAny,
}

impl<C: Serialize + DeserializeOwned, T: Serialize + DeserializeOwned> Artifact<C, T> {
    pub fn new(kind: Kind, config: C, inputs: BTreeMap<String, String>, payload: T) -> Result<Self> {
        Ok(Artifact {
            format: FORMAT.to_string(),
            version: VERSION,
            kind,
            config_hash: hash_json(&config)?,
            inputs,
            config,
            payload,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// Parses `text`, rejecting foreign formats, other versions, a kind other
    /// than `expected`, and a config that no longer matches its hash.
    pub fn from_json(text: &str, expected: Kind, origin: &Path) -> Result<Self> {
        let header: Header = serde_json::from_str(text)
            .map_err(|e| Error::format(origin, format!("not a {FORMAT} artifact: {e}")))?;
        if header.format != FORMAT {
            return Err(Error::Mismatch(format!(
                "{}: format `{}`, expected `{FORMAT}`",
                origin.display(),
                header.format
            )));
        }
        if header.version != VERSION {
            return Err(Error::Mismatch(format!(
                "{}: artifact version {}, this build reads version {VERSION}",
                origin.display(),
                header.version
            )));
        }
        if header.kind != expected {
            return Err(Error::Mismatch(format!(
                "{}: expected a {expected} artifact, found {}",
                origin.display(),
                header.kind
            )));
        }
        let art: Self = serde_json::from_str(text).map_err(|e| Error::format(origin, e.to_string()))?;
        if hash_json(&art.config)? != art.config_hash {
            return Err(Error::Mismatch(format!(
                "{}: config does not match its recorded hash",
                origin.display()
            )));
        }
        Ok(art)
    }

    pub fn read(path: &Path, expected: Kind) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, expected, path)
    }
}
