//! Tokenizers, anomaly stripping and slang normalization.

use std::path::Path;
use std::sync::OnceLock;

use regex::{NoExpand, Regex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Splits normalized text into tokens.
pub trait Tokenizer {
    fn tokenize(&self, text: &str) -> Vec<String>;
}

/// Tokens are maximal runs of non-whitespace.
#[derive(Clone, Copy, Debug, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        text.split_whitespace().map(str::to_string).collect()
    }
}

/// For unsegmented scripts: every character is a token, except runs of ASCII
/// letters, digits and underscores, which stay whole.
#[derive(Clone, Copy, Debug, Default)]
pub struct CharTokenizer;

impl Tokenizer for CharTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut run = String::new();
        for c in text.chars() {
            if c.is_ascii_alphanumeric() || c == '_' {
                run.push(c);
                continue;
            }
            if !run.is_empty() {
                out.push(std::mem::take(&mut run));
            }
            if !c.is_whitespace() {
                out.push(c.to_string());
            }
        }
        if !run.is_empty() {
            out.push(run);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerKind {
    #[default]
    Whitespace,
    Char,
}

impl TokenizerKind {
    pub fn build(self) -> Box<dyn Tokenizer> {
        match self {
            TokenizerKind::Whitespace => Box::new(WhitespaceTokenizer),
            TokenizerKind::Char => Box::new(CharTokenizer),
        }
    }
}

fn anomaly_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[^\w\s]+").expect("valid pattern"))
}

/// Replaces every run of non-word punctuation with a single space.
pub fn strip_anomalies(text: &str) -> String {
    anomaly_pattern().replace_all(text, " ").into_owned()
}

#[derive(Clone, Debug)]
struct SlangRule {
    pattern: Regex,
    replacement: String,
}

/// Ordered regex rewrite rules for network slang. Replacements are literal.
#[derive(Clone, Debug, Default)]
pub struct SlangMap {
    rules: Vec<SlangRule>,
}

/// Upper bound on rewrite passes in [`SlangMap::apply`].
pub const MAX_SLANG_PASSES: usize = 64;

impl SlangMap {
    /// Compiles `(pattern, replacement)` pairs. A replacement that any
    /// pattern matches is rejected, as is a pattern matching the empty string.
    pub fn new<S: AsRef<str>>(rules: &[(S, S)]) -> Result<Self> {
        let mut compiled = Vec::with_capacity(rules.len());
        for (index, (p, r)) in rules.iter().enumerate() {
            let pattern = Regex::new(p.as_ref()).map_err(|e| Error::Slang {
                index,
                message: e.to_string(),
            })?;
            if pattern.is_match("") {
                return Err(Error::Slang {
                    index,
                    message: format!("pattern `{}` matches the empty string", p.as_ref()),
                });
            }
            compiled.push(SlangRule {
                pattern,
                replacement: r.as_ref().to_string(),
            });
        }
        for (index, rule) in compiled.iter().enumerate() {
            if let Some(other) = compiled.iter().position(|o| o.pattern.is_match(&rule.replacement)) {
                return Err(Error::Slang {
                    index,
                    message: format!(
                        "replacement `{}` is matched by the pattern of rule {other}",
                        rule.replacement
                    ),
                });
            }
        }
        Ok(SlangMap { rules: compiled })
    }

    /// Reads tab-separated `pattern<TAB>replacement` lines; blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (p, r) = line.split_once('\t').ok_or_else(|| Error::Line {
                line: k + 1,
                message: "expected `pattern<TAB>replacement`".to_string(),
            })?;
            pairs.push((p.to_string(), r.to_string()));
        }
        Self::new(&pairs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    fn pass(&self, text: &str) -> String {
        let mut out = text.to_string();
        for rule in &self.rules {
            if rule.pattern.is_match(&out) {
                out = rule.pattern.replace_all(&out, NoExpand(&rule.replacement)).into_owned();
            }
        }
        out
    }

    /// Applies the rules in order, repeating until the text stops changing
    /// (at most [`MAX_SLANG_PASSES`] passes).
    pub fn apply(&self, text: &str) -> String {
        let mut current = text.to_string();
        for _ in 0..MAX_SLANG_PASSES {
            let next = self.pass(&current);
            if next == current {
                break;
            }
            current = next;
        }
        current
    }
}

/// Slang rewrite, anomaly stripping, then tokenization.
pub fn normalize(text: &str, slang: &SlangMap, tokenizer: &dyn Tokenizer) -> Vec<String> {
    tokenizer.tokenize(&strip_anomalies(&slang.apply(text)))
}
