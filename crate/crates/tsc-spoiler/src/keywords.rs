//! Keyword lists for the keyword-matching baseline: `scope<TAB>keyword` lines,
//! where scope is a video id, `category:<tag>` or `*`.

use std::io::Write;
use std::path::Path;

use tsc_spoiler_core::evaluator::KeywordList;

use crate::error::{Error, Result};

pub fn parse_keywords(text: &str) -> Result<KeywordList> {
    let mut list = KeywordList::default();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (scope, word) = line.split_once('\t').ok_or_else(|| Error::Line {
            line: k + 1,
            message: "expected `scope<TAB>keyword`".to_string(),
        })?;
        let (scope, word) = (scope.trim(), word.trim());
        if scope.is_empty() || word.is_empty() {
            return Err(Error::Line {
                line: k + 1,
                message: "empty scope or keyword".to_string(),
            });
        }
        list.insert(scope, word);
    }
    if list.scopes.values().all(Vec::is_empty) {
        return Err(tsc_spoiler_core::Error::EmptyKeywords.into());
    }
    Ok(list)
}

pub fn load_keywords(path: &Path) -> Result<KeywordList> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_keywords(&text).map_err(|e| match e {
        Error::Line { line, message } => Error::format(path, format!("line {line}: {message}")),
        other => other,
    })
}

pub fn write_keywords<W: Write>(mut out: W, list: &KeywordList) -> std::io::Result<()> {
    for (scope, words) in &list.scopes {
        for w in words {
            writeln!(out, "{scope}\t{w}")?;
        }
    }
    Ok(())
}
