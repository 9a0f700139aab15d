//! The corpus text format: one comment per line,
//! `video_id<TAB>timestamp<TAB>"text"[<TAB>label[<TAB>category]]`.
//! Lines starting with `#` and blank lines are ignored.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use tsc_spoiler_core::corpus::{TscRecord, VideoStream};

use crate::error::{Error, Result};
use crate::text::{normalize, SlangMap, Tokenizer};

/// A line that could not be parsed.
#[derive(Clone, Debug, PartialEq)]
pub struct LineIssue {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct ParsedCorpus {
    /// Videos in order of first appearance, records sorted by timestamp.
    pub videos: Vec<VideoStream>,
    /// Malformed lines that were skipped.
    pub skipped: Vec<LineIssue>,
    /// Records dropped because normalization left no tokens.
    pub dropped_empty: usize,
}

struct Fields<'a> {
    video_id: &'a str,
    timestamp: f64,
    text: String,
    label: Option<u8>,
    category: Option<&'a str>,
}

fn unquote(field: &str) -> String {
    match field.strip_prefix('"').and_then(|f| f.strip_suffix('"')) {
        Some(inner) => inner.replace("\"\"", "\""),
        None => field.to_string(),
    }
}

fn parse_line(line: &str) -> std::result::Result<Fields<'_>, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if !(3..=5).contains(&cols.len()) {
        return Err(format!("expected 3 to 5 tab-separated fields, found {}", cols.len()));
    }
    let video_id = cols[0].trim();
    if video_id.is_empty() {
        return Err("empty video id".to_string());
    }
    let timestamp: f64 = cols[1]
        .trim()
        .parse()
        .map_err(|_| format!("invalid timestamp `{}`", cols[1]))?;
    if !timestamp.is_finite() || timestamp < 0.0 {
        return Err(format!("timestamp must be a non-negative number, got `{}`", cols[1]));
    }
    let label = match cols.get(3).map(|s| s.trim()) {
        None | Some("") => None,
        Some("0") => Some(0),
        Some("1") => Some(1),
        Some(other) => return Err(format!("label must be 0 or 1, got `{other}`")),
    };
    let category = cols.get(4).map(|s| s.trim()).filter(|s| !s.is_empty());
    Ok(Fields {
        video_id,
        timestamp,
        text: unquote(cols[2]),
        label,
        category,
    })
}

/// Parses a corpus stream. Malformed lines are recorded in
/// [`ParsedCorpus::skipped`], or abort the parse when `strict` is set.
pub fn parse_corpus<R: BufRead>(
    input: R,
    slang: &SlangMap,
    tokenizer: &dyn Tokenizer,
    strict: bool,
) -> Result<ParsedCorpus> {
    let mut order: Vec<(String, Option<String>, Vec<TscRecord>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut out = ParsedCorpus::default();
    for (k, line) in input.lines().enumerate() {
        let line_no = k + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                let issue = LineIssue {
                    line: line_no,
                    message: e.to_string(),
                };
                if strict || e.kind() != std::io::ErrorKind::InvalidData {
                    return Err(Error::Line {
                        line: issue.line,
                        message: issue.message,
                    });
                }
                out.skipped.push(issue);
                continue;
            }
        };
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f = match parse_line(line) {
            Ok(f) => f,
            Err(message) if strict => return Err(Error::Line { line: line_no, message }),
            Err(message) => {
                out.skipped.push(LineIssue { line: line_no, message });
                continue;
            }
        };
        let tokens = normalize(&f.text, slang, tokenizer);
        if tokens.is_empty() {
            out.dropped_empty += 1;
            continue;
        }
        let slot = *index.entry(f.video_id.to_string()).or_insert_with(|| {
            order.push((f.video_id.to_string(), None, Vec::new()));
            order.len() - 1
        });
        let entry = &mut order[slot];
        if entry.1.is_none() {
            entry.1 = f.category.map(str::to_string);
        }
        entry.2.push(TscRecord {
            video_id: f.video_id.to_string(),
            timestamp: f.timestamp,
            raw_text: f.text,
            tokens,
            label: f.label,
        });
    }
    out.videos = order
        .into_iter()
        .map(|(id, category, records)| VideoStream::new(id, records, None).with_category(category))
        .collect();
    Ok(out)
}

fn clean(text: &str) -> String {
    text.replace(['\t', '\n', '\r'], " ").replace('"', "\"\"")
}

/// Writes videos in the corpus format, text quoted.
pub fn write_corpus<W: Write>(mut out: W, videos: &[VideoStream]) -> std::io::Result<()> {
    for v in videos {
        for r in &v.records {
            write!(out, "{}\t{}\t\"{}\"\t", v.video_id, r.timestamp, clean(&r.raw_text))?;
            if let Some(l) = r.label {
                write!(out, "{l}")?;
            }
            if let Some(c) = &v.category {
                write!(out, "\t{c}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}
