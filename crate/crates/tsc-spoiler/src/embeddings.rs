//! Plain-text word vectors: a `<vocab size> <dim>` header, then one line per
//! token holding the token and its `dim` components, space-separated.
//! Rows appear in id order, so the reserved tokens come first.

use std::io::{BufRead, Write};

use tsc_spoiler_core::embedding::{EmbeddingMatrix, Vocabulary, PAD_TOKEN, UNK_TOKEN};
use tsc_spoiler_core::matrix::Matrix;

use crate::error::{Error, Result};

fn invalid(line: usize, message: impl Into<String>) -> Error {
    Error::Line {
        line,
        message: message.into(),
    }
}

/// Writes every component in shortest round-trip form, so reading the file
/// back reproduces the matrix bit for bit.
pub fn write_embeddings<W: Write>(mut out: W, vocab: &Vocabulary, emb: &EmbeddingMatrix) -> Result<()> {
    let m = &emb.0;
    if vocab.len() != m.rows {
        return Err(Error::Config(format!(
            "vocabulary has {} tokens but the matrix has {} rows",
            vocab.len(),
            m.rows
        )));
    }
    let io = |e| Error::io("<embeddings>", e);
    writeln!(out, "{} {}", m.rows, m.cols).map_err(io)?;
    for (id, token) in vocab.tokens().iter().enumerate() {
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(Error::Config(format!("token `{token}` cannot be written: empty or contains whitespace")));
        }
        let mut line = token.clone();
        for v in emb.row(id) {
            if !v.is_finite() {
                return Err(Error::Config(format!("non-finite component in row `{token}`")));
            }
            line.push(' ');
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    Ok(())
}

/// Reads the format written by [`write_embeddings`]. Files without the
/// reserved `<unk>` and `<pad>` rows get zero rows for them, prepended.
pub fn read_embeddings<R: BufRead>(input: R) -> Result<(Vocabulary, EmbeddingMatrix)> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| invalid(1, "empty embeddings file"))?;
    let header = header.map_err(|e| invalid(1, e.to_string()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let (rows, dim) = match parts.as_slice() {
        [v, d] => (
            v.parse::<usize>().map_err(|_| invalid(1, "bad vocabulary size"))?,
            d.parse::<usize>().map_err(|_| invalid(1, "bad dimension"))?,
        ),
        _ => return Err(invalid(1, "header must be `<vocab size> <dim>`")),
    };
    if dim == 0 {
        return Err(invalid(1, "dimension must be positive"));
    }
    let mut tokens = Vec::with_capacity(rows);
    let mut data = Vec::with_capacity(rows * dim);
    for (k, line) in lines {
        let line_no = k + 1;
        let line = line.map_err(|e| invalid(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let token = parts.next().unwrap_or_default().to_string();
        let before = data.len();
        for p in parts {
            let v: f64 = p
                .parse()
                .map_err(|_| invalid(line_no, format!("bad component `{p}`")))?;
            data.push(v);
        }
        if data.len() - before != dim {
            return Err(invalid(
                line_no,
                format!("row `{token}` has {} components, expected {dim}", data.len() - before),
            ));
        }
        tokens.push(token);
    }
    if tokens.len() != rows {
        return Err(invalid(
            tokens.len() + 1,
            format!("header announces {rows} rows, found {}", tokens.len()),
        ));
    }
    let has_reserved = tokens.len() >= 2 && tokens[0] == UNK_TOKEN && tokens[1] == PAD_TOKEN;
    if !has_reserved {
        if tokens.iter().any(|t| t == UNK_TOKEN || t == PAD_TOKEN) {
            return Err(invalid(1, "reserved tokens must be the first two rows"));
        }
        tokens.splice(0..0, [UNK_TOKEN.to_string(), PAD_TOKEN.to_string()]);
        data.splice(0..0, std::iter::repeat(0.0).take(2 * dim));
    }
    let counts = vec![0; tokens.len()];
    let n = tokens.len();
    let vocab = Vocabulary::from_parts(tokens, counts)?;
    Ok((vocab, EmbeddingMatrix(Matrix::from_vec(n, dim, data)?)))
}
