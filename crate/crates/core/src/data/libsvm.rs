//! libsvm text format: `label idx:val idx:val ... [# comment]`.
//!
//! Indices are 1-based on disk and 0-based in memory. Pairs may appear in any
//! order; repeated indices are summed.

use std::fmt::Write as _;

use super::SparseExample;
use crate::error::{Error, Result};

pub fn parse_libsvm_line(line: &str) -> Result<SparseExample> {
    let body = match line.find('#') {
        Some(cut) => &line[..cut],
        None => line,
    };
    let offset_of = |token: &str| token.as_ptr() as usize - line.as_ptr() as usize;
    let mut tokens = body.split_ascii_whitespace();
    let label_tok = tokens.next().ok_or_else(|| Error::Parse {
        offset: 0,
        message: "missing label".into(),
    })?;
    let label = parse_number(label_tok, offset_of(label_tok), "label")?;

    let mut pairs = Vec::new();
    for tok in tokens {
        let at = offset_of(tok);
        let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
            offset: at,
            message: format!("expected `index:value`, got {tok:?}"),
        })?;
        let idx: u64 = idx.parse().map_err(|_| Error::Parse {
            offset: at,
            message: format!("bad feature index {idx:?}"),
        })?;
        if idx == 0 {
            return Err(Error::Parse {
                offset: at,
                message: "feature indices are 1-based".into(),
            });
        }
        let val = parse_number(val, at + tok.find(':').unwrap_or(0) + 1, "feature value")?;
        pairs.push((idx - 1, val));
    }
    SparseExample::from_pairs(pairs, label)
}

fn parse_number(text: &str, offset: usize, what: &str) -> Result<f64> {
    let value: f64 = text.parse().map_err(|_| Error::Parse {
        offset,
        message: format!("bad {what} {text:?}"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            offset,
            message: format!("non-finite {what} {text:?}"),
        });
    }
    Ok(value)
}

/// Formats an example as one libsvm line (without newline).
pub fn format_libsvm(example: &SparseExample) -> String {
    let mut out = String::new();
    write!(out, "{}", example.label()).expect("write to String");
    for (i, v) in example.iter() {
        write!(out, " {}:{}", i + 1, v).expect("write to String");
    }
    out
}
