//! Token features hashed into a `2^bits` id space.
//!
//! Lines look like `label<TAB>tok1 tok2 ...`. Each token becomes a feature
//! with value 1.0 (repeats are counted). The token to id map is not kept; an
//! optional [`TokenDictionary`] records id to token for reporting.

use std::collections::HashMap;

use super::SparseExample;
use crate::error::{Error, Result};
use crate::hashing::hash_bytes;

/// Deterministic id in `[0, 2^bits)`.
///
/// # Panics
///
/// If `bits > 63`.
pub fn hash_token(token: &[u8], bits: u32, seed: u64) -> u64 {
    assert!(bits <= 63, "token space is at most 63 bits");
    if bits == 0 {
        return 0;
    }
    hash_bytes(token, seed) >> (64 - bits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenHasher {
    bits: u32,
    seed: u64,
}

impl TokenHasher {
    pub fn new(bits: u32, seed: u64) -> Result<Self> {
        if bits > 63 {
            return Err(Error::Config(format!("hash bits {bits} exceed 63")));
        }
        Ok(TokenHasher { bits, seed })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn id(&self, token: &str) -> u64 {
        hash_token(token.as_bytes(), self.bits, self.seed)
    }

    pub fn example<'a, I>(&self, tokens: I, label: f64) -> Result<SparseExample>
    where
        I: IntoIterator<Item = &'a str>,
    {
        SparseExample::from_pairs(tokens.into_iter().map(|t| (self.id(t), 1.0)), label)
    }
}

/// Side table from hashed id to the first token seen with it.
#[derive(Debug, Default, Clone)]
pub struct TokenDictionary {
    names: HashMap<u64, String>,
}

impl TokenDictionary {
    pub fn record(&mut self, id: u64, token: &str) {
        self.names.entry(id).or_insert_with(|| token.to_owned());
    }

    pub fn lookup(&self, id: u64) -> Option<&str> {
        self.names.get(&id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

pub fn parse_token_line(
    line: &str,
    hasher: &TokenHasher,
    dictionary: Option<&mut TokenDictionary>,
) -> Result<SparseExample> {
    let (label, rest) = line.split_once('\t').unwrap_or((line, ""));
    let label: f64 = label.trim().parse().map_err(|_| Error::Parse {
        offset: 0,
        message: format!("bad label {label:?}"),
    })?;
    let tokens = rest.split_ascii_whitespace();
    if let Some(dict) = dictionary {
        for t in rest.split_ascii_whitespace() {
            dict.record(hasher.id(t), t);
        }
    }
    hasher.example(tokens, label)
}
