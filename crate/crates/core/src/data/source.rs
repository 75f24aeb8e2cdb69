//! Example sources that can be replayed once per epoch.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{parse_libsvm_line, parse_token_line, SparseExample, TokenHasher};
use crate::error::{Error, Result};
use crate::hashing::derive_seed;

pub type ExampleIter<'a> = Box<dyn Iterator<Item = Result<SparseExample>> + Send + 'a>;

/// Anything that yields the same multiset of examples every epoch.
pub trait ExampleSource: Sync {
    fn open_epoch(&self, epoch: usize) -> Result<ExampleIter<'_>>;
}

/// In-memory examples with an optional per-epoch shuffle.
#[derive(Debug, Clone, Default)]
pub struct MemorySource {
    examples: Vec<SparseExample>,
    shuffle_seed: Option<u64>,
}

impl MemorySource {
    pub fn new(examples: Vec<SparseExample>) -> Self {
        MemorySource {
            examples,
            shuffle_seed: None,
        }
    }

    pub fn shuffled(mut self, seed: u64) -> Self {
        self.shuffle_seed = Some(seed);
        self
    }

    pub fn examples(&self) -> &[SparseExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Visiting order for an epoch.
    pub fn order(&self, epoch: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.examples.len()).collect();
        if let Some(seed) = self.shuffle_seed {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[epoch as u64]));
            order.shuffle(&mut rng);
        }
        order
    }
}

impl ExampleSource for MemorySource {
    fn open_epoch(&self, epoch: usize) -> Result<ExampleIter<'_>> {
        let order = self.order(epoch);
        Ok(Box::new(
            order.into_iter().map(move |i| Ok(self.examples[i].clone())),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Libsvm,
    Tokens { bits: u32, seed: u64 },
}

/// Text file read sequentially each epoch; `.gz` paths are decompressed.
#[derive(Debug, Clone)]
pub struct FileSource {
    path: PathBuf,
    format: DataFormat,
}

impl FileSource {
    pub fn new(path: impl AsRef<Path>, format: DataFormat) -> Result<Self> {
        if let DataFormat::Tokens { bits, seed } = format {
            TokenHasher::new(bits, seed)?;
        }
        Ok(FileSource {
            path: path.as_ref().to_path_buf(),
            format,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn reader(&self) -> Result<Box<dyn BufRead + Send>> {
        let file = File::open(&self.path)?;
        let gz = self.path.extension().is_some_and(|e| e == "gz");
        let raw: Box<dyn Read + Send> = if gz {
            Box::new(MultiGzDecoder::new(file))
        } else {
            Box::new(file)
        };
        Ok(Box::new(BufReader::with_capacity(1 << 16, raw)))
    }

    /// Reads every record into memory.
    pub fn load(&self) -> Result<Vec<SparseExample>> {
        self.open_epoch(0)?.collect()
    }
}

impl ExampleSource for FileSource {
    fn open_epoch(&self, _epoch: usize) -> Result<ExampleIter<'_>> {
        let lines = self.reader()?.lines();
        let format = self.format;
        let hasher = match format {
            DataFormat::Tokens { bits, seed } => Some(TokenHasher::new(bits, seed)?),
            DataFormat::Libsvm => None,
        };
        let iter = lines.enumerate().filter_map(move |(lineno, line)| {
            let record = lineno + 1;
            let wrap = |e: Error| Error::Record {
                record,
                source: Box::new(e),
            };
            let line = match line {
                Ok(line) => line,
                Err(e) => return Some(Err(wrap(e.into()))),
            };
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                return None;
            }
            let parsed = match &hasher {
                Some(h) => parse_token_line(&line, h, None),
                None => parse_libsvm_line(&line),
            };
            Some(parsed.map_err(wrap))
        });
        Ok(Box::new(iter))
    }
}

/// Concatenates `epochs` passes over a source, tagging each example with its
/// epoch index.
pub fn stream<S: ExampleSource + ?Sized>(
    source: &S,
    epochs: usize,
) -> impl Iterator<Item = Result<(usize, SparseExample)>> + '_ {
    (0..epochs).flat_map(move |epoch| {
        let items: Box<dyn Iterator<Item = Result<(usize, SparseExample)>>> =
            match source.open_epoch(epoch) {
                Ok(it) => Box::new(it.map(move |r| r.map(|ex| (epoch, ex)))),
                Err(e) => Box::new(std::iter::once(Err(e))),
            };
        items
    })
}
