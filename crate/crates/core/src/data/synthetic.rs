//! Synthetic generators: dense Gaussian designs with a planted sparse support,
//! and token streams with planted informative features.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SparseExample;
use crate::error::{Error, Result};

/// Largest design (rows times columns) the dense generator will build.
pub const MAX_DESIGN_CELLS: usize = 100_000_000;

/// Variance convention for design entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignScale {
    /// Entries are N(0, 1).
    #[default]
    Unit,
    /// Entries are N(0, 1/n).
    InverseN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDesign {
    pub p: usize,
    pub n: usize,
    pub k: usize,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default = "one")]
    pub attenuation: f64,
    #[serde(default)]
    pub scale: DesignScale,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl SyntheticDesign {
    pub fn new(p: usize, n: usize, k: usize, seed: u64) -> Self {
        SyntheticDesign {
            p,
            n,
            k,
            noise_sd: 0.0,
            attenuation: 1.0,
            scale: DesignScale::Unit,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n == 0 {
            return Err(Error::InvalidSpec(format!(
                "empty design {}x{}",
                self.n, self.p
            )));
        }
        if self.k > self.n.min(self.p) {
            return Err(Error::InvalidSpec(format!(
                "k={} exceeds min(n={}, p={})",
                self.k, self.n, self.p
            )));
        }
        if !(self.attenuation.is_finite() && self.attenuation >= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "attenuation {} must be a finite value >= 1",
                self.attenuation
            )));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "noise sd {} must be finite and non-negative",
                self.noise_sd
            )));
        }
        match self.n.checked_mul(self.p) {
            Some(cells) if cells <= MAX_DESIGN_CELLS => Ok(()),
            _ => Err(Error::InvalidSpec(format!(
                "design {}x{} exceeds {MAX_DESIGN_CELLS} cells",
                self.n, self.p
            ))),
        }
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column_sq_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (acc, &x) in out.iter_mut().zip(self.row(i)) {
                *acc += x * x;
            }
        }
        out
    }

    pub fn max_column_sq_norm(&self) -> f64 {
        self.column_sq_norms().into_iter().fold(0.0, f64::max)
    }

    /// `X v` for a sparse `v` given as (column, value) pairs.
    pub fn mul_sparse(&self, v: &[(u64, f64)]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                v.iter().map(|&(j, w)| row[j as usize] * w).sum()
            })
            .collect()
    }

    /// `X^T r`.
    pub fn mul_transpose(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &ri) in r.iter().enumerate() {
            if ri == 0.0 {
                continue;
            }
            for (acc, &x) in out.iter_mut().zip(self.row(i)) {
                *acc += x * ri;
            }
        }
        out
    }

    pub fn to_examples(&self, labels: &[f64]) -> Result<Vec<SparseExample>> {
        if labels.len() != self.rows {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: self.rows,
            });
        }
        (0..self.rows)
            .map(|i| SparseExample::from_dense(self.row(i), labels[i]))
            .collect()
    }
}

/// Design matrix, planted coefficients and responses.
#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    pub design: DenseMatrix,
    /// Ascending planted support.
    pub support: Vec<u64>,
    /// Planted coefficient for each support entry.
    pub coefficients: Vec<f64>,
    pub responses: Vec<f64>,
}

impl SyntheticProblem {
    pub fn planted(&self) -> Vec<(u64, f64)> {
        self.support
            .iter()
            .copied()
            .zip(self.coefficients.iter().copied())
            .collect()
    }

    pub fn examples(&self) -> Result<Vec<SparseExample>> {
        self.design.to_examples(&self.responses)
    }
}

/// Draws a Gaussian design with a binary planted vector.
///
/// Sampling order is fixed (design, support, noise) so a design is a pure
/// function of its spec.
pub fn generate_design(spec: &SyntheticDesign) -> Result<SyntheticProblem> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let entry_scale = match spec.scale {
        DesignScale::Unit => 1.0,
        DesignScale::InverseN => 1.0 / (spec.n as f64).sqrt(),
    };
    let data: Vec<f64> = (0..spec.n * spec.p)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * entry_scale)
        .collect();
    let mut design = DenseMatrix::from_rows(spec.n, spec.p, data)?;

    let mut support: Vec<u64> = sample(&mut rng, spec.p, spec.k)
        .into_iter()
        .map(|j| j as u64)
        .collect();
    support.sort_unstable();
    if spec.attenuation != 1.0 {
        for i in 0..spec.n {
            let row = design.row_mut(i);
            for &j in &support {
                row[j as usize] /= spec.attenuation;
            }
        }
    }
    let coefficients = vec![1.0; spec.k];
    let planted: Vec<(u64, f64)> = support.iter().map(|&j| (j, 1.0)).collect();
    let mut responses = design.mul_sparse(&planted);
    if spec.noise_sd > 0.0 {
        for y in &mut responses {
            *y += spec.noise_sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(SyntheticProblem {
        design,
        support,
        coefficients,
        responses,
    })
}

/// Binary token stream with a small set of informative tokens.
///
/// Each line mixes `planted_per_example` informative tokens with
/// `noise_per_example` random tokens drawn from a large vocabulary. Labels
/// are drawn from a logistic model over the informative tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenStreamDesign {
    pub examples: usize,
    pub planted: usize,
    pub planted_per_example: usize,
    pub noise_per_example: usize,
    pub noise_vocabulary: u64,
    /// Informative weights are drawn uniformly with this magnitude range and
    /// a random sign.
    pub weight_range: (f64, f64),
    pub seed: u64,
}

impl Default for TokenStreamDesign {
    fn default() -> Self {
        TokenStreamDesign {
            examples: 50_000,
            planted: 100,
            planted_per_example: 5,
            noise_per_example: 20,
            noise_vocabulary: 1 << 30,
            weight_range: (1.5, 3.0),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TokenCorpus {
    /// `label<TAB>tokens` lines with labels in {-1, +1}.
    pub lines: Vec<String>,
    pub planted_tokens: Vec<String>,
    pub planted_weights: Vec<f64>,
}

pub fn planted_token(j: usize) -> String {
    format!("sig{j}")
}

pub fn generate_token_stream(spec: &TokenStreamDesign) -> Result<TokenCorpus> {
    if spec.planted == 0 || spec.planted_per_example > spec.planted {
        return Err(Error::InvalidSpec(format!(
            "{} informative tokens per line from a pool of {}",
            spec.planted_per_example, spec.planted
        )));
    }
    let (lo, hi) = spec.weight_range;
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
        return Err(Error::InvalidSpec(format!("bad weight range {lo}..{hi}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let planted_tokens: Vec<String> = (0..spec.planted).map(planted_token).collect();
    let planted_weights: Vec<f64> = (0..spec.planted)
        .map(|_| {
            let magnitude = if hi > lo { rng.random_range(lo..hi) } else { lo };
            if rng.random_bool(0.5) {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();

    let mut lines = Vec::with_capacity(spec.examples);
    for _ in 0..spec.examples {
        let chosen = sample(&mut rng, spec.planted, spec.planted_per_example);
        let score: f64 = chosen.iter().map(|j| planted_weights[j]).sum();
        let positive = rng.random_bool(1.0 / (1.0 + (-score).exp()));
        let mut line = String::from(if positive { "1\t" } else { "-1\t" });
        let mut first = true;
        let mut push = |line: &mut String, tok: &str| {
            if !first {
                line.push(' ');
            }
            first = false;
            line.push_str(tok);
        };
        for j in chosen.iter() {
            push(&mut line, &planted_tokens[j]);
        }
        for _ in 0..spec.noise_per_example {
            let t = rng.random_range(0..spec.noise_vocabulary.max(1));
            push(&mut line, &format!("w{t}"));
        }
        lines.push(line);
    }
    Ok(TokenCorpus {
        lines,
        planted_tokens,
        planted_weights,
    })
}

/// Multi-class sparse data: each class owns a block of signature features.
///
/// An example of class `c` draws `signature_per_example` features, each from
/// its own class block with probability `purity` and otherwise from a
/// uniformly chosen class block, plus `noise_per_example` background
/// features from the full id space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiClassDesign {
    pub classes: usize,
    pub examples: usize,
    pub dimension: u64,
    pub signature_size: usize,
    pub signature_per_example: usize,
    pub noise_per_example: usize,
    pub purity: f64,
    pub seed: u64,
}

impl Default for MultiClassDesign {
    fn default() -> Self {
        MultiClassDesign {
            classes: 5,
            examples: 2000,
            dimension: 4096,
            signature_size: 40,
            signature_per_example: 6,
            noise_per_example: 10,
            purity: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultiClassData {
    pub examples: Vec<SparseExample>,
    /// Signature feature ids per class.
    pub signatures: Vec<Vec<u64>>,
}

pub fn generate_multiclass(spec: &MultiClassDesign) -> Result<MultiClassData> {
    let pool = spec.classes as u64 * spec.signature_size as u64;
    if spec.classes < 2 || spec.signature_size == 0 || pool > spec.dimension {
        return Err(Error::InvalidSpec(format!(
            "{} classes x {} signature features in dimension {}",
            spec.classes, spec.signature_size, spec.dimension
        )));
    }
    if !(0.0..=1.0).contains(&spec.purity) {
        return Err(Error::InvalidSpec(format!("purity {}", spec.purity)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ids: Vec<u64> = sample(&mut rng, spec.dimension as usize, pool as usize)
        .into_iter()
        .map(|j| j as u64)
        .collect();
    let signatures: Vec<Vec<u64>> = ids
        .chunks(spec.signature_size)
        .map(|c| c.to_vec())
        .collect();
    let mut examples = Vec::with_capacity(spec.examples);
    for _ in 0..spec.examples {
        let class = rng.random_range(0..spec.classes);
        let mut pairs = Vec::with_capacity(spec.signature_per_example + spec.noise_per_example);
        for _ in 0..spec.signature_per_example {
            let source = if rng.random_bool(spec.purity) {
                class
            } else {
                rng.random_range(0..spec.classes)
            };
            let block = &signatures[source];
            pairs.push((block[rng.random_range(0..block.len())], 1.0));
        }
        for _ in 0..spec.noise_per_example {
            pairs.push((rng.random_range(0..spec.dimension), 1.0));
        }
        examples.push(SparseExample::from_pairs(pairs, class as f64)?);
    }
    Ok(MultiClassData {
        examples,
        signatures,
    })
}
