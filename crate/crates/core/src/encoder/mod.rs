//! The name encoder: a deterministic map from a name to a unit vector,
//! differentiable in its parameters.
//!
//! The reference encoder hashes character n-grams into a `V x d` table,
//! mean-pools the rows of a name's n-grams, multiplies by a `d x d`
//! projection and L2-normalizes:
//!
//! ```text
//! m = mean(table[id] for id in featurize(name))
//! h = m · P
//! u = h / |h|
//! ```
//!
//! Because outputs are unit vectors, cosine similarity is a dot product and
//! Euclidean distance is `sqrt(2 - 2 cos)`.

mod checkpoint;

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use crate::config::TrainConfig;
use crate::linalg::{dot, Matrix};
use crate::record::truncate_chars;
use crate::rng::seeded_rng;

const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Range of the uniform table initialization.
pub const INIT_SCALE: f64 = 0.05;

pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET_BASIS;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Character n-grams of the lowercased name wrapped in `^`/`$`, hashed into
/// `[0, vocab_size)`.
///
/// A wrapped name shorter than `n` yields a single gram (the whole wrapped
/// string), so every name has at least one feature.
pub fn featurize(name: &str, ngram_order: usize, vocab_size: usize) -> Vec<u32> {
    assert!(ngram_order >= 1 && vocab_size >= 1);
    let mut chars = Vec::with_capacity(name.len() + 2);
    chars.push('^');
    chars.extend(name.chars().flat_map(char::to_lowercase));
    chars.push('$');

    let modulus = vocab_size as u64;
    let hash = |gram: &[char]| {
        let s: String = gram.iter().collect();
        (fnv1a_64(s.as_bytes()) % modulus) as u32
    };
    if chars.len() <= ngram_order {
        return vec![hash(&chars)];
    }
    chars.windows(ngram_order).map(hash).collect()
}

/// A unit-norm encoder output.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Encoder weights plus the featurization settings they were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub vocab_size: usize,
    pub dim: usize,
    pub ngram_order: usize,
    pub max_name_chars: usize,
    /// `vocab_size x dim`, row-major.
    pub table: Vec<f64>,
    /// `dim x dim`, row-major; `h[j] = sum_k m[k] * projection[k][j]`.
    pub projection: Vec<f64>,
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub ids: Vec<u32>,
    pub mean: Vec<f64>,
    pub norm: f64,
    pub output: Vec<f64>,
}

/// Initializes the table uniformly in `[-0.05, 0.05]` and the projection to
/// the identity.
pub fn init_params(config: &TrainConfig, seed: u64) -> EncoderParams {
    let (v, d) = (config.vocab_size, config.embed_dim);
    let mut rng = seeded_rng(seed);
    let table = (0..v * d)
        .map(|_| rng.gen_range(-INIT_SCALE..=INIT_SCALE))
        .collect();
    let mut projection = vec![0.0; d * d];
    for k in 0..d {
        projection[k * d + k] = 1.0;
    }
    EncoderParams {
        vocab_size: v,
        dim: d,
        ngram_order: config.ngram_order,
        max_name_chars: config.max_name_chars,
        table,
        projection,
    }
}

impl EncoderParams {
    pub fn table_row(&self, id: u32) -> &[f64] {
        let start = id as usize * self.dim;
        &self.table[start..start + self.dim]
    }

    pub fn featurize(&self, name: &str) -> Vec<u32> {
        featurize(
            truncate_chars(name, self.max_name_chars),
            self.ngram_order,
            self.vocab_size,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.table.iter().chain(&self.projection).all(|x| x.is_finite())
    }

    pub fn forward(&self, name: &str) -> Forward {
        let d = self.dim;
        let ids = self.featurize(name);
        let mut mean = vec![0.0; d];
        for &id in &ids {
            for (m, t) in mean.iter_mut().zip(self.table_row(id)) {
                *m += t;
            }
        }
        let inv = 1.0 / ids.len() as f64;
        mean.iter_mut().for_each(|m| *m *= inv);

        let mut pre = vec![0.0; d];
        for (k, &mk) in mean.iter().enumerate() {
            if mk == 0.0 {
                continue;
            }
            let row = &self.projection[k * d..(k + 1) * d];
            for (h, p) in pre.iter_mut().zip(row) {
                *h += mk * p;
            }
        }
        let norm = dot(&pre, &pre).sqrt();
        let output = if norm > 0.0 {
            pre.iter().map(|h| h / norm).collect()
        } else {
            let mut e = vec![0.0; d];
            e[0] = 1.0;
            e
        };
        Forward {
            ids,
            mean,
            norm,
            output,
        }
    }

    pub fn encode(&self, name: &str) -> Embedding {
        Embedding(self.forward(name).output)
    }

    /// Row `i` is `encode(names[i])`.
    pub fn encode_batch<S: AsRef<str> + Sync>(&self, names: &[S]) -> Matrix {
        let rows: Vec<Vec<f64>> = names
            .par_iter()
            .map(|n| self.forward(n.as_ref()).output)
            .collect();
        Matrix::from_rows(self.dim, &rows)
    }

    /// Gradient of `<grad_output, encode(name)>` with respect to the
    /// parameters.
    pub fn encode_backward(&self, name: &str, grad_output: &[f64]) -> ParamGrad {
        let mut grad = ParamGrad::zeros(self.dim);
        self.accumulate_backward(&self.forward(name), grad_output, &mut grad);
        grad
    }

    /// Adds the parameter gradient of one forward pass into `grad`.
    pub fn accumulate_backward(&self, fwd: &Forward, grad_output: &[f64], grad: &mut ParamGrad) {
        let d = self.dim;
        if fwd.norm == 0.0 {
            // The fallback basis vector does not depend on the parameters.
            return;
        }
        // Through u = h / |h|: dh = (I - u u^T) g / |h|.
        let u = &fwd.output;
        let ug = dot(u, grad_output);
        let dh: Vec<f64> = grad_output
            .iter()
            .zip(u)
            .map(|(g, ui)| (g - ui * ug) / fwd.norm)
            .collect();

        // Through h = m · P.
        let mut dmean = vec![0.0; d];
        for k in 0..d {
            let row = &self.projection[k * d..(k + 1) * d];
            dmean[k] = dot(row, &dh);
            let mk = fwd.mean[k];
            if mk != 0.0 {
                let grow = &mut grad.projection[k * d..(k + 1) * d];
                for (g, h) in grow.iter_mut().zip(&dh) {
                    *g += mk * h;
                }
            }
        }

        // Through the mean over n-gram rows (a repeated id counts each time).
        let inv = 1.0 / fwd.ids.len() as f64;
        for &id in &fwd.ids {
            let row = grad.table.entry(id).or_insert_with(|| vec![0.0; d]);
            for (r, dm) in row.iter_mut().zip(&dmean) {
                *r += dm * inv;
            }
        }
    }

    /// Plain gradient-descent step.
    pub fn apply_sgd(&mut self, grad: &ParamGrad, learning_rate: f64) {
        let d = self.dim;
        for (&id, g) in &grad.table {
            let start = id as usize * d;
            for (t, gi) in self.table[start..start + d].iter_mut().zip(g) {
                *t -= learning_rate * gi;
            }
        }
        for (p, g) in self.projection.iter_mut().zip(&grad.projection) {
            *p -= learning_rate * g;
        }
    }
}

/// Parameter gradient; the table part is sparse over touched rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad {
    pub table: BTreeMap<u32, Vec<f64>>,
    pub projection: Vec<f64>,
}

impl ParamGrad {
    pub fn zeros(dim: usize) -> Self {
        ParamGrad {
            table: BTreeMap::new(),
            projection: vec![0.0; dim * dim],
        }
    }

    pub fn table_entry(&self, id: u32, col: usize) -> f64 {
        self.table.get(&id).map_or(0.0, |row| row[col])
    }

    pub fn is_zero(&self) -> bool {
        self.projection.iter().all(|&x| x == 0.0)
            && self.table.values().flatten().all(|&x| x == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.projection.iter().all(|x| x.is_finite())
            && self.table.values().flatten().all(|x| x.is_finite())
    }
}
