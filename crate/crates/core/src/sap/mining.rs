//! Pairwise similarities and online hard-triplet mining.
//!
//! A triplet `(a, p, n)` has `labels[a] == labels[p]`, `a != p` and
//! `labels[a] != labels[n]`. It is kept when the positive is not closer than
//! the negative by more than the margin:
//!
//! ```text
//! d(a, p) + λ >= d(a, n)
//! ```
//!
//! Distances come from cosine similarities of unit vectors,
//! `d = sqrt(max(0, 2 - 2 s))`, so mining and the loss read the same matrix.

use crate::linalg::{dot, Matrix};

/// `s[i][j]` is the cosine similarity of batch rows `i` and `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix(Matrix);

impl SimilarityMatrix {
    /// Wraps an arbitrary square matrix, e.g. a hand-built fixture.
    pub fn from_matrix(m: Matrix) -> Self {
        assert_eq!(m.rows(), m.cols(), "similarity matrix must be square");
        SimilarityMatrix(m)
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.rows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.0.set(i, j, value);
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    /// Euclidean distance between the unit vectors behind `s[i][j]`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (2.0 - 2.0 * self.get(i, j)).max(0.0).sqrt()
    }
}

/// `E · Eᵀ` for unit-norm rows, filled symmetrically.
pub fn similarity_matrix(embeddings: &Matrix) -> SimilarityMatrix {
    let n = embeddings.rows();
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = dot(embeddings.row(i), embeddings.row(j));
            s.set(i, j, v);
            s.set(j, i, v);
        }
    }
    SimilarityMatrix(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// All triplets satisfying the margin inequality, in lexicographic
/// `(anchor, positive, negative)` order.
pub fn mine_triplets<L: PartialEq>(
    sim: &SimilarityMatrix,
    labels: &[L],
    margin: f64,
) -> Vec<Triplet> {
    let n = labels.len();
    assert_eq!(sim.len(), n, "similarity matrix and labels disagree");
    let mut out = Vec::new();
    let mut negatives: Vec<(usize, f64)> = Vec::with_capacity(n);
    for a in 0..n {
        negatives.clear();
        negatives.extend(
            (0..n)
                .filter(|&j| labels[j] != labels[a])
                .map(|j| (j, sim.distance(a, j))),
        );
        if negatives.is_empty() {
            continue;
        }
        for p in (0..n).filter(|&p| p != a && labels[p] == labels[a]) {
            let reach = sim.distance(a, p) + margin;
            out.extend(
                negatives
                    .iter()
                    .filter(|&&(_, d_an)| reach >= d_an)
                    .map(|&(negative, _)| Triplet {
                        anchor: a,
                        positive: p,
                        negative,
                    }),
            );
        }
    }
    out
}

/// Per-anchor positive and negative index sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairSets {
    pub positives: Vec<Vec<usize>>,
    pub negatives: Vec<Vec<usize>>,
}

impl PairSets {
    pub fn empty(batch_size: usize) -> Self {
        PairSets {
            positives: vec![Vec::new(); batch_size],
            negatives: vec![Vec::new(); batch_size],
        }
    }

    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }

    pub fn is_all_empty(&self) -> bool {
        self.positives.iter().chain(&self.negatives).all(Vec::is_empty)
    }
}

/// Every triplet contributes `(a, p)` to the positives and `(a, n)` to the
/// negatives of anchor `a`; repeats collapse.
pub fn collect_pairs(triplets: &[Triplet], batch_size: usize) -> PairSets {
    let mut sets = PairSets::empty(batch_size);
    for t in triplets {
        sets.positives[t.anchor].push(t.positive);
        sets.negatives[t.anchor].push(t.negative);
    }
    for v in sets.positives.iter_mut().chain(sets.negatives.iter_mut()) {
        v.sort_unstable();
        v.dedup();
    }
    sets
}
