//! Multi-Similarity loss over mined pair sets.
//!
//! For a batch of `N` names with similarity matrix `S`,
//!
//! ```text
//! L = 1/N Σ_i [ 1/α · log(1 + Σ_{n ∈ N_i} exp( α (S_in - ε)))
//!             + 1/β · log(1 + Σ_{p ∈ P_i} exp(-β (S_ip - ε))) ]
//! ```
//!
//! Every anchor counts toward `N`, including anchors with no mined pairs
//! (their terms are `log 1 = 0`). Both log-sum-exp terms are evaluated with a
//! max shift, so `β = 50` never overflows.

use super::mining::{PairSets, SimilarityMatrix};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsParams {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl MsParams {
    pub fn from_config(c: &crate::config::TrainConfig) -> Self {
        MsParams {
            alpha: c.alpha,
            beta: c.beta,
            epsilon: c.epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("multi-similarity loss is not finite")]
pub struct NonFiniteLoss;

/// `log(1 + Σ exp(x_k))` and the softmax weights `exp(x_k) / (1 + Σ exp(x_j))`.
fn log1p_sum_exp(xs: &[f64], weights: &mut Vec<f64>) -> f64 {
    weights.clear();
    if xs.is_empty() {
        return 0.0;
    }
    let shift = xs.iter().copied().fold(0.0_f64, f64::max);
    let base = (-shift).exp();
    weights.extend(xs.iter().map(|x| (x - shift).exp()));
    let total = base + weights.iter().sum::<f64>();
    weights.iter_mut().for_each(|w| *w /= total);
    shift + total.ln()
}

/// Loss and `dL/dS` in one pass. The gradient is zero outside pair positions.
pub fn ms_loss_and_grad(
    sim: &SimilarityMatrix,
    pairs: &PairSets,
    params: &MsParams,
) -> Result<(f64, Matrix), NonFiniteLoss> {
    let n = sim.len();
    assert_eq!(pairs.len(), n, "pair sets and similarity matrix disagree");
    let MsParams {
        alpha,
        beta,
        epsilon,
    } = *params;
    let scale = 1.0 / n as f64;
    let mut grad = Matrix::zeros(n, n);
    let mut total = 0.0;
    let mut xs = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n {
        let negatives = &pairs.negatives[i];
        xs.clear();
        xs.extend(negatives.iter().map(|&j| alpha * (sim.get(i, j) - epsilon)));
        total += log1p_sum_exp(&xs, &mut weights) / alpha;
        for (&j, w) in negatives.iter().zip(&weights) {
            grad.set(i, j, grad.get(i, j) + scale * w);
        }

        let positives = &pairs.positives[i];
        xs.clear();
        xs.extend(positives.iter().map(|&j| -beta * (sim.get(i, j) - epsilon)));
        total += log1p_sum_exp(&xs, &mut weights) / beta;
        for (&j, w) in positives.iter().zip(&weights) {
            grad.set(i, j, grad.get(i, j) - scale * w);
        }
    }
    let loss = if n == 0 { 0.0 } else { total * scale };
    if !loss.is_finite() || !grad.as_slice().iter().all(|g| g.is_finite()) {
        return Err(NonFiniteLoss);
    }
    Ok((loss, grad))
}

pub fn ms_loss(sim: &SimilarityMatrix, pairs: &PairSets, params: &MsParams) -> Result<f64, NonFiniteLoss> {
    ms_loss_and_grad(sim, pairs, params).map(|(loss, _)| loss)
}

pub fn ms_loss_grad(
    sim: &SimilarityMatrix,
    pairs: &PairSets,
    params: &MsParams,
) -> Result<Matrix, NonFiniteLoss> {
    ms_loss_and_grad(sim, pairs, params).map(|(_, grad)| grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use proptest::prelude::*;
    use rand::Rng;

    const DEFAULTS: MsParams = MsParams {
        alpha: 2.0,
        beta: 50.0,
        epsilon: 1.0,
    };

    /// Direct transcription of the formula with no shifting or reuse.
    fn reference_loss(s: &SimilarityMatrix, pairs: &PairSets, p: &MsParams) -> f64 {
        let n = s.len() as f64;
        let mut sum = 0.0;
        for i in 0..s.len() {
            let neg: f64 = pairs.negatives[i]
                .iter()
                .map(|&j| (p.alpha * (s.get(i, j) - p.epsilon)).exp())
                .sum();
            let pos: f64 = pairs.positives[i]
                .iter()
                .map(|&j| (-p.beta * (s.get(i, j) - p.epsilon)).exp())
                .sum();
            sum += (1.0 + neg).ln() / p.alpha + (1.0 + pos).ln() / p.beta;
        }
        sum / n
    }

    fn random_fixture(seed: u64, n: usize) -> (SimilarityMatrix, PairSets) {
        let mut rng = seeded_rng(seed);
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, if i == j { 1.0 } else { rng.gen_range(-1.0..1.0) });
            }
        }
        // At most one positive per anchor, as in batches of two names per
        // class. Several positives put the β-term's third derivative out of
        // reach of a 1e-4 central difference at 1e-6 relative error.
        let mut pairs = PairSets::empty(n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                match rng.gen_range(0..3) {
                    0 if pairs.positives[i].is_empty() => pairs.positives[i].push(j),
                    1 => pairs.negatives[i].push(j),
                    _ => {}
                }
            }
        }
        (SimilarityMatrix::from_matrix(m), pairs)
    }

    #[test]
    fn empty_pairs_give_zero() {
        let (s, _) = random_fixture(1, 5);
        let pairs = PairSets::empty(5);
        assert_eq!(ms_loss(&s, &pairs, &DEFAULTS).unwrap(), 0.0);
        assert!(ms_loss_grad(&s, &pairs, &DEFAULTS)
            .unwrap()
            .as_slice()
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn single_positive_at_offset() {
        let s = SimilarityMatrix::from_matrix(Matrix::from_rows(2, &[vec![1.0, 1.0], vec![1.0, 1.0]]));
        let mut pairs = PairSets::empty(2);
        pairs.positives[0].push(1);
        let loss = ms_loss(&s, &pairs, &DEFAULTS).unwrap();
        let want = 0.5 * (1.0 / 50.0) * 2f64.ln();
        assert!((loss - want).abs() < 1e-12, "{loss} vs {want}");
        assert!((loss - 0.0069315).abs() < 1e-7);
    }

    #[test]
    fn matches_reference_on_random_fixture() {
        for seed in 0..10 {
            let (s, pairs) = random_fixture(seed, 8);
            let got = ms_loss(&s, &pairs, &DEFAULTS).unwrap();
            let want = reference_loss(&s, &pairs, &DEFAULTS);
            assert!((got - want).abs() < 1e-12, "seed {seed}: {got} vs {want}");
        }
    }

    #[test]
    fn gradient_is_zero_off_pairs() {
        let (s, pairs) = random_fixture(3, 8);
        let g = ms_loss_grad(&s, &pairs, &DEFAULTS).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let on = pairs.positives[i].contains(&j) || pairs.negatives[i].contains(&j);
                if !on {
                    assert_eq!(g.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let h = 1e-4;
        for seed in 0..5 {
            let (s, pairs) = random_fixture(100 + seed, 8);
            let g = ms_loss_grad(&s, &pairs, &DEFAULTS).unwrap();
            for i in 0..8 {
                for j in 0..8 {
                    let mut plus = s.clone();
                    plus.set(i, j, s.get(i, j) + h);
                    let mut minus = s.clone();
                    minus.set(i, j, s.get(i, j) - h);
                    let fd = (reference_loss(&plus, &pairs, &DEFAULTS)
                        - reference_loss(&minus, &pairs, &DEFAULTS))
                        / (2.0 * h);
                    let a = g.get(i, j);
                    let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-10);
                    assert!(rel < 1e-6, "({i},{j}): {a} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn extreme_similarities_stay_finite() {
        let s = SimilarityMatrix::from_matrix(Matrix::from_rows(2, &[vec![1.0, -1.0], vec![-1.0, 1.0]]));
        let mut pairs = PairSets::empty(2);
        pairs.positives[0].push(1);
        let p = MsParams {
            beta: 1000.0,
            ..DEFAULTS
        };
        let loss = ms_loss(&s, &pairs, &p).unwrap();
        assert!((loss - 0.5 * 2.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn permutation_invariant(seed in 0u64..1000, shift in 1usize..7) {
            let n = 7;
            let (s, pairs) = random_fixture(seed, n);
            let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
            let mut m = Matrix::zeros(n, n);
            let mut permuted = PairSets::empty(n);
            for i in 0..n {
                for j in 0..n {
                    m.set(perm[i], perm[j], s.get(i, j));
                }
                permuted.positives[perm[i]] = pairs.positives[i].iter().map(|&j| perm[j]).collect();
                permuted.negatives[perm[i]] = pairs.negatives[i].iter().map(|&j| perm[j]).collect();
            }
            let a = ms_loss(&s, &pairs, &DEFAULTS).unwrap();
            let b = ms_loss(&SimilarityMatrix::from_matrix(m), &permuted, &DEFAULTS).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn monotone_in_each_pair(seed in 0u64..1000, delta in 1e-3f64..0.5) {
            let (s, pairs) = random_fixture(seed, 6);
            let base = ms_loss(&s, &pairs, &DEFAULTS).unwrap();
            // The pair with the largest weight in its term, so the change is
            // not lost to rounding next to terms e^70 times larger.
            let sref = &s;
            let by_sim = |i: usize| move |a: &&usize, b: &&usize| sref.get(i, **a).total_cmp(&sref.get(i, **b));
            for i in 0..6 {
                if let Some(&j) = pairs.negatives[i].iter().max_by(by_sim(i)) {
                    let mut t = s.clone();
                    t.set(i, j, s.get(i, j) - delta);
                    prop_assert!(ms_loss(&t, &pairs, &DEFAULTS).unwrap() < base);
                }
                if let Some(&j) = pairs.positives[i].iter().min_by(by_sim(i)) {
                    let mut t = s.clone();
                    t.set(i, j, s.get(i, j) + delta);
                    prop_assert!(ms_loss(&t, &pairs, &DEFAULTS).unwrap() < base);
                }
            }
        }
    }
}
