//! Direction-oriented allocation.
//!
//! Candidates are softly clustered by the cosine similarity of their embeddings. The
//! diagonal of the row-softmaxed similarity matrix, `γ_i`, approximates the inverse size
//! of candidate `i`'s reasoning direction; multiplying the REBASE weights by `γ` and
//! renormalizing spreads the budget across directions instead of across duplicates.
//!
//! The direction-level formulas at the bottom describe the idealized setting where
//! directions are known exactly: the allocation REBASE induces on directions, the
//! direction-level optimum, and the KL divergence between the two.

use serde::{Deserialize, Serialize};

use crate::error::{data, usage, Result};
use crate::types::{AllocationVector, CandidateSet, DirectionGrouping};
use crate::weights::{apportion, softmax_weights};

/// Row-softmaxed similarity matrix together with its diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityMatrix {
    pub entries: Vec<Vec<f64>>,
    pub uniqueness: Vec<f64>,
}

/// Pairwise cosine similarities. Inputs need not be normalized.
pub fn similarity_matrix(embeddings: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let k = embeddings.len();
    let Some(first) = embeddings.first() else {
        return Ok(Vec::new());
    };
    let dim = first.len();
    let mut norms = Vec::with_capacity(k);
    for (i, e) in embeddings.iter().enumerate() {
        if e.len() != dim {
            return Err(usage(format!(
                "embedding {i} has dimension {}, expected {dim}",
                e.len()
            )));
        }
        if e.iter().any(|x| !x.is_finite()) {
            return Err(data(format!("embedding {i} has non-finite entries")));
        }
        let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(data(format!("embedding {i} has zero norm")));
        }
        norms.push(norm);
    }
    let mut s = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let dot: f64 = embeddings[i]
                .iter()
                .zip(&embeddings[j])
                .map(|(a, b)| a * b)
                .sum();
            let cos = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            s[i][j] = cos;
            s[j][i] = cos;
        }
    }
    Ok(s)
}

/// Row-wise softmax of `similarity` at temperature `similarity_temperature`.
pub fn soft_assignment(
    similarity: &[Vec<f64>],
    similarity_temperature: f64,
) -> Result<AffinityMatrix> {
    let entries = similarity
        .iter()
        .map(|row| softmax_weights(row, similarity_temperature))
        .collect::<Result<Vec<_>>>()?;
    let uniqueness = entries.iter().enumerate().map(|(i, row)| row[i]).collect();
    Ok(AffinityMatrix {
        entries,
        uniqueness,
    })
}

/// Semantic uniqueness `γ_i` of every candidate in the set.
pub fn uniqueness(set: &CandidateSet, similarity_temperature: f64) -> Result<Vec<f64>> {
    let embeddings = set
        .candidates
        .iter()
        .map(|c| {
            c.embedding
                .clone()
                .ok_or_else(|| usage(format!("candidate {} has no embedding", c.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let s = similarity_matrix(&embeddings)?;
    Ok(soft_assignment(&s, similarity_temperature)?.uniqueness)
}

/// Real-valued DORA weights `w'_i = w_i γ_i / Σ_j w_j γ_j`.
pub fn dora_weights(
    set: &CandidateSet,
    reward_temperature: f64,
    similarity_temperature: f64,
) -> Result<Vec<f64>> {
    set.ensure_allocatable()?;
    let gamma = uniqueness(set, similarity_temperature)?;
    let w = softmax_weights(&set.scores(), reward_temperature)?;
    let raw: Vec<f64> = w.iter().zip(&gamma).map(|(w, g)| w * g).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|x| x / total).collect())
}

pub fn allocate_dora(
    set: &CandidateSet,
    reward_temperature: f64,
    similarity_temperature: f64,
) -> Result<AllocationVector> {
    let weights = dora_weights(set, reward_temperature, similarity_temperature)?;
    apportion(&weights, set.budget)
}

fn shifted_exps(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().map(|r| (r - max).exp()).collect()
}

/// `Q̂_j ∝ k_j e^{R_j}`: the direction distribution solution-level softmax induces.
pub fn induced_direction_distribution(grouping: &DirectionGrouping) -> Result<Vec<f64>> {
    grouping.validate()?;
    let mass: Vec<f64> = shifted_exps(&grouping.direction_scores)
        .into_iter()
        .zip(&grouping.counts)
        .map(|(e, &k)| e * k as f64)
        .collect();
    let total: f64 = mass.iter().sum();
    Ok(mass.into_iter().map(|m| m / total).collect())
}

/// `Q_j ∝ e^{R_j}`: the direction-level optimum, treating each direction as one unit.
pub fn optimal_direction_distribution(grouping: &DirectionGrouping) -> Result<Vec<f64>> {
    grouping.validate()?;
    softmax_weights(&grouping.direction_scores, 1.0)
}

pub fn induced_direction_allocation(
    grouping: &DirectionGrouping,
    budget: usize,
) -> Result<Vec<f64>> {
    let n = budget as f64;
    Ok(induced_direction_distribution(grouping)?
        .into_iter()
        .map(|q| n * q)
        .collect())
}

pub fn optimal_direction_allocation(
    grouping: &DirectionGrouping,
    budget: usize,
) -> Result<Vec<f64>> {
    let n = budget as f64;
    Ok(optimal_direction_distribution(grouping)?
        .into_iter()
        .map(|q| n * q)
        .collect())
}

/// `KL(Q ‖ Q̂)`, the log-utility lost by allocating per solution instead of per direction.
pub fn kl_gap(grouping: &DirectionGrouping) -> Result<f64> {
    let q = optimal_direction_distribution(grouping)?;
    let q_hat = induced_direction_distribution(grouping)?;
    let kl: f64 = q
        .iter()
        .zip(&q_hat)
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, &r)| p * (p / r).ln())
        .sum();
    // Rounding can leave a negative residue of a few ulps when Q = Q̂.
    Ok(kl.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocators::allocate_rebase;
    use crate::types::Trajectory;
    use proptest::prelude::*;

    fn set_with(scores: &[f64], embeddings: &[Vec<f64>], budget: usize) -> CandidateSet {
        CandidateSet::new(
            scores
                .iter()
                .zip(embeddings)
                .enumerate()
                .map(|(i, (&s, e))| Trajectory::scored(i as u64, s).with_embedding(e.clone()))
                .collect(),
            budget,
        )
    }

    fn basis(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn similarity_examples() {
        let s = similarity_matrix(&[vec![0.6, 0.8], vec![0.6, 0.8]]).unwrap();
        for row in &s {
            for &x in row {
                assert!((x - 1.0).abs() < 1e-12);
            }
        }
        let s = similarity_matrix(&[basis(2, 0), basis(2, 1)]).unwrap();
        assert_eq!(s, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let r = 0.5f64.sqrt();
        let s = similarity_matrix(&[basis(2, 0), vec![r, r]]).unwrap();
        assert!((s[0][1] - r).abs() < 1e-15);
        assert_eq!(s[0][1], s[1][0]);
    }

    #[test]
    fn similarity_normalizes_raw_vectors() {
        let s = similarity_matrix(&[vec![3.0, 0.0], vec![2.0, 2.0]]).unwrap();
        assert!((s[0][1] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((s[1][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn similarity_errors() {
        assert!(matches!(
            similarity_matrix(&[vec![0.0, 0.0]]),
            Err(crate::Error::Data(_))
        ));
        assert!(matches!(
            similarity_matrix(&[vec![1.0, 0.0], vec![1.0]]),
            Err(crate::Error::Usage(_))
        ));
    }

    #[test]
    fn soft_assignment_examples() {
        let same = vec![vec![1.0, 0.0]; 3];
        let p = soft_assignment(&similarity_matrix(&same).unwrap(), 0.01).unwrap();
        for g in &p.uniqueness {
            assert!((g - 1.0 / 3.0).abs() < 1e-12);
        }
        let orth: Vec<Vec<f64>> = (0..3).map(|i| basis(3, i)).collect();
        let p = soft_assignment(&similarity_matrix(&orth).unwrap(), 0.01).unwrap();
        for g in &p.uniqueness {
            assert!(*g >= 1.0 - 1e-40);
        }
        let p = soft_assignment(&[vec![1.0]], 0.01).unwrap();
        assert_eq!(p.uniqueness, vec![1.0]);
        for row in &p.entries {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dora_rebalances_an_overrepresented_direction() {
        let e = vec![basis(2, 0), basis(2, 0), basis(2, 0), basis(2, 1)];
        let set = set_with(&[0.5; 4], &e, 8);
        assert_eq!(
            allocate_dora(&set, 1.0, 0.01).unwrap().counts,
            vec![2, 1, 1, 4]
        );
        assert_eq!(allocate_rebase(&set, 1.0).unwrap().counts, vec![2, 2, 2, 2]);
    }

    #[test]
    fn dora_reduces_to_rebase_for_orthogonal_embeddings() {
        let e: Vec<Vec<f64>> = (0..4).map(|i| basis(4, i)).collect();
        let set = set_with(&[0.9, 0.2, 0.5, 0.7], &e, 13);
        assert_eq!(
            allocate_dora(&set, 0.1, 0.01).unwrap(),
            allocate_rebase(&set, 0.1).unwrap()
        );
        let set = set_with(&[0.4], &[basis(2, 1)], 7);
        assert_eq!(allocate_dora(&set, 0.1, 0.01).unwrap().counts, vec![7]);
    }

    #[test]
    fn dora_requires_embeddings() {
        let set = CandidateSet::from_scores(&[0.1, 0.2], 3);
        assert!(matches!(
            allocate_dora(&set, 0.1, 0.01),
            Err(crate::Error::Usage(_))
        ));
    }

    #[test]
    fn direction_allocation_examples() {
        let g = DirectionGrouping::from_counts(vec![3, 1], vec![1.0, 1.0]).unwrap();
        let b = induced_direction_allocation(&g, 8).unwrap();
        assert!((b[0] - 6.0).abs() < 1e-12 && (b[1] - 2.0).abs() < 1e-12);
        let b = optimal_direction_allocation(&g, 8).unwrap();
        assert!((b[0] - 4.0).abs() < 1e-12 && (b[1] - 4.0).abs() < 1e-12);

        let g = DirectionGrouping::from_counts(vec![1, 1], vec![0.3, 0.3]).unwrap();
        assert_eq!(
            induced_direction_allocation(&g, 10).unwrap(),
            vec![5.0, 5.0]
        );

        let g = DirectionGrouping::from_counts(vec![2, 5], vec![0.0, 3f64.ln()]).unwrap();
        let b = optimal_direction_allocation(&g, 4).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 3.0).abs() < 1e-12);

        let g = DirectionGrouping::from_counts(vec![4], vec![0.2]).unwrap();
        assert_eq!(induced_direction_allocation(&g, 9).unwrap(), vec![9.0]);
        assert_eq!(optimal_direction_allocation(&g, 9).unwrap(), vec![9.0]);
    }

    #[test]
    fn kl_gap_examples() {
        let g = DirectionGrouping::from_counts(vec![3, 1], vec![1.0, 1.0]).unwrap();
        // Q = (1/2, 1/2), Q̂ = (3/4, 1/4): KL = ½ln(2/3) + ½ln 2 = ½ln(4/3).
        assert!((kl_gap(&g).unwrap() - 0.5 * (4.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((kl_gap(&g).unwrap() - 0.143_84).abs() < 1e-5);
        let g = DirectionGrouping::from_counts(vec![2, 2, 2], vec![0.1, 0.7, 0.3]).unwrap();
        assert!(kl_gap(&g).unwrap() < 1e-12);
        let g = DirectionGrouping::from_counts(vec![5], vec![0.4]).unwrap();
        assert_eq!(kl_gap(&g).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn uniqueness_bounds(raw in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..12),
                             t in 0.001f64..1.0) {
            prop_assume!(raw.iter().all(|v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6));
            let s = similarity_matrix(&raw).unwrap();
            let p = soft_assignment(&s, t).unwrap();
            let k = raw.len() as f64;
            for g in &p.uniqueness {
                prop_assert!(*g >= 1.0 / k - 1e-12 && *g <= 1.0 + 1e-12);
            }
            for (i, row) in s.iter().enumerate() {
                prop_assert!((row[i] - 1.0).abs() < 1e-9);
                for (j, &x) in row.iter().enumerate() {
                    prop_assert_eq!(x, s[j][i]);
                }
            }
        }

        #[test]
        fn dora_shift_invariance(scores in prop::collection::vec(0.0f64..1.0, 1..10),
                                 shift in -2.0f64..2.0, n in 0usize..100, seed in 0u64..1000) {
            let e: Vec<Vec<f64>> = (0..scores.len())
                .map(|i| { let a = (seed as f64 + i as f64 * 1.7).sin(); vec![a, (1.0 - a * a).sqrt() + 0.1] })
                .collect();
            let a = allocate_dora(&set_with(&scores, &e, n), 0.1, 0.01).unwrap();
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            let b = allocate_dora(&set_with(&shifted, &e, n), 0.1, 0.01).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
