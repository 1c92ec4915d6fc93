//! Beta-prior correctness model and the exact optimal integer allocator.
//!
//! Each candidate's per-rollout success probability is `p ~ Beta(κw, κ(1−w))`. The
//! expected failure of `B` independent rollouts has the closed form
//! `E[(1−p)^B] = Π_{r<B} (κ(1−w)+r)/(κ+r)`, so the negative log joint failure is a
//! separable sum of per-rollout increments `−ln(1 − κw/(κ+r))` that shrink with `r`.
//! Greedy assignment of rollouts by largest increment is therefore exactly optimal.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::types::AllocationVector;

/// Largest instance [`brute_force_allocate`] will enumerate.
pub const BRUTE_FORCE_MAX_CANDIDATES: usize = 6;
pub const BRUTE_FORCE_MAX_BUDGET: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    mean_weight: f64,
    concentration: f64,
}

impl BetaPrior {
    pub fn new(mean_weight: f64, concentration: f64) -> Result<Self> {
        if !(mean_weight > 0.0 && mean_weight < 1.0) {
            return Err(usage(format!(
                "prior mean must lie in (0, 1), got {mean_weight}"
            )));
        }
        if !(concentration > 0.0 && concentration.is_finite()) {
            return Err(usage(format!(
                "concentration must be positive and finite, got {concentration}"
            )));
        }
        Ok(Self {
            mean_weight,
            concentration,
        })
    }

    pub fn mean_weight(&self) -> f64 {
        self.mean_weight
    }

    pub fn concentration(&self) -> f64 {
        self.concentration
    }

    /// Shape parameters `(α, β) = (κw, κ(1−w))`.
    pub fn shape(&self) -> (f64, f64) {
        (
            self.concentration * self.mean_weight,
            self.concentration * (1.0 - self.mean_weight),
        )
    }
}

/// Builds one prior per weight with a shared concentration.
pub fn priors_from_weights(weights: &[f64], concentration: f64) -> Result<Vec<BetaPrior>> {
    weights
        .iter()
        .map(|&w| BetaPrior::new(w, concentration))
        .collect()
}

/// `−ln(1 − κw/(κ+B))`: the drop in `−ln` joint failure from the `(B+1)`-th rollout.
pub fn marginal_log_gain(prior: &BetaPrior, current_rollouts: usize) -> f64 {
    let kappa = prior.concentration;
    let x = kappa * prior.mean_weight / (kappa + current_rollouts as f64);
    -(-x).ln_1p()
}

/// `ln E[(1−p)^B]`, accumulated in log space.
pub fn log_failure_expectation(prior: &BetaPrior, rollouts: usize) -> f64 {
    -(0..rollouts)
        .map(|r| marginal_log_gain(prior, r))
        .sum::<f64>()
}

/// `E[(1−p)^B]` for `p` drawn from the prior.
pub fn failure_expectation(prior: &BetaPrior, rollouts: usize) -> f64 {
    log_failure_expectation(prior, rollouts).exp()
}

/// Expected probability that every rollout of every candidate fails.
pub fn joint_failure(priors: &[BetaPrior], allocation: &AllocationVector) -> Result<f64> {
    Ok(log_joint_failure(priors, allocation)?.exp())
}

pub fn log_joint_failure(priors: &[BetaPrior], allocation: &AllocationVector) -> Result<f64> {
    if priors.len() != allocation.len() {
        return Err(usage(format!(
            "{} priors but {} allocation entries",
            priors.len(),
            allocation.len()
        )));
    }
    Ok(priors
        .iter()
        .zip(&allocation.counts)
        .map(|(p, &b)| log_failure_expectation(p, b))
        .sum())
}

#[derive(PartialEq)]
struct Gain(f64);

impl Eq for Gain {}

impl PartialOrd for Gain {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Gain {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Exact minimizer of [`joint_failure`] over allocations summing to `budget`.
///
/// Runs in `O(N log k)`: a max-heap keyed by each candidate's next marginal gain,
/// ties going to the lower index.
pub fn optimal_allocate(priors: &[BetaPrior], budget: usize) -> Result<AllocationVector> {
    if priors.is_empty() {
        return Err(usage("optimal allocation needs at least one candidate"));
    }
    let mut counts = vec![0usize; priors.len()];
    let mut heap: BinaryHeap<(Gain, Reverse<usize>)> = priors
        .iter()
        .enumerate()
        .map(|(i, p)| (Gain(marginal_log_gain(p, 0)), Reverse(i)))
        .collect();
    for _ in 0..budget {
        let (_, Reverse(i)) = heap.pop().expect("heap holds one entry per candidate");
        counts[i] += 1;
        heap.push((Gain(marginal_log_gain(&priors[i], counts[i])), Reverse(i)));
    }
    Ok(AllocationVector::new(counts))
}

/// Exhaustive search over all compositions of `budget` into `k` parts.
///
/// Among equal minima the lexicographically smallest allocation wins, which is the
/// first one met in the enumeration order below.
pub fn brute_force_allocate(priors: &[BetaPrior], budget: usize) -> Result<AllocationVector> {
    let k = priors.len();
    if k == 0 {
        return Err(usage("brute force needs at least one candidate"));
    }
    if k > BRUTE_FORCE_MAX_CANDIDATES || budget > BRUTE_FORCE_MAX_BUDGET {
        return Err(usage(format!(
            "brute force limited to k <= {BRUTE_FORCE_MAX_CANDIDATES}, N <= {BRUTE_FORCE_MAX_BUDGET}"
        )));
    }
    // Per-candidate log failure for every possible count, reused across compositions.
    let table: Vec<Vec<f64>> = priors
        .iter()
        .map(|p| {
            (0..=budget)
                .map(|b| log_failure_expectation(p, b))
                .collect()
        })
        .collect();

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut current = vec![0usize; k];
    enumerate(&table, 0, budget, &mut current, &mut best);
    let (_, counts) = best.expect("at least one composition exists");
    Ok(AllocationVector::new(counts))
}

fn enumerate(
    table: &[Vec<f64>],
    index: usize,
    remaining: usize,
    current: &mut Vec<usize>,
    best: &mut Option<(f64, Vec<usize>)>,
) {
    let k = table.len();
    if index == k - 1 {
        current[index] = remaining;
        let value: f64 = current.iter().zip(table).map(|(&b, t)| t[b]).sum();
        if best.as_ref().is_none_or(|(v, _)| value < *v) {
            *best = Some((value, current.clone()));
        }
        return;
    }
    for b in 0..=remaining {
        current[index] = b;
        enumerate(table, index + 1, remaining - b, current, best);
    }
}

/// The real-valued approximation `(N + kκ)·w_i − κ`, unclamped.
pub fn shifted_linear_allocation(weights: &[f64], concentration: f64, budget: usize) -> Vec<f64> {
    let k = weights.len() as f64;
    let scale = budget as f64 + k * concentration;
    weights.iter().map(|w| scale * w - concentration).collect()
}
