//! Softmax weighting and exact integer apportionment.
//!
//! Every proportional strategy (REBASE, DORA, the replay diagnostics) funnels its
//! real-valued weights through [`apportion`], so budgets are always met exactly.

use std::cmp::Reverse;

use crate::error::{data, usage, Result};
use crate::types::AllocationVector;

/// Weights closer than this to an integer multiple are treated as exact, so that
/// last-bit noise from renormalization cannot change the integer part.
const SNAP_TOLERANCE: f64 = 1e-9;
/// Grid used to compare remainders and weights; values within one cell tie.
const REMAINDER_GRID: f64 = 1e9;
const WEIGHT_GRID: f64 = 1e12;

/// Temperature softmax `exp(s_i / T) / Σ exp(s_j / T)`, stabilized by subtracting the max.
pub fn softmax_weights(scores: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(usage("softmax over an empty score list"));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(usage(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(data(format!("non-finite score {bad}")));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores
        .iter()
        .map(|s| ((s - max) / temperature).exp())
        .collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Largest-remainder apportionment of `budget` according to `weights`.
///
/// Each entry first receives `floor(N · w_i)`; the remaining units go one each to
/// the largest fractional remainders, ties broken by larger weight, then lower index.
pub fn apportion(weights: &[f64], budget: usize) -> Result<AllocationVector> {
    if weights.is_empty() {
        if budget == 0 {
            return Ok(AllocationVector::zeros(0));
        }
        return Err(usage("cannot apportion a positive budget over no weights"));
    }
    if let Some(bad) = weights.iter().find(|w| !w.is_finite()) {
        return Err(data(format!("non-finite weight {bad}")));
    }
    if let Some(neg) = weights.iter().find(|&&w| w < 0.0) {
        return Err(usage(format!("negative weight {neg}")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(usage(format!("weights must sum to 1, got {sum}")));
    }

    let n = budget as f64;
    let mut counts = Vec::with_capacity(weights.len());
    let mut remainders = Vec::with_capacity(weights.len());
    for &w in weights {
        let quota = n * w;
        let nearest = quota.round();
        let (whole, rem) = if (quota - nearest).abs() <= SNAP_TOLERANCE {
            (nearest, 0.0)
        } else {
            let fl = quota.floor();
            (fl, quota - fl)
        };
        counts.push(whole as usize);
        remainders.push(rem);
    }

    let assigned: usize = counts.iter().sum();
    let mut leftover = budget.saturating_sub(assigned);
    if leftover > 0 {
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by_key(|&i| {
            (
                Reverse((remainders[i] * REMAINDER_GRID).round() as i64),
                Reverse((weights[i] * WEIGHT_GRID).round() as i64),
                i,
            )
        });
        // leftover < k except for weights summing a hair under one; cycling keeps the total exact.
        for &i in order.iter().cycle() {
            if leftover == 0 {
                break;
            }
            counts[i] += 1;
            leftover -= 1;
        }
    } else if assigned > budget {
        // Only reachable when the weights sum slightly above one and every quota snapped up.
        let mut excess = assigned - budget;
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by_key(|&i| (Reverse((weights[i] * WEIGHT_GRID).round() as i64), i));
        for &i in order.iter().rev().cycle() {
            if excess == 0 {
                break;
            }
            if counts[i] > 0 {
                counts[i] -= 1;
                excess -= 1;
            }
        }
    }
    Ok(AllocationVector::new(counts))
}
