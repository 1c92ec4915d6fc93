//! Per-round trace records and offline replay of allocation strategies over them.
//!
//! A trace holds one record per candidate per round: the completed solutions a round
//! produced and the scored survivors the allocator saw. Replaying a trace recomputes
//! every requested strategy's allocation round by round and, when direction labels
//! are present, compares the direction-level allocation REBASE induces with the
//! direction-level optimum.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::allocators::{allocate, allocate_temperature, StrategyKind, StrategySpec};
use crate::dora;
use crate::engine::BudgetMode;
use crate::error::{data, usage, Result};
use crate::stats;
use crate::types::{Answer, CandidateSet, DirectionGrouping, SearchResult, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub round: u32,
    pub candidate_id: u64,
    pub prm_score: f64,
    #[serde(default)]
    pub embedding: Option<Vec<f64>>,
    #[serde(default)]
    pub direction_id: Option<usize>,
    #[serde(default)]
    pub answer: Option<Answer>,
    pub complete: bool,
}

impl TraceRecord {
    fn from_trajectory(round: u32, t: &Trajectory) -> Self {
        Self {
            round,
            candidate_id: t.id,
            prm_score: t.score,
            embedding: t.embedding.clone(),
            direction_id: t.direction_id,
            answer: t.answer,
            complete: t.complete,
        }
    }

    fn to_trajectory(&self) -> Trajectory {
        Trajectory {
            id: self.candidate_id,
            parent_id: None,
            step_count: 0,
            direction_id: self.direction_id,
            group_id: None,
            score: self.prm_score,
            embedding: self.embedding.clone(),
            complete: self.complete,
            answer: self.answer,
        }
    }
}

/// Flattens a search into trace records: each round's completions, then its survivors.
pub fn records_from_result(result: &SearchResult) -> Vec<TraceRecord> {
    result
        .rounds
        .iter()
        .flat_map(|r| {
            r.completed
                .iter()
                .chain(&r.active)
                .map(move |t| TraceRecord::from_trajectory(r.round, t))
        })
        .collect()
}

/// Checks the whole trace: non-empty, scores in range, one embedding dimension.
pub fn validate_records(records: &[TraceRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(usage("trace is empty"));
    }
    let mut dim: Option<usize> = None;
    for r in records {
        if !(0.0..=1.0).contains(&r.prm_score) {
            return Err(data(format!(
                "candidate {} in round {} has score {} outside [0, 1]",
                r.candidate_id, r.round, r.prm_score
            )));
        }
        if r.complete != r.answer.is_some() {
            return Err(data(format!(
                "candidate {} in round {} must carry an answer iff complete",
                r.candidate_id, r.round
            )));
        }
        if let Some(e) = &r.embedding {
            match dim {
                None => dim = Some(e.len()),
                Some(d) if d != e.len() => {
                    return Err(data(format!(
                        "candidate {} in round {} has embedding dimension {}, expected {d}",
                        r.candidate_id,
                        r.round,
                        e.len()
                    )))
                }
                Some(_) => {}
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyAllocation {
    pub strategy: StrategyKind,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionDiagnostics {
    pub direction_ids: Vec<usize>,
    pub counts: Vec<usize>,
    /// Mean score of each direction's candidates.
    pub direction_scores: Vec<f64>,
    /// Budget per direction induced by solution-level softmax.
    pub induced: Vec<f64>,
    /// Budget per direction under direction-level softmax.
    pub optimal: Vec<f64>,
    pub kl_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub round: u32,
    pub budget: usize,
    pub candidate_ids: Vec<u64>,
    pub allocations: Vec<StrategyAllocation>,
    pub directions: Option<DirectionDiagnostics>,
}

fn diagnostics(active: &[Trajectory], budget: usize) -> Result<Option<DirectionDiagnostics>> {
    if active.iter().any(|t| t.direction_id.is_none()) {
        return Ok(None);
    }
    let ids: Vec<usize> = active
        .iter()
        .filter_map(|t| t.direction_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let dense: BTreeMap<usize, usize> = ids.iter().enumerate().map(|(j, &d)| (d, j)).collect();
    let membership: Vec<usize> = active
        .iter()
        .map(|t| dense[&t.direction_id.expect("checked above")])
        .collect();
    let scores: Vec<f64> = (0..ids.len())
        .map(|j| {
            let member_scores: Vec<f64> = active
                .iter()
                .zip(&membership)
                .filter(|(_, &m)| m == j)
                .map(|(t, _)| t.score)
                .collect();
            stats::mean(&member_scores)
        })
        .collect();
    let grouping = DirectionGrouping::from_membership(membership, scores)?;
    Ok(Some(DirectionDiagnostics {
        direction_ids: ids,
        counts: grouping.counts.clone(),
        direction_scores: grouping.direction_scores.clone(),
        induced: dora::induced_direction_allocation(&grouping, budget)?,
        optimal: dora::optimal_direction_allocation(&grouping, budget)?,
        kl_gap: dora::kl_gap(&grouping)?,
    }))
}

/// Recomputes each strategy's allocation for every round of a trace.
///
/// The round budget follows `mode`: with [`BudgetMode::Remaining`] it is `budget`
/// minus the completions recorded up to and including that round, as in the engine.
pub fn replay(
    records: &[TraceRecord],
    strategies: &[StrategySpec],
    budget: usize,
    mode: BudgetMode,
) -> Result<Vec<ReplayRecord>> {
    validate_records(records)?;
    for spec in strategies {
        spec.validate()?;
        if spec.kind == StrategyKind::Dvts {
            return Err(usage(
                "dvts cannot be replayed: traces carry no subtree groups",
            ));
        }
        if spec.kind.needs_embeddings()
            && records.iter().any(|r| !r.complete && r.embedding.is_none())
        {
            return Err(usage(format!(
                "{} needs embeddings on every candidate",
                spec.kind
            )));
        }
    }

    let mut rounds: BTreeMap<u32, Vec<&TraceRecord>> = BTreeMap::new();
    for r in records {
        rounds.entry(r.round).or_default().push(r);
    }

    let mut pooled = 0usize;
    let mut out = Vec::with_capacity(rounds.len());
    for (round, recs) in rounds {
        pooled += recs.iter().filter(|r| r.complete).count();
        let active: Vec<Trajectory> = recs
            .iter()
            .filter(|r| !r.complete)
            .map(|r| r.to_trajectory())
            .collect();
        let round_budget = mode.round_budget(budget, pooled);
        let candidate_ids = active.iter().map(|t| t.id).collect();
        let mut allocations = Vec::new();
        if !active.is_empty() && round_budget > 0 {
            let set = CandidateSet::new(active.clone(), round_budget);
            for spec in strategies {
                let alloc = if spec.kind == StrategyKind::Temperature {
                    allocate_temperature(&set)?
                } else {
                    allocate(&set, spec)?
                };
                allocations.push(StrategyAllocation {
                    strategy: spec.kind,
                    counts: alloc.counts,
                });
            }
        }
        out.push(ReplayRecord {
            round,
            budget: round_budget,
            candidate_ids,
            allocations,
            directions: if active.is_empty() {
                None
            } else {
                diagnostics(&active, round_budget)?
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(round: u32, id: u64, score: f64, dir: Option<usize>) -> TraceRecord {
        TraceRecord {
            round,
            candidate_id: id,
            prm_score: score,
            embedding: None,
            direction_id: dir,
            answer: None,
            complete: false,
        }
    }

    #[test]
    fn kl_gap_reported_for_imbalanced_round() {
        let recs: Vec<TraceRecord> = [0, 0, 0, 1]
            .iter()
            .enumerate()
            .map(|(i, &d)| record(0, i as u64, 0.5, Some(d)))
            .collect();
        let out = replay(
            &recs,
            &[StrategySpec::new(StrategyKind::Rebase)],
            8,
            BudgetMode::Remaining,
        )
        .unwrap();
        let diag = out[0].directions.as_ref().unwrap();
        assert_eq!(diag.counts, vec![3, 1]);
        assert!((diag.kl_gap - 0.143_84).abs() < 1e-5);
        assert!((diag.induced[0] - 6.0).abs() < 1e-12);
        assert!((diag.optimal[0] - 4.0).abs() < 1e-12);
        assert_eq!(out[0].allocations[0].counts, vec![2, 2, 2, 2]);
    }

    #[test]
    fn no_embeddings_is_fine_without_dora() {
        let recs = vec![record(0, 0, 0.9, None), record(0, 1, 0.1, None)];
        let specs = [
            StrategySpec::new(StrategyKind::Rebase),
            StrategySpec::new(StrategyKind::Beam),
        ];
        let out = replay(&recs, &specs, 4, BudgetMode::Remaining).unwrap();
        assert_eq!(out[0].allocations.len(), 2);
        assert!(out[0].directions.is_none());
        let dora = [StrategySpec::new(StrategyKind::Dora)];
        assert!(matches!(
            replay(&recs, &dora, 4, BudgetMode::Remaining),
            Err(crate::Error::Usage(_))
        ));
    }

    #[test]
    fn remaining_budget_subtracts_completions() {
        let mut done = record(0, 5, 0.4, None);
        done.complete = true;
        done.answer = Some(Answer(1));
        let recs = vec![done, record(0, 6, 0.3, None), record(0, 7, 0.6, None)];
        let out = replay(
            &recs,
            &[StrategySpec::new(StrategyKind::Rebase)],
            4,
            BudgetMode::Remaining,
        )
        .unwrap();
        assert_eq!(out[0].budget, 3);
        assert_eq!(out[0].candidate_ids, vec![6, 7]);
        let out = replay(
            &recs,
            &[StrategySpec::new(StrategyKind::Rebase)],
            4,
            BudgetMode::Full,
        )
        .unwrap();
        assert_eq!(out[0].budget, 4);
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(validate_records(&[]), Err(crate::Error::Usage(_))));
        let mut a = record(0, 0, 0.5, None);
        a.embedding = Some(vec![1.0, 0.0]);
        let mut b = record(0, 1, 0.5, None);
        b.embedding = Some(vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            validate_records(&[a, b]),
            Err(crate::Error::Data(_))
        ));
        assert!(matches!(
            validate_records(&[record(0, 0, 1.5, None)]),
            Err(crate::Error::Data(_))
        ));
        let dvts = [StrategySpec::new(StrategyKind::Dvts)];
        assert!(replay(&[record(0, 0, 0.5, None)], &dvts, 2, BudgetMode::Remaining).is_err());
    }
}
