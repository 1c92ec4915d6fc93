//! Domain data shared by allocators, the search engine and the simulator.

use serde::{Deserialize, Serialize};

use crate::error::{data, usage, Result};

/// Opaque final-answer token. Equality is the only operation voting relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Answer(pub u64);

/// One partial or complete candidate solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: u64,
    pub parent_id: Option<u64>,
    pub step_count: u32,
    /// Ground-truth reasoning direction; only known inside simulations.
    pub direction_id: Option<usize>,
    /// DVTS subtree tag, assigned to roots and inherited by descendants.
    pub group_id: Option<usize>,
    /// Latest process-reward score in `[0, 1]`.
    pub score: f64,
    pub embedding: Option<Vec<f64>>,
    pub complete: bool,
    pub answer: Option<Answer>,
}

impl Trajectory {
    /// A fresh root: the bare problem statement, not yet stepped.
    pub fn root(id: u64) -> Self {
        Self {
            id,
            parent_id: None,
            step_count: 0,
            direction_id: None,
            group_id: None,
            score: 0.0,
            embedding: None,
            complete: false,
            answer: None,
        }
    }

    /// An incomplete, unscored child carrying the parent's lineage tags.
    pub fn child(&self, id: u64) -> Self {
        Self {
            id,
            parent_id: Some(self.id),
            step_count: self.step_count + 1,
            direction_id: self.direction_id,
            group_id: self.group_id,
            score: 0.0,
            embedding: None,
            complete: false,
            answer: None,
        }
    }

    /// Convenience for one-shot allocation: an incomplete candidate with only a score.
    pub fn scored(id: u64, score: f64) -> Self {
        Self {
            score,
            ..Self::root(id)
        }
    }

    pub fn with_embedding(mut self, embedding: Vec<f64>) -> Self {
        self.embedding = Some(embedding);
        self
    }

    pub fn with_group(mut self, group: usize) -> Self {
        self.group_id = Some(group);
        self
    }

    pub fn with_direction(mut self, direction: usize) -> Self {
        self.direction_id = Some(direction);
        self
    }

    pub fn completed(mut self, answer: Answer) -> Self {
        self.complete = true;
        self.answer = Some(answer);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(data(format!(
                "trajectory {} has score {} outside [0, 1]",
                self.id, self.score
            )));
        }
        if let Some(e) = &self.embedding {
            let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(data(format!(
                    "trajectory {} embedding has norm {norm}, expected unit",
                    self.id
                )));
            }
        }
        if self.complete != self.answer.is_some() {
            return Err(data(format!(
                "trajectory {} must carry an answer iff it is complete",
                self.id
            )));
        }
        Ok(())
    }
}

/// The active frontier presented to an allocator in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<Trajectory>,
    pub budget: usize,
}

impl CandidateSet {
    pub fn new(candidates: Vec<Trajectory>, budget: usize) -> Self {
        Self { candidates, budget }
    }

    /// Incomplete candidates with consecutive ids carrying only scores.
    pub fn from_scores(scores: &[f64], budget: usize) -> Self {
        let candidates = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| Trajectory::scored(i as u64, s))
            .collect();
        Self { candidates, budget }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.score).collect()
    }

    /// Checks the preconditions every allocator shares: non-empty, distinct ids.
    pub fn ensure_allocatable(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(usage("cannot allocate over an empty candidate set"));
        }
        let mut ids: Vec<u64> = self.candidates.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(usage("candidate ids must be distinct"));
        }
        Ok(())
    }
}

/// Rollouts per candidate, index-aligned with the [`CandidateSet`] it was computed for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AllocationVector {
    pub counts: Vec<usize>,
}

impl AllocationVector {
    pub fn new(counts: Vec<usize>) -> Self {
        Self { counts }
    }

    pub fn zeros(k: usize) -> Self {
        Self { counts: vec![0; k] }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

impl From<Vec<usize>> for AllocationVector {
    fn from(counts: Vec<usize>) -> Self {
        Self { counts }
    }
}

impl std::fmt::Display for AllocationVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, c) in self.counts.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Partition of candidates into reasoning directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionGrouping {
    pub num_directions: usize,
    /// Direction index of each candidate.
    pub membership: Vec<usize>,
    /// Candidates per direction, `k_j`.
    pub counts: Vec<usize>,
    /// Shared score of each direction, `R_j`.
    pub direction_scores: Vec<f64>,
}

impl DirectionGrouping {
    /// Builds a grouping from explicit counts; membership lists directions in order.
    pub fn from_counts(counts: Vec<usize>, direction_scores: Vec<f64>) -> Result<Self> {
        let membership = counts
            .iter()
            .enumerate()
            .flat_map(|(j, &k)| std::iter::repeat_n(j, k))
            .collect();
        let grouping = Self {
            num_directions: counts.len(),
            membership,
            counts,
            direction_scores,
        };
        grouping.validate()?;
        Ok(grouping)
    }

    /// Builds a grouping from per-candidate membership; counts are derived.
    pub fn from_membership(membership: Vec<usize>, direction_scores: Vec<f64>) -> Result<Self> {
        let g = direction_scores.len();
        let mut counts = vec![0; g];
        for &m in &membership {
            if m >= g {
                return Err(usage(format!(
                    "direction index {m} out of range for g = {g}"
                )));
            }
            counts[m] += 1;
        }
        let grouping = Self {
            num_directions: g,
            membership,
            counts,
            direction_scores,
        };
        grouping.validate()?;
        Ok(grouping)
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.num_directions;
        if g == 0 {
            return Err(usage("a grouping needs at least one direction"));
        }
        if self.counts.len() != g || self.direction_scores.len() != g {
            return Err(usage(
                "grouping counts and scores must have one entry per direction",
            ));
        }
        if self.counts.contains(&0) {
            return Err(usage("every direction must contain at least one candidate"));
        }
        if self.membership.iter().any(|&m| m >= g) {
            return Err(usage("membership index out of range"));
        }
        if self.counts.iter().sum::<usize>() != self.membership.len() {
            return Err(usage(
                "direction counts must sum to the number of candidates",
            ));
        }
        if self.direction_scores.iter().any(|r| !r.is_finite()) {
            return Err(data("direction scores must be finite"));
        }
        Ok(())
    }
}

/// Outcome metrics of one search trial, computed against the environment's gold answer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchMetrics {
    /// Voted answer equals gold. False on abstention.
    pub correct: bool,
    /// Fraction of pooled solutions that are correct; 0 for an empty pool.
    pub pass_rate: f64,
    /// At least one pooled solution is correct.
    pub coverage: bool,
    /// The pool was empty at termination, so nothing was voted.
    pub abstained: bool,
}

/// Snapshot of one round of the search loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    /// Solutions that completed during this round's stepping.
    pub completed: Vec<Trajectory>,
    /// Scored incomplete candidates left after stepping.
    pub active: Vec<Trajectory>,
    /// Budget handed to the allocator, absent if the loop stopped this round.
    pub budget: Option<usize>,
    pub allocation: Option<AllocationVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub completed: Vec<Trajectory>,
    pub voted_answer: Option<Answer>,
    pub rounds: Vec<RoundRecord>,
    /// Peak number of rollouts stepped in parallel in any round (never above the budget).
    pub rollouts_used: usize,
    /// Total policy steps over all rounds.
    pub steps_used: usize,
    pub metrics: SearchMetrics,
}
