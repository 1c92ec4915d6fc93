//! Baseline rollout allocation strategies and the strategy dispatcher.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bayes;
use crate::dora;
use crate::error::{usage, Error, Result};
use crate::types::{AllocationVector, CandidateSet};
use crate::weights::{apportion, softmax_weights};

pub const DEFAULT_BEAM_WIDTH: usize = 4;
pub const DEFAULT_REWARD_TEMPERATURE: f64 = 0.1;
pub const DEFAULT_SIMILARITY_TEMPERATURE: f64 = 0.01;
pub const DEFAULT_CONCENTRATION: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Temperature,
    Beam,
    Dvts,
    Rebase,
    Dora,
    OptimalBayes,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::Temperature,
        StrategyKind::Beam,
        StrategyKind::Dvts,
        StrategyKind::Rebase,
        StrategyKind::Dora,
        StrategyKind::OptimalBayes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Temperature => "temperature",
            StrategyKind::Beam => "beam",
            StrategyKind::Dvts => "dvts",
            StrategyKind::Rebase => "rebase",
            StrategyKind::Dora => "dora",
            StrategyKind::OptimalBayes => "optimal_bayes",
        }
    }

    pub fn needs_embeddings(self) -> bool {
        self == StrategyKind::Dora
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| usage(format!("unknown strategy '{s}'")))
    }
}

/// A strategy together with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    /// Rollouts per retained candidate for beam search and DVTS.
    pub beam_width: usize,
    /// Softmax temperature over process-reward scores (REBASE, DORA, optimal Bayes).
    pub reward_temperature: f64,
    /// Softmax temperature over cosine similarities (DORA).
    pub similarity_temperature: f64,
    /// Beta-prior concentration (optimal Bayes).
    pub concentration: f64,
}

impl Default for StrategySpec {
    fn default() -> Self {
        Self::new(StrategyKind::Rebase)
    }
}

impl StrategySpec {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            beam_width: DEFAULT_BEAM_WIDTH,
            reward_temperature: DEFAULT_REWARD_TEMPERATURE,
            similarity_temperature: DEFAULT_SIMILARITY_TEMPERATURE,
            concentration: DEFAULT_CONCENTRATION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(usage(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        match self.kind {
            StrategyKind::Beam | StrategyKind::Dvts if self.beam_width == 0 => {
                Err(usage("beam width must be at least 1"))
            }
            StrategyKind::Rebase => positive("reward_temperature", self.reward_temperature),
            StrategyKind::Dora => {
                positive("reward_temperature", self.reward_temperature)?;
                positive("similarity_temperature", self.similarity_temperature)
            }
            StrategyKind::OptimalBayes => {
                positive("reward_temperature", self.reward_temperature)?;
                positive("concentration", self.concentration)
            }
            _ => Ok(()),
        }
    }
}

/// One rollout per candidate; the budget must cover every candidate.
///
/// A budget larger than `k` is truncated: the surplus is never reallocated.
pub fn allocate_temperature(set: &CandidateSet) -> Result<AllocationVector> {
    set.ensure_allocatable()?;
    if set.budget < set.len() {
        return Err(usage(format!(
            "temperature sampling needs budget >= k, got N = {} and k = {}",
            set.budget,
            set.len()
        )));
    }
    Ok(AllocationVector::new(vec![1; set.len()]))
}

/// Candidate indices by descending score, ties to the lower index.
fn ranking(set: &CandidateSet) -> Vec<usize> {
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| {
        set.candidates[b]
            .score
            .total_cmp(&set.candidates[a].score)
            .then(a.cmp(&b))
    });
    order
}

/// Top-`K = floor(N/M)` candidates by score each receive `M` rollouts.
///
/// Leftover units `N − K·M` are dealt one per candidate down the ranking from rank 1,
/// wrapping around if the frontier is smaller than the number of units to place.
pub fn allocate_beam(set: &CandidateSet, beam_width: usize) -> Result<AllocationVector> {
    set.ensure_allocatable()?;
    if beam_width == 0 {
        return Err(usage("beam width must be at least 1"));
    }
    let order = ranking(set);
    let mut counts = vec![0usize; set.len()];
    let kept = (set.budget / beam_width).min(set.len());
    for &i in &order[..kept] {
        counts[i] = beam_width;
    }
    let mut leftover = set.budget - kept * beam_width;
    for &i in order.iter().cycle() {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    Ok(AllocationVector::new(counts))
}

/// Each surviving DVTS subtree spends its share of the budget on its best member.
///
/// The budget is split evenly over the groups that still have candidates, with the
/// remainder going to the lowest group ids. When all `N/M` groups survive this gives
/// every group exactly `M`; an extinct group's share flows to the survivors.
pub fn allocate_dvts(set: &CandidateSet, beam_width: usize) -> Result<AllocationVector> {
    set.ensure_allocatable()?;
    if beam_width == 0 {
        return Err(usage("beam width must be at least 1"));
    }
    // group id -> best member index
    let mut leaders: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, c) in set.candidates.iter().enumerate() {
        let group = c
            .group_id
            .ok_or_else(|| usage(format!("candidate {} has no DVTS group", c.id)))?;
        leaders
            .entry(group)
            .and_modify(|best| {
                if c.score > set.candidates[*best].score {
                    *best = i;
                }
            })
            .or_insert(i);
    }
    let live = leaders.len();
    let share = set.budget / live;
    let extra = set.budget % live;
    let mut counts = vec![0usize; set.len()];
    for (rank, (_, &leader)) in leaders.iter().enumerate() {
        counts[leader] = share + usize::from(rank < extra);
    }
    Ok(AllocationVector::new(counts))
}

/// Softmax-proportional allocation over scores, apportioned exactly.
pub fn allocate_rebase(set: &CandidateSet, reward_temperature: f64) -> Result<AllocationVector> {
    set.ensure_allocatable()?;
    let weights = softmax_weights(&set.scores(), reward_temperature)?;
    apportion(&weights, set.budget)
}

/// Optimal Bayes allocation with priors centred on softmax-normalized scores.
pub fn allocate_optimal_bayes(
    set: &CandidateSet,
    reward_temperature: f64,
    concentration: f64,
) -> Result<AllocationVector> {
    set.ensure_allocatable()?;
    if set.len() == 1 {
        return Ok(AllocationVector::new(vec![set.budget]));
    }
    let weights = softmax_weights(&set.scores(), reward_temperature)?;
    // Beta means must stay strictly inside (0, 1) even when the softmax saturates.
    let clamped: Vec<f64> = weights
        .iter()
        .map(|w| w.clamp(1e-300, 1.0 - 1e-15))
        .collect();
    let priors = bayes::priors_from_weights(&clamped, concentration)?;
    bayes::optimal_allocate(&priors, set.budget)
}

/// Routes to the strategy named by `spec`.
pub fn allocate(set: &CandidateSet, spec: &StrategySpec) -> Result<AllocationVector> {
    spec.validate()?;
    match spec.kind {
        StrategyKind::Temperature => allocate_temperature(set),
        StrategyKind::Beam => allocate_beam(set, spec.beam_width),
        StrategyKind::Dvts => allocate_dvts(set, spec.beam_width),
        StrategyKind::Rebase => allocate_rebase(set, spec.reward_temperature),
        StrategyKind::Dora => {
            dora::allocate_dora(set, spec.reward_temperature, spec.similarity_temperature)
        }
        StrategyKind::OptimalBayes => {
            allocate_optimal_bayes(set, spec.reward_temperature, spec.concentration)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Trajectory;
    use proptest::prelude::*;

    fn grouped(groups: &[&[f64]], budget: usize) -> CandidateSet {
        let mut candidates = Vec::new();
        for (g, scores) in groups.iter().enumerate() {
            for &s in scores.iter() {
                let id = candidates.len() as u64;
                candidates.push(Trajectory::scored(id, s).with_group(g));
            }
        }
        CandidateSet::new(candidates, budget)
    }

    #[test]
    fn temperature_examples() {
        let set = CandidateSet::from_scores(&[0.1, 0.2, 0.3, 0.4], 4);
        assert_eq!(allocate_temperature(&set).unwrap().counts, vec![1, 1, 1, 1]);
        let set = CandidateSet::from_scores(&[0.5], 1);
        assert_eq!(allocate_temperature(&set).unwrap().counts, vec![1]);
        let set = CandidateSet::from_scores(&[0.1, 0.2, 0.3], 2);
        assert!(matches!(allocate_temperature(&set), Err(Error::Usage(_))));
    }

    #[test]
    fn beam_examples() {
        let set = CandidateSet::from_scores(&[0.9, 0.1, 0.5, 0.7], 8);
        assert_eq!(allocate_beam(&set, 4).unwrap().counts, vec![4, 0, 0, 4]);
        let set = CandidateSet::from_scores(&[0.9, 0.1], 4);
        assert_eq!(allocate_beam(&set, 4).unwrap().counts, vec![4, 0]);
        let set = CandidateSet::from_scores(&[0.9, 0.8, 0.1], 7);
        assert_eq!(allocate_beam(&set, 3).unwrap().counts, vec![4, 3, 0]);
        let set = CandidateSet::from_scores(&[0.9, 0.8, 0.1], 0);
        assert_eq!(allocate_beam(&set, 3).unwrap().counts, vec![0, 0, 0]);
    }

    #[test]
    fn beam_ties_go_to_lower_index() {
        let set = CandidateSet::from_scores(&[0.5, 0.5, 0.5], 4);
        assert_eq!(allocate_beam(&set, 4).unwrap().counts, vec![4, 0, 0]);
        // budget below the beam width: everything is leftover
        let set = CandidateSet::from_scores(&[0.2, 0.6, 0.4], 2);
        assert_eq!(allocate_beam(&set, 4).unwrap().counts, vec![0, 1, 1]);
    }

    #[test]
    fn dvts_examples() {
        let set = grouped(&[&[0.9, 0.1], &[0.3, 0.7]], 4);
        assert_eq!(allocate_dvts(&set, 2).unwrap().counts, vec![2, 0, 0, 2]);
        let set = grouped(&[&[0.2, 0.8]], 2);
        assert_eq!(allocate_dvts(&set, 2).unwrap().counts, vec![0, 2]);
        // group 0 extinct: only group 1's survivor remains and takes the whole budget
        let set = CandidateSet::new(vec![Trajectory::scored(0, 0.5).with_group(1)], 4);
        assert_eq!(allocate_dvts(&set, 2).unwrap().counts, vec![4]);
        let set = CandidateSet::from_scores(&[0.5, 0.6], 2);
        assert!(matches!(allocate_dvts(&set, 2), Err(Error::Usage(_))));
    }

    #[test]
    fn dvts_remainder_goes_to_lowest_group() {
        let set = grouped(&[&[0.1], &[0.2], &[0.3]], 5);
        assert_eq!(allocate_dvts(&set, 2).unwrap().counts, vec![2, 2, 1]);
    }

    #[test]
    fn rebase_examples() {
        let set = CandidateSet::from_scores(&[1.0, 1.0, 1.0, 1.0], 8);
        assert_eq!(allocate_rebase(&set, 0.1).unwrap().counts, vec![2, 2, 2, 2]);
        let set = CandidateSet::from_scores(&[0.0, 3f64.ln()], 4);
        assert_eq!(allocate_rebase(&set, 1.0).unwrap().counts, vec![1, 3]);
        let set = CandidateSet::from_scores(&[5.0, 0.0], 10);
        assert_eq!(allocate_rebase(&set, 0.01).unwrap().counts, vec![10, 0]);
    }

    #[test]
    fn dispatch_matches_direct_calls() {
        let set = CandidateSet::from_scores(&[0.9, 0.1, 0.5, 0.7], 8);
        let rebase = StrategySpec::new(StrategyKind::Rebase);
        assert_eq!(
            allocate(&set, &rebase).unwrap(),
            allocate_rebase(&set, 0.1).unwrap()
        );
        let beam = StrategySpec::new(StrategyKind::Beam);
        assert_eq!(
            allocate(&set, &beam).unwrap(),
            allocate_beam(&set, 4).unwrap()
        );
        let bayes = StrategySpec {
            concentration: 1e9,
            ..StrategySpec::new(StrategyKind::OptimalBayes)
        };
        assert_eq!(allocate(&set, &bayes).unwrap().counts, vec![8, 0, 0, 0]);
    }

    #[test]
    fn strategy_names_round_trip() {
        for kind in StrategyKind::ALL {
            assert_eq!(kind.name().parse::<StrategyKind>().unwrap(), kind);
        }
        assert!(matches!(
            "mcts".parse::<StrategyKind>(),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn invalid_specs_rejected() {
        let set = CandidateSet::from_scores(&[0.5, 0.4], 2);
        let spec = StrategySpec {
            beam_width: 0,
            ..StrategySpec::new(StrategyKind::Beam)
        };
        assert!(allocate(&set, &spec).is_err());
        let spec = StrategySpec {
            reward_temperature: 0.0,
            ..StrategySpec::new(StrategyKind::Rebase)
        };
        assert!(allocate(&set, &spec).is_err());
    }

    #[test]
    fn single_candidate_gets_everything() {
        for kind in StrategyKind::ALL {
            let n = if kind == StrategyKind::Temperature {
                1
            } else {
                9
            };
            let set = CandidateSet::new(
                vec![Trajectory::scored(0, 0.3)
                    .with_group(0)
                    .with_embedding(vec![1.0, 0.0])],
                n,
            );
            let out = allocate(&set, &StrategySpec::new(kind)).unwrap();
            assert_eq!(out.counts, vec![n], "{kind}");
        }
    }

    proptest! {
        #[test]
        fn rebase_shift_invariance(scores in prop::collection::vec(0.0f64..1.0, 1..16),
                                   shift in -3.0f64..3.0, n in 0usize..200) {
            let a = allocate_rebase(&CandidateSet::from_scores(&scores, n), 0.1).unwrap();
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            let b = allocate_rebase(&CandidateSet::from_scores(&shifted, n), 0.1).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn beam_and_dvts_invariant_under_monotone_transform(
            scores in prop::collection::vec(0.0f64..1.0, 1..16), n in 0usize..64, m in 1usize..6) {
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            let a = allocate_beam(&CandidateSet::from_scores(&scores, n), m).unwrap();
            let b = allocate_beam(&CandidateSet::from_scores(&transformed, n), m).unwrap();
            prop_assert_eq!(a, b);
            let tag = |s: &[f64]| CandidateSet::new(
                s.iter().enumerate().map(|(i, &x)| Trajectory::scored(i as u64, x).with_group(i % 3)).collect(), n);
            let a = allocate_dvts(&tag(&scores), m).unwrap();
            let b = allocate_dvts(&tag(&transformed), m).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn budgets_are_exact(scores in prop::collection::vec(0.0f64..1.0, 1..16), n in 0usize..300) {
            for kind in [StrategyKind::Beam, StrategyKind::Rebase, StrategyKind::OptimalBayes] {
                let out = allocate(&CandidateSet::from_scores(&scores, n), &StrategySpec::new(kind)).unwrap();
                prop_assert_eq!(out.total(), n);
                prop_assert_eq!(out.len(), scores.len());
            }
        }
    }
}
