//! Answer aggregation over completed solutions.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{data, usage, Error, Result};
use crate::types::{Answer, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteSpec {
    Majority,
    BestOfN,
    WeightedBestOfN,
    #[default]
    WeightedMajority,
}

impl VoteSpec {
    pub const ALL: [VoteSpec; 4] = [
        VoteSpec::Majority,
        VoteSpec::BestOfN,
        VoteSpec::WeightedBestOfN,
        VoteSpec::WeightedMajority,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VoteSpec::Majority => "majority",
            VoteSpec::BestOfN => "best_of_n",
            VoteSpec::WeightedBestOfN => "weighted_best_of_n",
            VoteSpec::WeightedMajority => "weighted_majority",
        }
    }
}

impl fmt::Display for VoteSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VoteSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VoteSpec::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| usage(format!("unknown vote method '{s}'")))
    }
}

/// Per-answer tally: the aggregated value and the lowest id that contributed to it.
struct Tally {
    value: f64,
    first_id: u64,
}

/// Picks the final answer; every tie goes to the lowest trajectory id.
///
/// * `majority`: most frequent answer.
/// * `best_of_n`: answer of the highest-scoring solution.
/// * `weighted_best_of_n`: answer with the highest per-answer maximum score.
/// * `weighted_majority`: answer with the largest total score.
pub fn vote(completed: &[Trajectory], spec: VoteSpec) -> Result<Answer> {
    if completed.is_empty() {
        return Err(usage("cannot vote over an empty solution pool"));
    }
    let mut tallies: HashMap<Answer, Tally> = HashMap::new();
    for t in completed {
        let answer = t
            .answer
            .filter(|_| t.complete)
            .ok_or_else(|| data(format!("trajectory {} is not a complete solution", t.id)))?;
        let contribution = match spec {
            VoteSpec::Majority => 1.0,
            _ => t.score,
        };
        match tallies.get_mut(&answer) {
            None => {
                tallies.insert(
                    answer,
                    Tally {
                        value: contribution,
                        first_id: t.id,
                    },
                );
            }
            Some(tally) => match spec {
                VoteSpec::Majority | VoteSpec::WeightedMajority => {
                    tally.value += contribution;
                    tally.first_id = tally.first_id.min(t.id);
                }
                VoteSpec::BestOfN | VoteSpec::WeightedBestOfN => {
                    // The id that matters is the one achieving the max.
                    if contribution > tally.value
                        || (contribution == tally.value && t.id < tally.first_id)
                    {
                        tally.value = contribution;
                        tally.first_id = t.id;
                    }
                }
            },
        }
    }
    let (answer, _) = tallies
        .into_iter()
        .max_by(|(_, a), (_, b)| {
            a.value
                .total_cmp(&b.value)
                .then(b.first_id.cmp(&a.first_id))
        })
        .expect("non-empty pool");
    Ok(answer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pool(answers: &[u64], scores: &[f64]) -> Vec<Trajectory> {
        answers
            .iter()
            .zip(scores)
            .enumerate()
            .map(|(i, (&a, &s))| Trajectory::scored(i as u64, s).completed(Answer(a)))
            .collect()
    }

    #[test]
    fn examples() {
        let p = pool(&[1, 1, 2], &[0.1, 0.1, 0.9]);
        assert_eq!(vote(&p, VoteSpec::Majority).unwrap(), Answer(1));
        let p = pool(&[1, 2], &[0.4, 0.9]);
        assert_eq!(vote(&p, VoteSpec::BestOfN).unwrap(), Answer(2));
        assert_eq!(vote(&p, VoteSpec::WeightedBestOfN).unwrap(), Answer(2));
        let p = pool(&[1, 1, 2], &[0.3, 0.3, 0.9]);
        assert_eq!(vote(&p, VoteSpec::WeightedMajority).unwrap(), Answer(2));
        let p = pool(&[1, 1, 2], &[0.5, 0.5, 0.9]);
        assert_eq!(vote(&p, VoteSpec::WeightedMajority).unwrap(), Answer(1));
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let p = pool(&[5, 3], &[0.5, 0.5]);
        for spec in VoteSpec::ALL {
            assert_eq!(vote(&p, spec).unwrap(), Answer(5), "{spec}");
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            vote(&[], VoteSpec::Majority),
            Err(Error::Usage(_))
        ));
        let incomplete = vec![Trajectory::scored(0, 0.5)];
        assert!(matches!(
            vote(&incomplete, VoteSpec::Majority),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn names_round_trip() {
        for v in VoteSpec::ALL {
            assert_eq!(v.name().parse::<VoteSpec>().unwrap(), v);
        }
        assert!("plurality".parse::<VoteSpec>().is_err());
    }

    proptest! {
        #[test]
        fn weighted_majority_invariant_to_rescaling(
            answers in prop::collection::vec(0u64..4, 1..20),
            scores in prop::collection::vec(0.01f64..1.0, 20),
            factor in 0.1f64..0.99) {
            let p = pool(&answers, &scores);
            let scaled: Vec<Trajectory> = p.iter().cloned().map(|mut t| { t.score *= factor; t }).collect();
            prop_assert_eq!(vote(&p, VoteSpec::WeightedMajority).unwrap(),
                            vote(&scaled, VoteSpec::WeightedMajority).unwrap());
        }

        #[test]
        fn permutation_invariance(answers in prop::collection::vec(0u64..4, 1..20),
                                  scores in prop::collection::vec(0.01f64..1.0, 20)) {
            let p = pool(&answers, &scores);
            let mut reversed = p.clone();
            reversed.reverse();
            for spec in VoteSpec::ALL {
                prop_assert_eq!(vote(&p, spec).unwrap(), vote(&reversed, spec).unwrap());
            }
        }
    }
}
