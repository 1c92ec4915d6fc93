//! Round-based parallel search loop and the seeded multi-trial harness.
//!
//! One search keeps an active frontier of partial solutions. Each round every
//! allocated copy is stepped once by the policy; completed solutions move to the
//! pool, the survivors are scored, and the allocator decides how many children each
//! survivor spawns next round. The final answer is voted over the pool.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocators::{allocate, allocate_temperature, StrategyKind, StrategySpec};
use crate::error::{data, usage, Result};
use crate::rng::{self, domain, StreamRng};
use crate::stats::{self, Interval, BOOTSTRAP_RESAMPLES};
use crate::types::{Answer, CandidateSet, RoundRecord, SearchMetrics, SearchResult, Trajectory};
use crate::voting::{vote, VoteSpec};

/// The policy, scorer and embedder a search runs against.
///
/// `step` must be deterministic given the stream it is handed; `score` and `embed`
/// must be pure functions of the trajectory.
pub trait Policy {
    /// Extends `parent` by one reasoning step into a new trajectory with id `child_id`.
    fn step(&self, parent: &Trajectory, child_id: u64, rng: &mut StreamRng) -> Result<Trajectory>;

    /// Process-reward score in `[0, 1]`.
    fn score(&self, trajectory: &Trajectory) -> f64;

    /// Unit-norm semantic embedding, if the policy provides one.
    fn embed(&self, trajectory: &Trajectory) -> Option<Vec<f64>>;

    /// The correct answer, when known; enables accuracy metrics.
    fn gold(&self) -> Option<Answer> {
        None
    }
}

/// How much budget each allocation round distributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    /// `N` minus the number of solutions already pooled.
    #[default]
    Remaining,
    /// The full `N` every round.
    Full,
}

impl std::str::FromStr for BudgetMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "remaining" => Ok(BudgetMode::Remaining),
            "full" => Ok(BudgetMode::Full),
            other => Err(usage(format!("unknown budget mode '{other}'"))),
        }
    }
}

impl BudgetMode {
    pub fn round_budget(self, total: usize, pooled: usize) -> usize {
        match self {
            BudgetMode::Remaining => total.saturating_sub(pooled),
            BudgetMode::Full => total,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub budget: usize,
    pub max_steps: u32,
    pub strategy: StrategySpec,
    pub vote: VoteSpec,
    pub budget_mode: BudgetMode,
    pub seed: u64,
}

impl SearchConfig {
    pub fn new(budget: usize, max_steps: u32, strategy: StrategySpec) -> Self {
        Self {
            budget,
            max_steps,
            strategy,
            vote: VoteSpec::default(),
            budget_mode: BudgetMode::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(usage("search budget must be at least 1"));
        }
        if self.max_steps == 0 {
            return Err(usage("max_steps must be at least 1"));
        }
        self.strategy.validate()
    }
}

fn score_into<P: Policy + ?Sized>(env: &P, t: &mut Trajectory) -> Result<()> {
    let s = env.score(t);
    if !(0.0..=1.0).contains(&s) {
        return Err(data(format!("scorer returned {s} for trajectory {}", t.id)));
    }
    t.score = s;
    Ok(())
}

/// Runs one search to completion.
pub fn run_search<P: Policy + ?Sized>(config: &SearchConfig, env: &P) -> Result<SearchResult> {
    config.validate()?;
    let n = config.budget;
    let spec = config.strategy;
    let dvts_groups = (n / spec.beam_width.max(1)).max(1);

    let mut next_id: u64 = 0;
    let mut to_step: Vec<Trajectory> = (0..n)
        .map(|i| {
            let mut root = Trajectory::root(next_id);
            next_id += 1;
            if spec.kind == StrategyKind::Dvts {
                root.group_id = Some(i % dvts_groups);
            }
            root
        })
        .collect();

    let mut pool: Vec<Trajectory> = Vec::new();
    let mut rounds = Vec::new();
    let mut steps_used = 0usize;
    let mut rollouts_used = 0usize;

    for round in 0..config.max_steps {
        if to_step.is_empty() {
            break;
        }
        rollouts_used = rollouts_used.max(to_step.len());
        steps_used += to_step.len();

        let mut completed = Vec::new();
        let mut active = Vec::new();
        for parent in &to_step {
            let id = next_id;
            next_id += 1;
            let mut stream = rng::stream(config.seed, &[domain::NODE, id]);
            let mut child = env.step(parent, id, &mut stream)?;
            child.id = id;
            child.parent_id = Some(parent.id);
            child.group_id = parent.group_id;
            score_into(env, &mut child)?;
            if child.complete {
                if child.answer.is_none() {
                    return Err(data(format!("completed trajectory {id} has no answer")));
                }
                completed.push(child);
            } else {
                child.embedding = env.embed(&child);
                active.push(child);
            }
        }
        pool.extend(completed.iter().cloned());

        let last_round = round + 1 == config.max_steps;
        if pool.len() >= n || active.is_empty() || last_round {
            rounds.push(RoundRecord {
                round,
                completed,
                active,
                budget: None,
                allocation: None,
            });
            break;
        }

        let budget = config.budget_mode.round_budget(n, pool.len());
        let set = CandidateSet::new(active, budget);
        let allocation = if spec.kind == StrategyKind::Temperature {
            // Every surviving chain simply continues; no reallocation happens.
            allocate_temperature(&set)?
        } else {
            allocate(&set, &spec)?
        };
        let active = set.candidates;
        to_step = active
            .iter()
            .zip(&allocation.counts)
            .flat_map(|(t, &b)| std::iter::repeat_n(t, b).cloned())
            .collect();
        rounds.push(RoundRecord {
            round,
            completed,
            active,
            budget: Some(budget),
            allocation: Some(allocation),
        });
    }

    let voted_answer = if pool.is_empty() {
        None
    } else {
        Some(vote(&pool, config.vote)?)
    };
    let metrics = metrics_for(&pool, voted_answer, env.gold());
    Ok(SearchResult {
        completed: pool,
        voted_answer,
        rounds,
        rollouts_used,
        steps_used,
        metrics,
    })
}

fn metrics_for(pool: &[Trajectory], voted: Option<Answer>, gold: Option<Answer>) -> SearchMetrics {
    let abstained = voted.is_none();
    let Some(gold) = gold else {
        return SearchMetrics {
            abstained,
            ..SearchMetrics::default()
        };
    };
    let correct_count = pool.iter().filter(|t| t.answer == Some(gold)).count();
    SearchMetrics {
        correct: voted == Some(gold),
        pass_rate: if pool.is_empty() {
            0.0
        } else {
            correct_count as f64 / pool.len() as f64
        },
        coverage: correct_count > 0,
        abstained,
    }
}

/// Per-trial summary kept by [`run_trials`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub correct: bool,
    pub pass_rate: f64,
    pub coverage: bool,
    pub abstained: bool,
    pub pool_size: usize,
    pub steps_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub ci: Interval,
}

impl MetricSummary {
    pub fn from_samples(xs: &[f64], seed: u64) -> Self {
        Self {
            mean: stats::mean(xs),
            ci: stats::bootstrap_mean_ci(xs, 0.95, BOOTSTRAP_RESAMPLES, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trials: usize,
    pub accuracy: MetricSummary,
    pub pass_rate: MetricSummary,
    pub coverage: MetricSummary,
    pub abstentions: usize,
    pub mean_pool_size: f64,
    pub outcomes: Vec<TrialOutcome>,
    /// Full record of trial 0, for traces and inspection.
    pub sample: SearchResult,
}

impl TrialReport {
    pub fn accuracy_samples(&self) -> Vec<f64> {
        self.outcomes
            .iter()
            .map(|o| f64::from(u8::from(o.correct)))
            .collect()
    }
}

/// Seed of trial `index` under `master`: independent of execution order.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    rng::derive_seed(master, &[domain::TRIAL, index as u64])
}

/// Runs `trials` independent searches, each against a fresh environment built from
/// its trial seed. `config.seed` is the master seed.
pub fn run_trials<P, F>(config: &SearchConfig, make_env: F, trials: usize) -> Result<TrialReport>
where
    P: Policy,
    F: Fn(u64) -> Result<P> + Sync,
{
    if trials == 0 {
        return Err(usage("at least one trial is required"));
    }
    config.validate()?;
    let results: Vec<(TrialOutcome, Option<SearchResult>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(config.seed, t);
            let env = make_env(seed)?;
            let cfg = SearchConfig { seed, ..*config };
            let result = run_search(&cfg, &env)?;
            let outcome = TrialOutcome {
                seed,
                correct: result.metrics.correct,
                pass_rate: result.metrics.pass_rate,
                coverage: result.metrics.coverage,
                abstained: result.metrics.abstained,
                pool_size: result.completed.len(),
                steps_used: result.steps_used,
            };
            Ok((outcome, (t == 0).then_some(result)))
        })
        .collect::<Result<_>>()?;

    let mut sample = None;
    let mut outcomes = Vec::with_capacity(trials);
    for (outcome, result) in results {
        outcomes.push(outcome);
        if result.is_some() {
            sample = result;
        }
    }
    let as_f64 = |f: fn(&TrialOutcome) -> f64| outcomes.iter().map(f).collect::<Vec<f64>>();
    let acc = as_f64(|o| f64::from(u8::from(o.correct)));
    let pass = as_f64(|o| o.pass_rate);
    let cov = as_f64(|o| f64::from(u8::from(o.coverage)));
    let boot = |k: u64| rng::derive_seed(config.seed, &[domain::BOOTSTRAP, k]);
    Ok(TrialReport {
        trials,
        accuracy: MetricSummary::from_samples(&acc, boot(0)),
        pass_rate: MetricSummary::from_samples(&pass, boot(1)),
        coverage: MetricSummary::from_samples(&cov, boot(2)),
        abstentions: outcomes.iter().filter(|o| o.abstained).count(),
        mean_pool_size: stats::mean(&as_f64(|o| o.pool_size as f64)),
        outcomes,
        sample: sample.expect("trial 0 always runs"),
    })
}
