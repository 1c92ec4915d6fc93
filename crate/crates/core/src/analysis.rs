//! Numerical verification drivers and strategy comparison.
//!
//! Each `verify_*` function draws its own random instances from a seed, runs one
//! family of checks, and returns a [`VerificationReport`] listing every check with
//! its worst deviation and the tolerance it was held to.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocators::{allocate_rebase, StrategyKind};
use crate::bayes::{
    brute_force_allocate, failure_expectation, joint_failure, optimal_allocate,
    priors_from_weights, shifted_linear_allocation, BetaPrior,
};
use crate::config::ExperimentConfig;
use crate::dora::{self, allocate_dora, dora_weights};
use crate::engine::{run_trials, MetricSummary, SearchConfig, TrialReport};
use crate::error::{config, Result};
use crate::rng::{self, domain, StreamRng};
use crate::simenv::{separated_centroids, EnvSpec, SimEnv};
use crate::stats;
use crate::types::{CandidateSet, DirectionGrouping, Trajectory};

/// Relative L1 distance tolerated between the greedy optimum and the shifted linear
/// rule at κ = 2, N = 10⁴, k = 5. Set from a measured worst case of 3.3e-4 over 100
/// seeded instances (see README), with headroom for other seeds.
pub const SHIFTED_LINEAR_TOLERANCE: f64 = 0.02;

pub const DEFAULT_SEED: u64 = 20_250_601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub instances: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &str, instances: usize, max_deviation: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            instances,
            max_deviation,
            tolerance,
            passed: max_deviation <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub claim: String,
    pub instances: usize,
    pub max_deviation: f64,
    pub passed: bool,
    pub parameters: BTreeMap<String, String>,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    fn new(claim: &str, parameters: BTreeMap<String, String>, checks: Vec<CheckResult>) -> Self {
        Self {
            claim: claim.to_string(),
            instances: checks.iter().map(|c| c.instances).sum(),
            max_deviation: checks.iter().map(|c| c.max_deviation).fold(0.0, f64::max),
            passed: checks.iter().all(|c| c.passed),
            parameters,
            checks,
        }
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn params(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn claim_stream(seed: u64, claim: u64) -> StreamRng {
    rng::stream(seed, &[domain::VERIFY, claim])
}

/// Random probability vector of length `k` with entries bounded away from zero.
fn random_simplex<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn argsort_desc(w: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop1Params {
    pub instances: usize,
    pub large_concentration: f64,
    pub small_concentration: f64,
    pub max_budget: usize,
    pub max_candidates: usize,
    pub min_weight_gap: f64,
    pub finite_concentration: f64,
    pub finite_budget: usize,
    pub finite_candidates: usize,
    pub finite_tolerance: f64,
    pub seed: u64,
}

impl Default for Prop1Params {
    fn default() -> Self {
        Self {
            instances: 100,
            large_concentration: 1e6,
            small_concentration: 1e-6,
            max_budget: 64,
            max_candidates: 6,
            min_weight_gap: 0.05,
            finite_concentration: 2.0,
            finite_budget: 10_000,
            finite_candidates: 5,
            finite_tolerance: SHIFTED_LINEAR_TOLERANCE,
            seed: DEFAULT_SEED,
        }
    }
}

/// Limiting regimes of the optimal allocation and the finite-κ shifted linear rule.
pub fn verify_prop1(p: &Prop1Params) -> Result<VerificationReport> {
    let mut rng = claim_stream(p.seed, 1);

    // κ large: every rollout lands on the argmax once the top weight leads by min_weight_gap.
    let mut worst_large = 0.0f64;
    for _ in 0..p.instances {
        let k = rng.random_range(2..=p.max_candidates);
        let w = loop {
            let w = random_simplex(k, &mut rng);
            let order = argsort_desc(&w);
            if w[order[0]] - w[order[1]] >= p.min_weight_gap {
                break w;
            }
        };
        let n = rng.random_range(1..=p.max_budget);
        let alloc = optimal_allocate(&priors_from_weights(&w, p.large_concentration)?, n)?;
        let top = argsort_desc(&w)[0];
        worst_large = worst_large.max((n - alloc.counts[top]) as f64 / n as f64);
    }

    // κ small: each of the top-min(k, N) candidates gets at least one rollout.
    let mut worst_small = 0.0f64;
    for _ in 0..p.instances {
        let k = rng.random_range(1..=p.max_candidates);
        let w = random_simplex(k, &mut rng);
        let n = rng.random_range(1..=p.max_budget);
        let w_open: Vec<f64> = w.iter().map(|x| x.min(1.0 - 1e-12)).collect();
        let alloc = optimal_allocate(&priors_from_weights(&w_open, p.small_concentration)?, n)?;
        let uncovered = argsort_desc(&w)
            .into_iter()
            .take(k.min(n))
            .filter(|&i| alloc.counts[i] == 0)
            .count();
        worst_small = worst_small.max(uncovered as f64);
    }

    // finite κ: relative L1 between greedy optimum and (N + kκ)w − κ.
    let mut worst_linear = 0.0f64;
    let mut done = 0;
    while done < p.instances {
        let w = random_simplex(p.finite_candidates, &mut rng);
        let linear = shifted_linear_allocation(&w, p.finite_concentration, p.finite_budget);
        if linear.iter().any(|&b| b <= 0.0) {
            continue;
        }
        let alloc = optimal_allocate(
            &priors_from_weights(&w, p.finite_concentration)?,
            p.finite_budget,
        )?;
        let l1: f64 = alloc
            .counts
            .iter()
            .zip(&linear)
            .map(|(&b, &l)| (b as f64 - l).abs())
            .sum();
        worst_linear = worst_linear.max(l1 / p.finite_budget as f64);
        done += 1;
    }

    Ok(VerificationReport::new(
        "prop1",
        params(&[
            ("instances", p.instances.to_string()),
            ("large_concentration", p.large_concentration.to_string()),
            ("small_concentration", p.small_concentration.to_string()),
            ("finite_concentration", p.finite_concentration.to_string()),
            ("finite_budget", p.finite_budget.to_string()),
            ("seed", p.seed.to_string()),
        ]),
        vec![
            CheckResult::new(
                "large_concentration_all_on_argmax",
                p.instances,
                worst_large,
                0.0,
            ),
            CheckResult::new(
                "small_concentration_top_covered",
                p.instances,
                worst_small,
                0.0,
            ),
            CheckResult::new(
                "finite_concentration_shifted_linear",
                p.instances,
                worst_linear,
                p.finite_tolerance,
            ),
        ],
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyOracleParams {
    pub instances: usize,
    pub max_candidates: usize,
    pub max_budget: usize,
    pub concentrations: Vec<f64>,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for GreedyOracleParams {
    fn default() -> Self {
        Self {
            instances: 200,
            max_candidates: 4,
            max_budget: 12,
            concentrations: vec![0.1, 1.0, 10.0],
            tolerance: 1e-9,
            seed: DEFAULT_SEED,
        }
    }
}

/// Greedy allocation against exhaustive enumeration.
pub fn verify_greedy_oracle(p: &GreedyOracleParams) -> Result<VerificationReport> {
    let mut rng = claim_stream(p.seed, 2);
    let mut worst = 0.0f64;
    for _ in 0..p.instances {
        let k = rng.random_range(1..=p.max_candidates);
        let n = rng.random_range(0..=p.max_budget);
        let kappa = p.concentrations[rng.random_range(0..p.concentrations.len())];
        let priors = (0..k)
            .map(|_| BetaPrior::new(rng.random_range(0.01..0.99), kappa))
            .collect::<Result<Vec<_>>>()?;
        let greedy = joint_failure(&priors, &optimal_allocate(&priors, n)?)?;
        let brute = joint_failure(&priors, &brute_force_allocate(&priors, n)?)?;
        worst = worst.max((greedy - brute).abs());
    }
    Ok(VerificationReport::new(
        "greedy_oracle",
        params(&[
            ("instances", p.instances.to_string()),
            ("max_candidates", p.max_candidates.to_string()),
            ("max_budget", p.max_budget.to_string()),
            ("seed", p.seed.to_string()),
        ]),
        vec![CheckResult::new(
            "greedy_equals_brute_force",
            p.instances,
            worst,
            p.tolerance,
        )],
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaMcParams {
    pub instances: usize,
    pub samples: usize,
    pub max_rollouts: usize,
    /// Allowed distance in standard errors.
    pub z_tolerance: f64,
    pub seed: u64,
}

impl Default for BetaMcParams {
    fn default() -> Self {
        Self {
            instances: 50,
            samples: 1_000_000,
            max_rollouts: 10,
            z_tolerance: 3.0,
            seed: DEFAULT_SEED,
        }
    }
}

/// `(closed form, Monte-Carlo mean, standard error)` for one prior and rollout count.
pub fn beta_failure_monte_carlo(
    prior: &BetaPrior,
    rollouts: usize,
    samples: usize,
    rng: &mut StreamRng,
) -> (f64, f64, f64) {
    let (a, b) = prior.shape();
    let beta = Beta::new(a, b).expect("validated prior has positive shapes");
    let draws: Vec<f64> = (0..samples)
        .map(|_| (1.0 - beta.sample(rng)).powi(rollouts as i32))
        .collect();
    (
        failure_expectation(prior, rollouts),
        stats::mean(&draws),
        stats::standard_error(&draws),
    )
}

/// Closed-form Beta failure expectation against Monte-Carlo sampling.
///
/// The deviation reported is the largest |closed form − MC mean| in standard errors.
pub fn verify_beta_mc(p: &BetaMcParams) -> Result<VerificationReport> {
    let mut rng = claim_stream(p.seed, 3);
    let mut cases = vec![(BetaPrior::new(0.5, 2.0)?, 2usize)];
    for _ in 0..p.instances {
        let w = rng.random_range(0.05..0.95);
        let kappa = rng.random_range(0.5..20.0);
        let b = rng.random_range(0..=p.max_rollouts);
        cases.push((BetaPrior::new(w, kappa)?, b));
    }
    let z_scores: Vec<f64> = cases
        .par_iter()
        .enumerate()
        .map(|(i, (prior, b))| {
            let mut stream = rng::stream(p.seed, &[domain::VERIFY, 3, i as u64]);
            let (exact, mc, se) = beta_failure_monte_carlo(prior, *b, p.samples, &mut stream);
            if se == 0.0 {
                if exact == mc {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (exact - mc).abs() / se
            }
        })
        .collect();
    Ok(VerificationReport::new(
        "beta_mc",
        params(&[
            ("instances", p.instances.to_string()),
            ("samples", p.samples.to_string()),
            ("max_rollouts", p.max_rollouts.to_string()),
            ("seed", p.seed.to_string()),
        ]),
        vec![
            CheckResult::new("worked_case_w0.5_k2_b2", 1, z_scores[0], p.z_tolerance),
            CheckResult::new(
                "product_identity_vs_monte_carlo",
                p.instances,
                z_scores[1..].iter().copied().fold(0.0, f64::max),
                p.z_tolerance,
            ),
        ],
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop2Params {
    pub instances: usize,
    pub max_directions: usize,
    pub max_count: usize,
    pub budget: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for Prop2Params {
    fn default() -> Self {
        Self {
            instances: 1000,
            max_directions: 6,
            max_count: 8,
            budget: 64,
            tolerance: 1e-12,
            seed: DEFAULT_SEED,
        }
    }
}

/// Σ Q log B^(dir) − Σ Q log B^(sol), computed from the allocations themselves.
pub fn log_utility_gap(grouping: &DirectionGrouping, budget: usize) -> Result<f64> {
    let q = dora::optimal_direction_distribution(grouping)?;
    let dir = dora::optimal_direction_allocation(grouping, budget)?;
    let sol = dora::induced_direction_allocation(grouping, budget)?;
    let u = |b: &[f64]| -> f64 { q.iter().zip(b).map(|(q, b)| q * b.ln()).sum() };
    Ok(u(&dir) - u(&sol))
}

/// KL gap between induced and optimal direction allocations.
pub fn verify_prop2(p: &Prop2Params) -> Result<VerificationReport> {
    let mut rng = claim_stream(p.seed, 4);
    let mut negativity = 0.0f64;
    let mut equal_gap = 0.0f64;
    let mut unequal_zero = 0usize;
    let mut identity = 0.0f64;
    let mut equal_instances = 0;
    for i in 0..p.instances {
        let g = rng.random_range(1..=p.max_directions);
        // every fourth instance is balanced so the equality case is exercised
        let counts: Vec<usize> = if i % 4 == 0 {
            vec![rng.random_range(1..=p.max_count); g]
        } else {
            (0..g).map(|_| rng.random_range(1..=p.max_count)).collect()
        };
        let scores: Vec<f64> = (0..g).map(|_| rng.random_range(0.0..1.0)).collect();
        let balanced = counts.windows(2).all(|w| w[0] == w[1]);
        let grouping = DirectionGrouping::from_counts(counts, scores)?;
        let gap = dora::kl_gap(&grouping)?;
        negativity = negativity.max(-gap);
        if balanced {
            equal_instances += 1;
            equal_gap = equal_gap.max(gap);
        } else if gap <= p.tolerance {
            unequal_zero += 1;
        }
        identity = identity.max((log_utility_gap(&grouping, p.budget)? - gap).abs());
    }
    let worked = DirectionGrouping::from_counts(vec![3, 1], vec![1.0, 1.0])?;
    let worked_dev = (dora::kl_gap(&worked)? - 0.5 * (4.0f64 / 3.0).ln()).abs();

    Ok(VerificationReport::new(
        "prop2",
        params(&[
            ("instances", p.instances.to_string()),
            ("max_directions", p.max_directions.to_string()),
            ("max_count", p.max_count.to_string()),
            ("seed", p.seed.to_string()),
        ]),
        vec![
            CheckResult::new("kl_gap_nonnegative", p.instances, negativity.max(0.0), 0.0),
            CheckResult::new(
                "zero_gap_when_balanced",
                equal_instances,
                equal_gap,
                p.tolerance,
            ),
            CheckResult::new(
                "positive_gap_when_unbalanced",
                p.instances - equal_instances,
                unequal_zero as f64,
                0.0,
            ),
            CheckResult::new("log_utility_identity", p.instances, identity, p.tolerance),
            CheckResult::new("worked_case_k3_1", 1, worked_dev, 1e-5),
        ],
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Params {
    pub instances: usize,
    pub max_directions: usize,
    pub max_count: usize,
    pub similarity_temperature: f64,
    pub max_cross_cosine: f64,
    pub embedding_dim: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for Theorem1Params {
    fn default() -> Self {
        Self {
            instances: 100,
            max_directions: 5,
            max_count: 8,
            similarity_temperature: 1e-3,
            max_cross_cosine: 0.9,
            embedding_dim: 8,
            tolerance: 1e-3,
            seed: DEFAULT_SEED,
        }
    }
}

/// Candidates in ideal clusters: identical embeddings and scores within a direction.
pub fn clustered_set(
    counts: &[usize],
    scores: &[f64],
    centroids: &[Vec<f64>],
    budget: usize,
) -> CandidateSet {
    let mut candidates = Vec::new();
    for (j, &k) in counts.iter().enumerate() {
        for _ in 0..k {
            let id = candidates.len() as u64;
            candidates.push(
                Trajectory::scored(id, scores[j])
                    .with_direction(j)
                    .with_embedding(centroids[j].clone()),
            );
        }
    }
    CandidateSet::new(candidates, budget)
}

/// Largest per-direction gap between DORA's weight mass and the direction-level softmax.
pub fn direction_recovery_error(
    counts: &[usize],
    scores: &[f64],
    centroids: &[Vec<f64>],
    similarity_temperature: f64,
) -> Result<f64> {
    let set = clustered_set(counts, scores, centroids, 1);
    // Direction-level softmax is at temperature 1, so the reward temperature matches.
    let w = dora_weights(&set, 1.0, similarity_temperature)?;
    let mut mass = vec![0.0; counts.len()];
    for (c, wi) in set.candidates.iter().zip(&w) {
        mass[c.direction_id.expect("clustered")] += wi;
    }
    let grouping = DirectionGrouping::from_counts(counts.to_vec(), scores.to_vec())?;
    let q = dora::optimal_direction_distribution(&grouping)?;
    Ok(mass
        .iter()
        .zip(&q)
        .map(|(m, q)| (m - q).abs())
        .fold(0.0, f64::max))
}

/// DORA recovers the direction-level optimum on separated clusters, and reduces to
/// REBASE whenever every uniqueness value is equal.
pub fn verify_theorem1(p: &Theorem1Params) -> Result<VerificationReport> {
    let separation = (1.0 - p.max_cross_cosine) / p.similarity_temperature;
    if separation < 1e6f64.ln() {
        return Err(config(format!(
            "cluster separation exp({separation:.3}) is below 1e6; lower the similarity temperature"
        )));
    }
    let mut rng = claim_stream(p.seed, 5);
    let mut worst = 0.0f64;

    let fixed: [(Vec<usize>, Vec<f64>); 3] = [
        (vec![3, 1], vec![1.0, 1.0]),
        (vec![5, 2, 1], vec![0.0, 2f64.ln(), 4f64.ln()]),
        (vec![4], vec![0.3]),
    ];
    for (counts, scores) in &fixed {
        let c = separated_centroids(counts.len(), p.embedding_dim, p.max_cross_cosine, &mut rng)?;
        worst = worst.max(direction_recovery_error(
            counts,
            scores,
            &c,
            p.similarity_temperature,
        )?);
    }
    for _ in 0..p.instances {
        let g = rng.random_range(1..=p.max_directions);
        let counts: Vec<usize> = (0..g).map(|_| rng.random_range(1..=p.max_count)).collect();
        let scores: Vec<f64> = (0..g).map(|_| rng.random_range(0.0..1.0)).collect();
        let c = separated_centroids(g, p.embedding_dim, p.max_cross_cosine, &mut rng)?;
        worst = worst.max(direction_recovery_error(
            &counts,
            &scores,
            &c,
            p.similarity_temperature,
        )?);
    }

    let mismatches = reduction_mismatches(p.instances, &mut rng)?;

    Ok(VerificationReport::new(
        "theorem1",
        params(&[
            ("instances", p.instances.to_string()),
            (
                "similarity_temperature",
                p.similarity_temperature.to_string(),
            ),
            ("max_cross_cosine", p.max_cross_cosine.to_string()),
            ("seed", p.seed.to_string()),
        ]),
        vec![
            CheckResult::new(
                "direction_mass_matches_optimum",
                p.instances + fixed.len(),
                worst,
                p.tolerance,
            ),
            CheckResult::new(
                "equal_uniqueness_reduces_to_rebase",
                2 * p.instances,
                mismatches as f64,
                0.0,
            ),
        ],
    ))
}

/// Counts score vectors where DORA and REBASE disagree although all γ are equal,
/// using all-identical and all-orthogonal embeddings for each vector.
pub fn reduction_mismatches<R: Rng>(instances: usize, rng: &mut R) -> Result<usize> {
    let mut mismatches = 0;
    for _ in 0..instances {
        let k = rng.random_range(1..=12);
        let n = rng.random_range(0..=200);
        let scores: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let shared = separated_centroids(1, 4, 0.0, rng)?.remove(0);
        let orthogonal: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                let mut v = vec![0.0; k];
                v[i] = 1.0;
                v
            })
            .collect();
        for embeddings in [vec![shared; k], orthogonal] {
            let set = CandidateSet::new(
                scores
                    .iter()
                    .zip(embeddings)
                    .enumerate()
                    .map(|(i, (&s, e))| Trajectory::scored(i as u64, s).with_embedding(e))
                    .collect(),
                n,
            );
            let gamma = dora::uniqueness(&set, 0.01)?;
            debug_assert!(gamma.windows(2).all(|w| w[0] == w[1]));
            if allocate_dora(&set, 0.1, 0.01)? != allocate_rebase(&set, 0.1)? {
                mismatches += 1;
            }
        }
    }
    Ok(mismatches)
}

/// One row of a strategy comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strategy: StrategyKind,
    pub budget: usize,
    pub trials: usize,
    pub accuracy: MetricSummary,
    pub pass_rate: MetricSummary,
    pub coverage: MetricSummary,
    pub abstentions: usize,
    pub mean_pool_size: f64,
    #[serde(skip)]
    pub report: Option<TrialReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub seed: u64,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, strategy: StrategyKind, budget: usize) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|r| r.strategy == strategy && r.budget == budget)
    }

    /// Mean and bootstrap interval of the paired per-trial accuracy difference `a − b`.
    pub fn paired_accuracy_difference(
        &self,
        a: StrategyKind,
        b: StrategyKind,
        budget: usize,
    ) -> Option<MetricSummary> {
        let ra = self.row(a, budget)?.report.as_ref()?;
        let rb = self.row(b, budget)?.report.as_ref()?;
        let diffs: Vec<f64> = ra
            .accuracy_samples()
            .iter()
            .zip(rb.accuracy_samples())
            .map(|(x, y)| x - y)
            .collect();
        let seed = rng::derive_seed(self.seed, &[domain::BOOTSTRAP, budget as u64, 99]);
        Some(MetricSummary::from_samples(&diffs, seed))
    }
}

/// Runs every strategy at every budget over the same seeded environment instances.
///
/// Trial `t` uses the same environment and the same root draws for every strategy and
/// budget, so per-trial differences are paired.
pub fn compare_strategies(cfg: &ExperimentConfig) -> Result<ComparisonTable> {
    cfg.validate()?;
    let env_spec = cfg.env.clone();
    let make_env = |seed: u64| SimEnv::generate(&env_spec, rng::derive_seed(seed, &[domain::ENV]));
    let mut rows = Vec::new();
    for &budget in &cfg.budgets {
        for &kind in &cfg.strategies {
            let search = cfg.search_config(kind, budget);
            let report = run_trials(&search, make_env, cfg.trials)?;
            rows.push(ComparisonRow {
                strategy: kind,
                budget,
                trials: report.trials,
                accuracy: report.accuracy,
                pass_rate: report.pass_rate,
                coverage: report.coverage,
                abstentions: report.abstentions,
                mean_pool_size: report.mean_pool_size,
                report: Some(report),
            });
        }
    }
    Ok(ComparisonTable {
        seed: cfg.seed,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassRateCalibration {
    pub target: f64,
    pub solutions: usize,
    pub pass_rate: f64,
    pub standard_error: f64,
}

/// Pooled pass rate of temperature sampling in a single-direction environment.
pub fn pass_rate_calibration(
    success: f64,
    min_solutions: usize,
    budget: usize,
    seed: u64,
) -> Result<PassRateCalibration> {
    let spec = EnvSpec::single_direction(success);
    let mut search = SearchConfig::new(
        budget,
        spec.max_depth,
        crate::StrategySpec::new(StrategyKind::Temperature),
    );
    search.seed = seed;
    // Every chain completes by max_depth, so each trial pools exactly `budget` solutions.
    let trials = min_solutions.div_ceil(budget);
    let report = run_trials(&search, |s| SimEnv::generate(&spec, s), trials)?;
    let solutions: usize = report.outcomes.iter().map(|o| o.pool_size).sum();
    let correct: f64 = report
        .outcomes
        .iter()
        .map(|o| o.pass_rate * o.pool_size as f64)
        .sum();
    let rate = correct / solutions as f64;
    Ok(PassRateCalibration {
        target: success,
        solutions,
        pass_rate: rate,
        standard_error: (rate * (1.0 - rate) / solutions as f64).sqrt(),
    })
}
