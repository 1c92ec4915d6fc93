//! Synthetic ground-truth environment with latent reasoning directions.
//!
//! Every trajectory lives in one of `g` directions. A completed solution in direction
//! `j` is correct with probability `p_j`. The scorer reports `p_j` plus frozen Gaussian
//! noise and the embedder reports the direction centroid plus frozen Gaussian noise,
//! so correctness, pass rates and allocation quality can all be measured exactly.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::engine::Policy;
use crate::error::{config, usage, Result};
use crate::rng::{self, domain, StreamRng};
use crate::types::{Answer, Trajectory};

/// Attempts per centroid before falling back to orthogonalization.
const CENTROID_ATTEMPTS: usize = 2_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    pub num_directions: usize,
    /// Probability that a completed solution in each direction is correct.
    pub direction_success: Vec<f64>,
    /// Distribution of root trajectories over directions.
    pub initial_direction_weights: Vec<f64>,
    /// Probability a child keeps its parent's direction.
    pub stay_probability: f64,
    /// Per-step completion probability.
    pub completion_probability: f64,
    /// Depth at which a trajectory is forced to complete.
    pub max_depth: u32,
    pub score_noise: f64,
    pub embedding_dim: usize,
    /// Upper bound on the pairwise cosine between direction centroids.
    pub max_cross_cosine: f64,
    pub embedding_noise: f64,
}

impl EnvSpec {
    /// Four directions where the best one (p = 0.8) starts with only 10% of the roots.
    pub fn imbalanced_benchmark() -> Self {
        Self {
            num_directions: 4,
            direction_success: vec![0.8, 0.3, 0.3, 0.2],
            initial_direction_weights: vec![0.1, 0.3, 0.3, 0.3],
            stay_probability: 0.95,
            completion_probability: 0.25,
            max_depth: 12,
            score_noise: 0.15,
            embedding_dim: 16,
            max_cross_cosine: 0.2,
            embedding_noise: 0.05,
        }
    }

    /// One direction with success probability `p` and noiseless signals.
    pub fn single_direction(p: f64) -> Self {
        Self {
            num_directions: 1,
            direction_success: vec![p],
            initial_direction_weights: vec![1.0],
            stay_probability: 1.0,
            completion_probability: 0.25,
            max_depth: 12,
            score_noise: 0.0,
            embedding_dim: 2,
            max_cross_cosine: 0.0,
            embedding_noise: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.num_directions;
        if g == 0 {
            return Err(config("num_directions must be at least 1"));
        }
        if self.direction_success.len() != g || self.initial_direction_weights.len() != g {
            return Err(config(format!(
                "direction_success and initial_direction_weights need {g} entries"
            )));
        }
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        for &p in &self.direction_success {
            unit("direction_success", p)?;
        }
        for &w in &self.initial_direction_weights {
            unit("initial_direction_weights", w)?;
        }
        let total: f64 = self.initial_direction_weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(config(format!(
                "initial_direction_weights must sum to 1, got {total}"
            )));
        }
        unit("stay_probability", self.stay_probability)?;
        if !(self.completion_probability > 0.0 && self.completion_probability <= 1.0) {
            return Err(config("completion_probability must lie in (0, 1]"));
        }
        if self.max_depth == 0 {
            return Err(config("max_depth must be at least 1"));
        }
        if !(self.score_noise >= 0.0 && self.score_noise.is_finite()) {
            return Err(config("score_noise must be a finite non-negative number"));
        }
        if !(self.embedding_noise >= 0.0 && self.embedding_noise.is_finite()) {
            return Err(config(
                "embedding_noise must be a finite non-negative number",
            ));
        }
        if self.embedding_dim < 2 {
            return Err(config("embedding_dim must be at least 2"));
        }
        if !(0.0..1.0).contains(&self.max_cross_cosine) {
            return Err(config("max_cross_cosine must lie in [0, 1)"));
        }
        Ok(())
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn random_unit<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if v.iter().map(|x| x * x).sum::<f64>() > 1e-12 {
            normalize(&mut v);
            return v;
        }
    }
}

/// `count` unit vectors in `dim` dimensions with pairwise cosine at most `max_cosine`.
///
/// Draws uniformly on the sphere with rejection; if that stalls and `dim >= count`, the
/// draws are Gram-Schmidt orthogonalized instead. A bound of zero always yields an
/// orthonormal set.
pub fn separated_centroids<R: Rng>(
    count: usize,
    dim: usize,
    max_cosine: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if max_cosine == 0.0 && dim >= count {
        return Ok(orthonormal(count, dim, rng));
    }
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(count);
    'outer: while centroids.len() < count {
        for _ in 0..CENTROID_ATTEMPTS {
            let v = random_unit(dim, rng);
            if centroids.iter().all(|c| dot(c, &v) <= max_cosine) {
                centroids.push(v);
                continue 'outer;
            }
        }
        if dim < count {
            return Err(config(format!(
                "cannot place {count} centroids in {dim} dimensions with cosine <= {max_cosine}"
            )));
        }
        return Ok(orthonormal(count, dim, rng));
    }
    Ok(centroids)
}

fn orthonormal<R: Rng>(count: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v = random_unit(dim, rng);
        for b in &basis {
            let proj = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        if v.iter().map(|x| x * x).sum::<f64>() > 1e-6 {
            normalize(&mut v);
            basis.push(v);
        }
    }
    basis
}

/// A generated environment instance; immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEnv {
    spec: EnvSpec,
    seed: u64,
    centroids: Vec<Vec<f64>>,
    gold: Answer,
    distractors: Vec<Answer>,
}

impl SimEnv {
    /// Builds an instance: centroids, the global gold answer and one distractor per direction.
    pub fn generate(spec: &EnvSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng::stream(seed, &[domain::ENV]);
        let centroids = separated_centroids(
            spec.num_directions,
            spec.embedding_dim,
            spec.max_cross_cosine,
            &mut rng,
        )?;
        Ok(Self {
            spec: spec.clone(),
            seed,
            centroids,
            gold: Answer(0),
            distractors: (1..=spec.num_directions as u64).map(Answer).collect(),
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn gold_answer(&self) -> Answer {
        self.gold
    }

    pub fn distractor(&self, direction: usize) -> Answer {
        self.distractors[direction]
    }

    fn next_direction(&self, parent: &Trajectory, rng: &mut StreamRng) -> usize {
        let g = self.spec.num_directions;
        match parent.direction_id {
            None => WeightedIndex::new(&self.spec.initial_direction_weights)
                .expect("validated weights")
                .sample(rng),
            Some(d) => {
                let stay = rng.random::<f64>() < self.spec.stay_probability;
                if stay || g == 1 {
                    d
                } else {
                    // uniform over the other g - 1 directions
                    let r = rng.random_range(0..g - 1);
                    if r >= d {
                        r + 1
                    } else {
                        r
                    }
                }
            }
        }
    }
}

impl Policy for SimEnv {
    fn step(&self, parent: &Trajectory, child_id: u64, rng: &mut StreamRng) -> Result<Trajectory> {
        if parent.complete {
            return Err(usage(format!(
                "trajectory {} is already complete",
                parent.id
            )));
        }
        if parent.step_count >= self.spec.max_depth {
            return Err(usage(format!(
                "trajectory {} is at the maximum depth",
                parent.id
            )));
        }
        let mut child = parent.child(child_id);
        let direction = self.next_direction(parent, rng);
        child.direction_id = Some(direction);
        let done = rng.random::<f64>() < self.spec.completion_probability
            || child.step_count >= self.spec.max_depth;
        if done {
            let correct = rng.random::<f64>() < self.spec.direction_success[direction];
            let answer = if correct {
                self.gold
            } else {
                self.distractors[direction]
            };
            child = child.completed(answer);
        }
        Ok(child)
    }

    fn score(&self, trajectory: &Trajectory) -> f64 {
        let j = trajectory
            .direction_id
            .expect("scored trajectories have a direction");
        let p = self.spec.direction_success[j];
        if self.spec.score_noise == 0.0 {
            return p;
        }
        let mut rng = rng::stream(self.seed, &[domain::NODE_SCORE, trajectory.id]);
        let z: f64 = rng.sample(StandardNormal);
        (p + self.spec.score_noise * z).clamp(0.0, 1.0)
    }

    fn embed(&self, trajectory: &Trajectory) -> Option<Vec<f64>> {
        let j = trajectory.direction_id?;
        let centroid = &self.centroids[j];
        if self.spec.embedding_noise == 0.0 {
            return Some(centroid.clone());
        }
        let mut rng = rng::stream(self.seed, &[domain::NODE_EMBED, trajectory.id]);
        let mut v: Vec<f64> = centroid
            .iter()
            .map(|c| c + self.spec.embedding_noise * rng.sample::<f64, _>(StandardNormal))
            .collect();
        normalize(&mut v);
        Some(v)
    }

    fn gold(&self) -> Option<Answer> {
        Some(self.gold)
    }
}
