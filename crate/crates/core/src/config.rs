//! Experiment configuration: one search setup, an environment and a strategy grid.
//!
//! The struct is format-agnostic; the CLI reads it from TOML.

use serde::{Deserialize, Serialize};

use crate::allocators::{
    StrategyKind, StrategySpec, DEFAULT_BEAM_WIDTH, DEFAULT_CONCENTRATION,
    DEFAULT_REWARD_TEMPERATURE, DEFAULT_SIMILARITY_TEMPERATURE,
};
use crate::engine::{BudgetMode, SearchConfig};
use crate::error::{config, Result};
use crate::simenv::EnvSpec;
use crate::voting::VoteSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_budgets")]
    pub budgets: Vec<usize>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyKind>,
    #[serde(default = "default_max_steps")]
    pub max_steps: u32,
    #[serde(default)]
    pub vote: VoteSpec,
    #[serde(default)]
    pub budget_mode: BudgetMode,
    #[serde(default = "default_beam_width")]
    pub beam_width: usize,
    #[serde(default = "default_reward_temperature")]
    pub reward_temperature: f64,
    #[serde(default = "default_similarity_temperature")]
    pub similarity_temperature: f64,
    #[serde(default = "default_concentration")]
    pub concentration: f64,
    pub env: EnvSpec,
}

fn default_trials() -> usize {
    100
}

fn default_budgets() -> Vec<usize> {
    vec![16, 32, 64]
}

fn default_strategies() -> Vec<StrategyKind> {
    vec![
        StrategyKind::Temperature,
        StrategyKind::Beam,
        StrategyKind::Dvts,
        StrategyKind::Rebase,
        StrategyKind::Dora,
    ]
}

fn default_max_steps() -> u32 {
    12
}

fn default_beam_width() -> usize {
    DEFAULT_BEAM_WIDTH
}

fn default_reward_temperature() -> f64 {
    DEFAULT_REWARD_TEMPERATURE
}

fn default_similarity_temperature() -> f64 {
    DEFAULT_SIMILARITY_TEMPERATURE
}

fn default_concentration() -> f64 {
    DEFAULT_CONCENTRATION
}

impl ExperimentConfig {
    /// The bundled imbalanced benchmark with every other setting at its default.
    pub fn benchmark() -> Self {
        Self {
            seed: 0,
            trials: default_trials(),
            budgets: default_budgets(),
            strategies: default_strategies(),
            max_steps: default_max_steps(),
            vote: VoteSpec::default(),
            budget_mode: BudgetMode::default(),
            beam_width: DEFAULT_BEAM_WIDTH,
            reward_temperature: DEFAULT_REWARD_TEMPERATURE,
            similarity_temperature: DEFAULT_SIMILARITY_TEMPERATURE,
            concentration: DEFAULT_CONCENTRATION,
            env: EnvSpec::imbalanced_benchmark(),
        }
    }

    pub fn strategy_spec(&self, kind: StrategyKind) -> StrategySpec {
        StrategySpec {
            kind,
            beam_width: self.beam_width,
            reward_temperature: self.reward_temperature,
            similarity_temperature: self.similarity_temperature,
            concentration: self.concentration,
        }
    }

    pub fn strategy_specs(&self) -> Vec<StrategySpec> {
        self.strategies
            .iter()
            .map(|&k| self.strategy_spec(k))
            .collect()
    }

    pub fn search_config(&self, kind: StrategyKind, budget: usize) -> SearchConfig {
        SearchConfig {
            budget,
            max_steps: self.max_steps,
            strategy: self.strategy_spec(kind),
            vote: self.vote,
            budget_mode: self.budget_mode,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(config("trials must be at least 1"));
        }
        if self.budgets.is_empty() || self.budgets.contains(&0) {
            return Err(config(
                "budgets must be a non-empty list of positive integers",
            ));
        }
        if self.strategies.is_empty() {
            return Err(config("at least one strategy is required"));
        }
        if self.max_steps == 0 {
            return Err(config("max_steps must be at least 1"));
        }
        for spec in self.strategy_specs() {
            spec.validate().map_err(|e| config(e.to_string()))?;
        }
        self.env.validate()
    }
}
