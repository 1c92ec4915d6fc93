//! Rollout budget allocation for parallel test-time search.
//!
//! The crate is organized bottom-up:
//!
//! * [`types`] and [`weights`]: shared domain data, softmax weighting and exact
//!   largest-remainder apportionment.
//! * [`bayes`]: the Beta-prior failure model and its exact greedy optimal allocator.
//! * [`allocators`]: temperature sampling, beam search, DVTS, REBASE and the
//!   strategy dispatcher.
//! * [`dora`]: direction-oriented allocation via semantic soft clustering, plus the
//!   direction-level allocation formulas and their KL gap.
//! * [`voting`]: answer aggregation over completed solutions.
//! * [`engine`]: the round-based parallel search loop and seeded trial harness.
//! * [`simenv`]: a synthetic environment with known per-direction success rates.
//! * [`analysis`]: numerical verification drivers and strategy comparison tables.
//! * [`trace`] and [`config`]: the on-disk trace and experiment config formats.

pub mod allocators;
pub mod analysis;
pub mod bayes;
pub mod config;
pub mod dora;
pub mod engine;
mod error;
pub mod rng;
pub mod simenv;
pub mod stats;
pub mod trace;
pub mod types;
pub mod voting;
pub mod weights;

pub use allocators::{allocate, StrategyKind, StrategySpec};
pub use error::{Error, Result};
pub use types::{
    AllocationVector, Answer, CandidateSet, DirectionGrouping, SearchMetrics, SearchResult,
    Trajectory,
};
pub use voting::{vote, VoteSpec};
pub use weights::{apportion, softmax_weights};
