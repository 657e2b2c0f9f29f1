//! Reinforcement-driven dynamic indexing.
//!
//! An [`IndexStore`] holds term/object relevance links whose values grow with
//! clicks and shrink with penalties; links above a threshold are *explored*.
//! The [`engine`] answers queries with a mix of exploited and explored
//! objects, the [`sim`] module plays the users, and the [`harness`] runs
//! seeded experiments whose convergence is checked against the pure-death
//! model in [`oracle`].

pub mod config;
pub mod engine;
pub mod harness;
pub mod index;
pub mod oracle;
pub mod policy;
pub mod sim;

pub use engine::{
    apply_feedback, run_episode, select_action, ClickModel, Engine, EngineConfig, EngineError,
    Episode, Feedback, Query, RewardSignal, RivDelta,
};
pub use harness::{
    compare_with_theory, detect_convergence, emit_outputs, run_monte_carlo, run_trial,
    EnsembleReport, ExperimentConfig, HarnessError, Mode,
};
pub use index::{
    IndexClass, IndexError, IndexParams, IndexStore, ObjectId, RivUpdate, Scope, TermId, TorTuple,
};
pub use oracle::{
    estimate_alpha, expected_remaining, exposure_proportion, pure_death_oracle,
    time_to_proportion, variance_remaining, AlphaEstimate, DeathModel, Trajectory,
};
pub use policy::{BetaPolicy, MqEntry, MqList, OrderingStrategy, Provenance};
pub use sim::{simulate_click, GroundTruth, QueryGenerator};
