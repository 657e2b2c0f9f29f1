//! One reinforcement step: act, observe, learn.
//!
//! The state is the [`IndexStore`]; an action is a ranked [`MqList`]; the
//! reward of a step is the net change of the store's total RIV caused by the
//! feedback it received.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{IndexError, IndexStore, ObjectId, TermId};
use crate::policy::{
    choose_oa_size, compose_mq, construct_oa, order_mq, sample_ob_excluding, BetaPolicy,
    MqList, OrderingStrategy, PolicyError,
};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("a query needs at least one term")]
    EmptyQuery,
    #[error("term {0} appears twice in the query")]
    DuplicateTerm(TermId),
    #[error("clicked object {0} was not presented")]
    NotPresented(ObjectId),
    #[error("object {0} clicked twice")]
    DuplicateClick(ObjectId),
    #[error("the store has no objects to present")]
    NoObjects,
    #[error("invalid engine config: {0}")]
    Config(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// A non-empty list of distinct terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Query {
    terms: Vec<TermId>,
}

impl Query {
    pub fn new(terms: Vec<TermId>) -> Result<Self, EngineError> {
        if terms.is_empty() {
            return Err(EngineError::EmptyQuery);
        }
        let mut seen = HashSet::with_capacity(terms.len());
        for t in &terms {
            if !seen.insert(*t) {
                return Err(EngineError::DuplicateTerm(*t));
            }
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[TermId] {
        &self.terms
    }
}

/// Objects the user clicked, a subset of what was presented.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Feedback {
    pub clicked: Vec<ObjectId>,
}

impl Feedback {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn clicks(clicked: Vec<ObjectId>) -> Self {
        Self { clicked }
    }

    pub fn is_empty(&self) -> bool {
        self.clicked.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RivDelta {
    pub term: TermId,
    pub object: ObjectId,
    /// Net change of the pair, including its creation at `r_init`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardSignal {
    pub deltas: Vec<RivDelta>,
    pub total: f64,
    /// Pairs that crossed into the index pool during this step.
    pub promoted: Vec<(TermId, ObjectId)>,
    /// Pairs that fell back below the threshold.
    pub demoted: Vec<(TermId, ObjectId)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Answer list length `M`.
    pub m: usize,
    pub beta_policy: BetaPolicy,
    pub ordering: OrderingStrategy,
    /// Reinforcement weight per click.
    pub weight: f64,
    /// Multiplier on the penalty applied when nothing is clicked.
    pub penalty_scale: f64,
    /// Discount factor. Carried as metadata; the fixed strategy never discounts.
    pub gamma: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            m: 10,
            beta_policy: BetaPolicy::Deterministic(0.8),
            ordering: OrderingStrategy::NonRandom,
            weight: 1.0,
            penalty_scale: 1.0,
            gamma: 0.9,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.m == 0 {
            return Err(EngineError::Config("m must be at least 1".into()));
        }
        self.beta_policy.validate(self.m)?;
        if !(self.weight > 0.0 && self.weight <= 1.0) {
            return Err(EngineError::Config(format!("weight {} outside (0, 1]", self.weight)));
        }
        if !(self.penalty_scale >= 0.0 && self.penalty_scale.is_finite()) {
            return Err(EngineError::Config(format!(
                "penalty_scale {} must be a non-negative real",
                self.penalty_scale
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(EngineError::Config(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        Ok(())
    }
}

/// The environment's response to a presented list.
pub trait ClickModel {
    fn respond<R: Rng + ?Sized>(&mut self, presented: &MqList, query: &Query, rng: &mut R) -> Feedback;
}

impl<F> ClickModel for F
where
    F: FnMut(&MqList, &Query) -> Feedback,
{
    fn respond<R: Rng + ?Sized>(&mut self, presented: &MqList, query: &Query, _rng: &mut R) -> Feedback {
        self(presented, query)
    }
}

/// Builds and ranks an answer list for `query`.
///
/// When the store holds fewer than `M` objects, all of them are returned.
pub fn select_action<R: Rng + ?Sized>(
    store: &IndexStore,
    query: &Query,
    cfg: &EngineConfig,
    rng: &mut R,
) -> Result<MqList, EngineError> {
    let population = store.object_count();
    if population == 0 {
        return Err(EngineError::NoObjects);
    }
    if population < cfg.m {
        log::warn!("store has {population} objects, fewer than M = {}", cfg.m);
    }
    let m = cfg.m.min(population);
    let beta = cfg.beta_policy.draw(rng);
    let k = choose_oa_size(beta, m)?;
    let oa = construct_oa(store, query.terms(), k);
    let excluded: HashSet<ObjectId> = oa.iter().copied().collect();
    let ob = sample_ob_excluding(rng, store.objects(), &excluded, m - oa.len())?;
    let mq = compose_mq(&oa, &ob)?;
    Ok(order_mq(&mq, cfg.ordering, store, query.terms(), rng)?)
}

/// Applies a user's feedback to the store and reports the reward.
///
/// Clicked objects are reinforced on every query term. An empty feedback
/// penalizes every presented object on every query term by
/// `penalty_scale * weight * R`; pairs that do not exist are skipped.
pub fn apply_feedback(
    store: &mut IndexStore,
    query: &Query,
    presented: &MqList,
    feedback: &Feedback,
    cfg: &EngineConfig,
) -> Result<RewardSignal, EngineError> {
    let mut seen = HashSet::with_capacity(feedback.clicked.len());
    for o in &feedback.clicked {
        if !presented.contains(*o) {
            return Err(EngineError::NotPresented(*o));
        }
        if !seen.insert(*o) {
            return Err(EngineError::DuplicateClick(*o));
        }
    }

    let mut reward = RewardSignal::default();
    let r_init = store.r_init();
    if !feedback.is_empty() {
        for &object in &feedback.clicked {
            for &term in query.terms() {
                let up = store.reinforce(term, object, cfg.weight)?;
                record(&mut reward, term, object, up.total_change(r_init), up.promoted(), up.demoted());
            }
        }
    } else {
        let amount = cfg.penalty_scale * cfg.weight * store.relevance_base();
        for object in presented.objects() {
            for &term in query.terms() {
                let up = store.penalize_by(term, object, amount);
                if up.before == crate::index::IndexClass::Absent {
                    continue;
                }
                record(&mut reward, term, object, up.delta, up.promoted(), up.demoted());
            }
        }
    }
    reward.total = reward.deltas.iter().map(|d| d.delta).sum();
    Ok(reward)
}

fn record(reward: &mut RewardSignal, term: TermId, object: ObjectId, delta: f64, promoted: bool, demoted: bool) {
    reward.deltas.push(RivDelta { term, object, delta });
    if promoted {
        reward.promoted.push((term, object));
    }
    if demoted {
        reward.demoted.push((term, object));
    }
}

/// The outcome of one full interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub presented: MqList,
    pub feedback: Feedback,
    pub reward: RewardSignal,
}

/// `select_action`, then the click model, then `apply_feedback`.
pub fn run_episode<R: Rng + ?Sized, C: ClickModel + ?Sized>(
    store: &mut IndexStore,
    query: &Query,
    cfg: &EngineConfig,
    click_model: &mut C,
    rng: &mut R,
) -> Result<Episode, EngineError> {
    let presented = select_action(store, query, cfg, rng)?;
    let feedback = click_model.respond(&presented, query, rng);
    let reward = apply_feedback(store, query, &presented, &feedback, cfg)?;
    Ok(Episode {
        presented,
        feedback,
        reward,
    })
}

/// A store bundled with the configuration that drives it.
#[derive(Debug, Clone)]
pub struct Engine {
    pub store: IndexStore,
    pub config: EngineConfig,
}

impl Engine {
    pub fn new(store: IndexStore, config: EngineConfig) -> Result<Self, EngineError> {
        config.validate()?;
        Ok(Self { store, config })
    }

    pub fn select<R: Rng + ?Sized>(&self, query: &Query, rng: &mut R) -> Result<MqList, EngineError> {
        select_action(&self.store, query, &self.config, rng)
    }

    pub fn learn(
        &mut self,
        query: &Query,
        presented: &MqList,
        feedback: &Feedback,
    ) -> Result<RewardSignal, EngineError> {
        apply_feedback(&mut self.store, query, presented, feedback, &self.config)
    }

    pub fn episode<R: Rng + ?Sized, C: ClickModel + ?Sized>(
        &mut self,
        query: &Query,
        click_model: &mut C,
        rng: &mut R,
    ) -> Result<Episode, EngineError> {
        run_episode(&mut self.store, query, &self.config, click_model, rng)
    }
}
