//! Evolutionary exploration strategies.
//!
//! An answer list is the union of an exploit set (the top objects by
//! cumulative RIV over the query terms) and an explore set drawn uniformly
//! without replacement from everything else. The exploit share is `beta`;
//! the exploit set holds `floor(beta * M + 1/2)` objects. The list is then
//! ranked by one of four [`OrderingStrategy`] variants.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{IndexStore, ObjectId, TermId};

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("list length must be at least 1")]
    ZeroLength,
    #[error("beta {0} is outside [0, 1]")]
    BetaOutOfRange(f64),
    #[error("beta {beta} is not on the grid k/{m}")]
    BetaOffGrid { beta: f64, m: usize },
    #[error("cannot draw {count} objects from {available} candidates")]
    NotEnoughCandidates { count: usize, available: usize },
    #[error("object {0} is in both the exploit and the explore set")]
    Overlap(ObjectId),
    #[error("object {0} appears twice")]
    Duplicate(ObjectId),
    #[error("cannot order an empty list")]
    Empty,
    #[error("unknown ordering strategy {0:?}")]
    UnknownOrdering(String),
}

/// How the exploit share is chosen per query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BetaPolicy {
    Deterministic(f64),
    /// A fresh `beta ~ Uniform(0, 1)` for every query.
    UniformRandom,
}

impl BetaPolicy {
    /// Checks that a deterministic beta lies on `{0, 1/m, ..., m/m}`.
    pub fn validate(&self, m: usize) -> Result<(), PolicyError> {
        if m == 0 {
            return Err(PolicyError::ZeroLength);
        }
        if let BetaPolicy::Deterministic(beta) = *self {
            if !(0.0..=1.0).contains(&beta) {
                return Err(PolicyError::BetaOutOfRange(beta));
            }
            let scaled = beta * m as f64;
            if (scaled - scaled.round()).abs() > 1e-9 {
                return Err(PolicyError::BetaOffGrid { beta, m });
            }
        }
        Ok(())
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            BetaPolicy::Deterministic(beta) => beta,
            BetaPolicy::UniformRandom => rng.random::<f64>(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingStrategy {
    /// Uniform permutation of the whole list.
    CompletelyRandom,
    /// Uniform within the exploit block, exploit block first.
    SectionallyRandom,
    /// Exploit block drawn proportionally to cumulative RIV, exploit first.
    PartiallyRandom,
    /// Exploit block sorted by cumulative RIV, exploit first.
    NonRandom,
}

impl OrderingStrategy {
    pub const ALL: [OrderingStrategy; 4] = [
        OrderingStrategy::CompletelyRandom,
        OrderingStrategy::SectionallyRandom,
        OrderingStrategy::PartiallyRandom,
        OrderingStrategy::NonRandom,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            OrderingStrategy::CompletelyRandom => "completely_random",
            OrderingStrategy::SectionallyRandom => "sectionally_random",
            OrderingStrategy::PartiallyRandom => "partially_random",
            OrderingStrategy::NonRandom => "non_random",
        }
    }

    /// Whether the strategy keeps every exploit entry ahead of every explore entry.
    pub fn keeps_blocks(&self) -> bool {
        !matches!(self, OrderingStrategy::CompletelyRandom)
    }
}

impl fmt::Display for OrderingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OrderingStrategy {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| PolicyError::UnknownOrdering(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exploit,
    Explore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MqEntry {
    pub object: ObjectId,
    pub provenance: Provenance,
    /// 1-based.
    pub rank: usize,
}

/// A ranked answer list.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MqList {
    entries: Vec<MqEntry>,
}

impl MqList {
    fn from_ordered(items: impl IntoIterator<Item = (ObjectId, Provenance)>) -> Self {
        let entries = items
            .into_iter()
            .enumerate()
            .map(|(i, (object, provenance))| MqEntry {
                object,
                provenance,
                rank: i + 1,
            })
            .collect();
        Self { entries }
    }

    pub fn entries(&self) -> &[MqEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn objects(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.entries.iter().map(|e| e.object)
    }

    pub fn contains(&self, object: ObjectId) -> bool {
        self.entries.iter().any(|e| e.object == object)
    }

    pub fn exploit(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.by_provenance(Provenance::Exploit)
    }

    pub fn explore(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.by_provenance(Provenance::Explore)
    }

    fn by_provenance(&self, p: Provenance) -> impl Iterator<Item = ObjectId> + '_ {
        self.entries
            .iter()
            .filter(move |e| e.provenance == p)
            .map(|e| e.object)
    }

    pub fn rank_of(&self, object: ObjectId) -> Option<usize> {
        self.entries.iter().find(|e| e.object == object).map(|e| e.rank)
    }
}

/// Size of the exploit set: `floor(beta * m + 1/2)`, clamped to `[0, m]`.
pub fn choose_oa_size(beta: f64, m: usize) -> Result<usize, PolicyError> {
    if m == 0 {
        return Err(PolicyError::ZeroLength);
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(PolicyError::BetaOutOfRange(beta));
    }
    let k = (beta * m as f64 + 0.5).floor();
    Ok((k.max(0.0) as usize).min(m))
}

fn by_score_then_id(a: &(ObjectId, f64), b: &(ObjectId, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// The `k` objects with the highest cumulative RIV over `terms`, best first,
/// ties broken by ascending id.
///
/// Objects with no link to any query term score zero and are filled in by
/// ascending id. Asking for more objects than the store knows returns all of
/// them.
pub fn construct_oa(store: &IndexStore, terms: &[TermId], k: usize) -> Vec<ObjectId> {
    if k > store.object_count() {
        log::warn!(
            "exploit set of {k} requested from {} objects; returning all",
            store.object_count()
        );
    }
    let k = k.min(store.object_count());
    if k == 0 {
        return Vec::new();
    }
    let mut scored: Vec<(ObjectId, f64)> = store
        .linked_scores(terms)
        .into_iter()
        .filter(|(_, score)| *score > 0.0)
        .collect();
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, by_score_then_id);
        scored.truncate(k);
    }
    scored.sort_unstable_by(by_score_then_id);
    let mut out: Vec<ObjectId> = scored.into_iter().map(|(o, _)| o).collect();
    if out.len() < k {
        let taken: HashSet<ObjectId> = out.iter().copied().collect();
        let fill = store
            .objects()
            .iter()
            .copied()
            .filter(|o| !taken.contains(o))
            .take(k - out.len());
        out.extend(fill.collect::<Vec<_>>());
    }
    out
}

/// Draws `count` distinct candidates uniformly without replacement.
///
/// The first pick is uniform over all `J` candidates, the next over the
/// remaining `J - 1`, and so on; the draw order is kept.
pub fn sample_ob<R: Rng + ?Sized>(
    rng: &mut R,
    candidates: &[ObjectId],
    count: usize,
) -> Result<Vec<ObjectId>, PolicyError> {
    if count > candidates.len() {
        return Err(PolicyError::NotEnoughCandidates {
            count,
            available: candidates.len(),
        });
    }
    let mut pool = candidates.to_vec();
    for i in 0..count {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(count);
    Ok(pool)
}

/// Same distribution as [`sample_ob`] over `population \ excluded`, without
/// materializing the candidate list when it is much larger than `count`.
///
/// `population` must be sorted ascending and free of duplicates.
pub fn sample_ob_excluding<R: Rng + ?Sized>(
    rng: &mut R,
    population: &[ObjectId],
    excluded: &HashSet<ObjectId>,
    count: usize,
) -> Result<Vec<ObjectId>, PolicyError> {
    let excluded_present = excluded
        .iter()
        .filter(|o| population.binary_search(o).is_ok())
        .count();
    let available = population.len() - excluded_present;
    if count > available {
        return Err(PolicyError::NotEnoughCandidates { count, available });
    }
    if available < 4 * count {
        let candidates: Vec<ObjectId> = population
            .iter()
            .copied()
            .filter(|o| !excluded.contains(o))
            .collect();
        return sample_ob(rng, &candidates, count);
    }
    // Rejection keeps each pick uniform over what is still eligible.
    let mut picked: Vec<ObjectId> = Vec::with_capacity(count);
    while picked.len() < count {
        let o = population[rng.random_range(0..population.len())];
        if !excluded.contains(&o) && !picked.contains(&o) {
            picked.push(o);
        }
    }
    Ok(picked)
}

/// Unions the exploit and explore sets, exploit entries first.
pub fn compose_mq(oa: &[ObjectId], ob: &[ObjectId]) -> Result<MqList, PolicyError> {
    let mut seen = HashSet::with_capacity(oa.len() + ob.len());
    for o in oa {
        if !seen.insert(*o) {
            return Err(PolicyError::Duplicate(*o));
        }
    }
    let oa_set = seen.clone();
    for o in ob {
        if oa_set.contains(o) {
            return Err(PolicyError::Overlap(*o));
        }
        if !seen.insert(*o) {
            return Err(PolicyError::Duplicate(*o));
        }
    }
    Ok(MqList::from_ordered(
        oa.iter()
            .map(|o| (*o, Provenance::Exploit))
            .chain(ob.iter().map(|o| (*o, Provenance::Explore))),
    ))
}

/// Successive draws without replacement, each proportional to its weight.
/// Falls back to a uniform pick once every remaining weight is zero.
fn proportional_order<R: Rng + ?Sized>(rng: &mut R, mut items: Vec<(ObjectId, f64)>) -> Vec<ObjectId> {
    let mut out = Vec::with_capacity(items.len());
    while !items.is_empty() {
        let total: f64 = items.iter().map(|(_, w)| *w).sum();
        let idx = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, (_, w)) in items.iter().enumerate() {
                acc += *w;
                if target < acc {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave target == acc at the very end
            chosen.unwrap_or_else(|| items.iter().rposition(|(_, w)| *w > 0.0).unwrap_or(0))
        } else {
            rng.random_range(0..items.len())
        };
        out.push(items.remove(idx).0);
    }
    out
}

/// Ranks a composed list.
///
/// The explore block keeps its incoming order (the draw order of the
/// sampler) under every strategy except [`OrderingStrategy::CompletelyRandom`].
pub fn order_mq<R: Rng + ?Sized>(
    mq: &MqList,
    strategy: OrderingStrategy,
    store: &IndexStore,
    terms: &[TermId],
    rng: &mut R,
) -> Result<MqList, PolicyError> {
    if mq.is_empty() {
        return Err(PolicyError::Empty);
    }
    let explore: Vec<ObjectId> = mq.explore().collect();
    let mut exploit: Vec<ObjectId> = mq.exploit().collect();
    let score = |o: ObjectId| {
        if terms.is_empty() {
            0.0
        } else {
            store.cumulative_riv_unchecked(terms, o)
        }
    };

    let ordered: Vec<(ObjectId, Provenance)> = match strategy {
        OrderingStrategy::CompletelyRandom => {
            let mut all: Vec<(ObjectId, Provenance)> =
                mq.entries().iter().map(|e| (e.object, e.provenance)).collect();
            all.shuffle(rng);
            return Ok(MqList::from_ordered(all));
        }
        OrderingStrategy::SectionallyRandom => {
            exploit.shuffle(rng);
            exploit.into_iter().map(|o| (o, Provenance::Exploit)).collect()
        }
        OrderingStrategy::PartiallyRandom => {
            let weighted = exploit.into_iter().map(|o| (o, score(o))).collect();
            proportional_order(rng, weighted)
                .into_iter()
                .map(|o| (o, Provenance::Exploit))
                .collect()
        }
        OrderingStrategy::NonRandom => {
            let mut scored: Vec<(ObjectId, f64)> =
                exploit.into_iter().map(|o| (o, score(o))).collect();
            scored.sort_by(by_score_then_id);
            scored.into_iter().map(|(o, _)| (o, Provenance::Exploit)).collect()
        }
    };
    Ok(MqList::from_ordered(
        ordered
            .into_iter()
            .chain(explore.into_iter().map(|o| (o, Provenance::Explore))),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::IndexParams;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn o(i: u32) -> ObjectId {
        ObjectId(i)
    }

    fn store_with_scores(scores: &[(u32, f64)]) -> IndexStore {
        let mut s = IndexStore::new(IndexParams::default()).unwrap();
        for (obj, score) in scores {
            s.register_object(o(*obj));
            if *score > 0.0 {
                s.set_riv(TermId(0), o(*obj), *score).unwrap();
            }
        }
        s
    }

    #[test]
    fn oa_size_rounds_half_down_at_exact_grid() {
        assert_eq!(choose_oa_size(1.0, 10), Ok(10));
        assert_eq!(choose_oa_size(0.5, 10), Ok(5));
        assert_eq!(choose_oa_size(0.44, 10), Ok(4));
        assert_eq!(choose_oa_size(0.45, 10), Ok(5));
        assert_eq!(choose_oa_size(0.0, 7), Ok(0));
        assert_eq!(choose_oa_size(0.5, 0), Err(PolicyError::ZeroLength));
        assert!(choose_oa_size(1.1, 3).is_err());
        assert!(choose_oa_size(f64::NAN, 3).is_err());
    }

    #[test]
    fn beta_policy_grid() {
        assert!(BetaPolicy::Deterministic(0.8).validate(10).is_ok());
        assert!(BetaPolicy::Deterministic(0.0).validate(10).is_ok());
        assert!(BetaPolicy::Deterministic(1.0 / 3.0).validate(3).is_ok());
        assert_eq!(
            BetaPolicy::Deterministic(0.25).validate(10),
            Err(PolicyError::BetaOffGrid { beta: 0.25, m: 10 })
        );
        assert!(BetaPolicy::UniformRandom.validate(10).is_ok());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let b = BetaPolicy::UniformRandom.draw(&mut rng);
            assert!((0.0..1.0).contains(&b));
        }
    }

    #[test]
    fn ordering_names_round_trip() {
        for s in OrderingStrategy::ALL {
            assert_eq!(s.as_str().parse::<OrderingStrategy>(), Ok(s));
        }
        assert!("random".parse::<OrderingStrategy>().is_err());
    }

    #[test]
    fn construct_oa_top_k() {
        let s = store_with_scores(&[(1, 5.0), (2, 2.0), (3, 4.0)]);
        assert_eq!(construct_oa(&s, &[TermId(0)], 2), vec![o(1), o(3)]);
        assert!(construct_oa(&s, &[TermId(0)], 0).is_empty());
    }

    #[test]
    fn construct_oa_ties_by_id() {
        let s = store_with_scores(&[(2, 3.0), (1, 3.0)]);
        assert_eq!(construct_oa(&s, &[TermId(0)], 1), vec![o(1)]);
    }

    #[test]
    fn construct_oa_fills_with_unscored_objects() {
        let s = store_with_scores(&[(5, 0.0), (3, 0.0), (9, 2.0), (1, 0.0)]);
        assert_eq!(construct_oa(&s, &[TermId(0)], 3), vec![o(9), o(1), o(3)]);
        // more than the population: everything, ranked
        assert_eq!(construct_oa(&s, &[TermId(0)], 10), vec![o(9), o(1), o(3), o(5)]);
    }

    #[test]
    fn sample_ob_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c: Vec<_> = (0..5).map(o).collect();
        let mut all = sample_ob(&mut rng, &c, 5).unwrap();
        all.sort();
        assert_eq!(all, c);
        assert!(sample_ob(&mut rng, &c, 0).unwrap().is_empty());
        assert_eq!(
            sample_ob(&mut rng, &c, 6),
            Err(PolicyError::NotEnoughCandidates { count: 6, available: 5 })
        );
    }

    fn pair_frequencies(draw: impl Fn(&mut ChaCha8Rng) -> Vec<ObjectId>) -> HashMap<(u32, u32), usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = HashMap::new();
        for _ in 0..100_000 {
            let mut d = draw(&mut rng);
            d.sort();
            *counts.entry((d[0].0, d[1].0)).or_insert(0) += 1;
        }
        counts
    }

    fn assert_uniform_pairs(counts: &HashMap<(u32, u32), usize>) {
        let n: f64 = 100_000.0;
        let p = 1.0 / 6.0;
        let sigma = (n * p * (1.0 - p)).sqrt();
        assert_eq!(counts.len(), 6);
        for (pair, c) in counts {
            let dev = (*c as f64 - n * p).abs();
            assert!(dev < 3.0 * sigma, "pair {pair:?}: {c} vs {}", n * p);
        }
    }

    #[test]
    fn sample_ob_pairs_uniform() {
        let c: Vec<_> = (0..4).map(o).collect();
        assert_uniform_pairs(&pair_frequencies(|rng| sample_ob(rng, &c, 2).unwrap()));
    }

    #[test]
    fn sample_ob_excluding_pairs_uniform() {
        // 40 objects, 36 excluded: exercises the materializing path
        let pop: Vec<_> = (0..40).map(o).collect();
        let excluded: HashSet<_> = (4..40).map(o).collect();
        assert_uniform_pairs(&pair_frequencies(|rng| {
            sample_ob_excluding(rng, &pop, &excluded, 2).unwrap()
        }));
    }

    #[test]
    fn sample_ob_excluding_rejection_path_uniform() {
        let pop: Vec<_> = (0..12).map(o).collect();
        let excluded: HashSet<_> = [o(3), o(7)].into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0usize; 12];
        let n = 60_000;
        for _ in 0..n {
            let d = sample_ob_excluding(&mut rng, &pop, &excluded, 2).unwrap();
            assert_ne!(d[0], d[1]);
            counts[d[0].0 as usize] += 1;
        }
        // first pick uniform over the 10 eligible objects
        let p = 0.1;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for (i, c) in counts.iter().enumerate() {
            if i == 3 || i == 7 {
                assert_eq!(*c, 0);
            } else {
                assert!((*c as f64 - n as f64 * p).abs() < 4.0 * sigma, "{i}: {c}");
            }
        }
    }

    #[test]
    fn compose_tags_provenance() {
        let mq = compose_mq(&[o(1)], &[o(2)]).unwrap();
        assert_eq!(mq.exploit().collect::<Vec<_>>(), vec![o(1)]);
        assert_eq!(mq.explore().collect::<Vec<_>>(), vec![o(2)]);
        let mq = compose_mq(&[], &[o(2), o(3)]).unwrap();
        assert!(mq.entries().iter().all(|e| e.provenance == Provenance::Explore));
        assert_eq!(compose_mq(&[o(1)], &[o(1)]), Err(PolicyError::Overlap(o(1))));
        assert_eq!(compose_mq(&[o(1), o(1)], &[]), Err(PolicyError::Duplicate(o(1))));
    }

    #[test]
    fn non_random_is_sorted_then_explore() {
        let s = store_with_scores(&[(1, 1.0), (2, 3.0), (3, 0.0)]);
        let mq = compose_mq(&[o(1), o(2)], &[o(3)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ranked = order_mq(&mq, OrderingStrategy::NonRandom, &s, &[TermId(0)], &mut rng).unwrap();
        assert_eq!(ranked.objects().collect::<Vec<_>>(), vec![o(2), o(1), o(3)]);
        assert_eq!(
            ranked.entries().iter().map(|e| e.rank).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
    }

    #[test]
    fn partially_random_top_pick_is_proportional() {
        let s = store_with_scores(&[(1, 3.0), (2, 1.0)]);
        let mq = compose_mq(&[o(1), o(2)], &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let first_a = (0..n)
            .filter(|_| {
                let r = order_mq(&mq, OrderingStrategy::PartiallyRandom, &s, &[TermId(0)], &mut rng)
                    .unwrap();
                r.entries()[0].object == o(1)
            })
            .count();
        let freq = first_a as f64 / n as f64;
        assert!((freq - 0.75).abs() < 0.01, "{freq}");
    }

    #[test]
    fn partially_random_zero_scores_fall_back_to_uniform() {
        let s = store_with_scores(&[(1, 0.0), (2, 0.0)]);
        let mq = compose_mq(&[o(1), o(2)], &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 20_000;
        let first = (0..n)
            .filter(|_| {
                order_mq(&mq, OrderingStrategy::PartiallyRandom, &s, &[TermId(0)], &mut rng)
                    .unwrap()
                    .entries()[0]
                    .object
                    == o(1)
            })
            .count();
        assert!((first as f64 / n as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn order_rejects_empty() {
        let s = store_with_scores(&[]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            order_mq(&MqList::default(), OrderingStrategy::NonRandom, &s, &[], &mut rng),
            Err(PolicyError::Empty)
        );
    }

    fn brute_force_top_k(store: &IndexStore, terms: &[TermId], k: usize) -> Vec<ObjectId> {
        let mut all: Vec<(ObjectId, f64)> = store
            .objects()
            .iter()
            .map(|o| (*o, store.cumulative_riv(terms, *o).unwrap()))
            .collect();
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        all.into_iter().take(k).map(|(o, _)| o).collect()
    }

    fn random_store(seed: u64) -> (IndexStore, Vec<TermId>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = IndexStore::new(IndexParams::default()).unwrap();
        let n_obj = rng.random_range(1..60);
        for i in 0..n_obj {
            s.register_object(o(i * 3));
        }
        for _ in 0..rng.random_range(0..150) {
            let t = TermId(rng.random_range(0..6));
            let obj = o(rng.random_range(0..n_obj) * 3);
            // small integer scores make ties common
            s.set_riv(t, obj, f64::from(rng.random_range(0..5u32))).unwrap();
        }
        let terms = (0..rng.random_range(1..4)).map(|i| TermId(i * 2)).collect();
        (s, terms)
    }

    proptest! {
        #[test]
        fn construct_oa_matches_full_sort(seed in any::<u64>(), k in 0usize..70) {
            let (s, terms) = random_store(seed);
            let k = k.min(s.object_count());
            prop_assert_eq!(construct_oa(&s, &terms, k), brute_force_top_k(&s, &terms, k));
        }

        #[test]
        fn order_is_permutation_with_blocks(seed in any::<u64>(), n_a in 0usize..6, n_b in 0usize..6, strat in 0usize..4) {
            prop_assume!(n_a + n_b > 0);
            let (s, terms) = random_store(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let objs: Vec<ObjectId> = (0..(n_a + n_b) as u32).map(|i| o(i * 3)).collect();
            let mq = compose_mq(&objs[..n_a], &objs[n_a..]).unwrap();
            let strategy = OrderingStrategy::ALL[strat];
            let out = order_mq(&mq, strategy, &s, &terms, &mut rng).unwrap();
            let mut a: Vec<_> = out.objects().collect();
            let mut b: Vec<_> = mq.objects().collect();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
            for (i, e) in out.entries().iter().enumerate() {
                prop_assert_eq!(e.rank, i + 1);
                prop_assert_eq!(e.provenance, mq.entries().iter().find(|x| x.object == e.object).unwrap().provenance);
            }
            if strategy.keeps_blocks() {
                let max_exploit = out.entries().iter().filter(|e| e.provenance == Provenance::Exploit).map(|e| e.rank).max();
                let min_explore = out.entries().iter().filter(|e| e.provenance == Provenance::Explore).map(|e| e.rank).min();
                if let (Some(a), Some(b)) = (max_exploit, min_explore) {
                    prop_assert!(a < b);
                }
            }
        }

        #[test]
        fn scaling_rivs_keeps_order(seed in any::<u64>(), exp in -4i32..6) {
            let (s, terms) = random_store(seed);
            let factor = 2f64.powi(exp);
            let mut scaled = IndexStore::new(IndexParams::default()).unwrap();
            for obj in s.objects() {
                scaled.register_object(*obj);
            }
            for t in s.tuples() {
                scaled.set_riv(t.term, t.object, t.riv * factor).unwrap();
            }
            let objs: Vec<ObjectId> = s.objects().iter().copied().take(6).collect();
            let mq = compose_mq(&objs, &[]).unwrap();
            for strategy in [OrderingStrategy::NonRandom, OrderingStrategy::PartiallyRandom] {
                let mut r1 = ChaCha8Rng::seed_from_u64(seed ^ 1);
                let mut r2 = ChaCha8Rng::seed_from_u64(seed ^ 1);
                let a = order_mq(&mq, strategy, &s, &terms, &mut r1).unwrap();
                let b = order_mq(&mq, strategy, &scaled, &terms, &mut r2).unwrap();
                prop_assert_eq!(a, b);
            }
            let k = objs.len();
            prop_assert_eq!(construct_oa(&s, &terms, k), construct_oa(&scaled, &terms, k));
        }
    }
}
