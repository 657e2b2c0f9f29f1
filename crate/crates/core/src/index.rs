//! Dynamic index state.
//!
//! An [`IndexStore`] holds one relevance index value (RIV) per linked
//! `(term, object)` pair. A pair whose RIV is at or above the store's
//! threshold is *explored* (it lives in the index pool); anything below is
//! *unexplored* and still sits in the index generator. Classification is a
//! pure function of the RIV, so promotion and demotion happen implicitly as
//! scores move.
//!
//! Stores can be snapshotted to a line-oriented text format:
//!
//! ```text
//! 10,1,1
//! 3,17,2.5
//! ```
//!
//! The first line carries `threshold,relevance_base,r_init`; every further
//! line is `term_id,object_id,riv`. Reals use the shortest decimal form that
//! parses back to the same `f64`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::GroundTruth;

/// Identifier of a query term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TermId(pub u32);

/// Identifier of a searchable object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o{}", self.0)
    }
}

/// A `[term, object, riv]` triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorTuple {
    pub term: TermId,
    pub object: ObjectId,
    pub riv: f64,
}

/// Where a pair currently sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IndexClass {
    /// `riv >= threshold`: the pair is in the index pool.
    Explored,
    /// `0 <= riv < threshold`: the pair is still in the index generator.
    Unexplored,
    /// No tuple exists for the pair.
    Absent,
}

#[derive(Debug, Error, PartialEq)]
pub enum IndexError {
    #[error("invalid index parameters: {0}")]
    InvalidParams(String),
    #[error("weight {0} is outside (0, 1]")]
    InvalidWeight(f64),
    #[error("an object must be indexed under at least one term")]
    NoTerms,
    #[error("snapshot line {line}: {message}")]
    Snapshot { line: usize, message: String },
    #[error("snapshot io: {0}")]
    Io(String),
}

/// Scoring constants of a store.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexParams {
    /// Promotion threshold `h`.
    pub threshold: f64,
    /// Relevance base `R`; one reinforcement of weight `w` adds `w * R`.
    pub relevance_base: f64,
    /// RIV assigned by minimal indexing.
    pub r_init: f64,
}

impl Default for IndexParams {
    fn default() -> Self {
        Self {
            threshold: 10.0,
            relevance_base: 1.0,
            r_init: 1.0,
        }
    }
}

impl IndexParams {
    pub fn validate(&self) -> Result<(), IndexError> {
        let finite = self.threshold.is_finite()
            && self.relevance_base.is_finite()
            && self.r_init.is_finite();
        if !finite {
            return Err(IndexError::InvalidParams("parameters must be finite".into()));
        }
        if self.relevance_base <= 0.0 {
            return Err(IndexError::InvalidParams(format!(
                "relevance base must be positive, got {}",
                self.relevance_base
            )));
        }
        if !(self.r_init > 0.0 && self.r_init < self.threshold) {
            return Err(IndexError::InvalidParams(format!(
                "need 0 < r_init < threshold, got r_init={} threshold={}",
                self.r_init, self.threshold
            )));
        }
        Ok(())
    }
}

/// Result of a single reinforce/penalize call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RivUpdate {
    /// RIV after the update.
    pub riv: f64,
    /// Change applied by the reinforcement or penalty itself.
    pub delta: f64,
    /// Whether the pair was created at `r_init` before being reinforced.
    pub created: bool,
    pub before: IndexClass,
    pub after: IndexClass,
}

impl RivUpdate {
    /// Net change of the store total caused by this call, creation included.
    pub fn total_change(&self, r_init: f64) -> f64 {
        if self.created {
            r_init + self.delta
        } else {
            self.delta
        }
    }

    pub fn promoted(&self) -> bool {
        self.after == IndexClass::Explored && self.before != IndexClass::Explored
    }

    pub fn demoted(&self) -> bool {
        self.before == IndexClass::Explored && self.after != IndexClass::Explored
    }
}

/// What [`IndexStore::deconstruct`] removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Pair(TermId, ObjectId),
    /// Every link of the object; the object also leaves the population.
    Object(ObjectId),
}

fn check_weight(weight: f64) -> Result<(), IndexError> {
    if weight > 0.0 && weight <= 1.0 {
        Ok(())
    } else {
        Err(IndexError::InvalidWeight(weight))
    }
}

/// Term x object RIV map partitioned by the promotion threshold.
///
/// Single writer; wrap it in a lock if it must be shared.
#[derive(Debug, Clone)]
pub struct IndexStore {
    params: IndexParams,
    postings: HashMap<TermId, BTreeMap<ObjectId, f64>>,
    object_terms: HashMap<ObjectId, BTreeSet<TermId>>,
    // Sorted population, indexable for uniform sampling.
    objects: Vec<ObjectId>,
    total_riv: f64,
    tuple_count: usize,
    explored_count: usize,
}

impl IndexStore {
    pub fn new(params: IndexParams) -> Result<Self, IndexError> {
        params.validate()?;
        Ok(Self {
            params,
            postings: HashMap::new(),
            object_terms: HashMap::new(),
            objects: Vec::new(),
            total_riv: 0.0,
            tuple_count: 0,
            explored_count: 0,
        })
    }

    pub fn params(&self) -> &IndexParams {
        &self.params
    }

    pub fn threshold(&self) -> f64 {
        self.params.threshold
    }

    pub fn relevance_base(&self) -> f64 {
        self.params.relevance_base
    }

    pub fn r_init(&self) -> f64 {
        self.params.r_init
    }

    /// Cached sum of every stored RIV.
    pub fn total_riv(&self) -> f64 {
        self.total_riv
    }

    /// Sum of every stored RIV, recomputed from scratch.
    pub fn recompute_total_riv(&self) -> f64 {
        self.tuples().map(|t| t.riv).sum()
    }

    pub fn len(&self) -> usize {
        self.tuple_count
    }

    pub fn is_empty(&self) -> bool {
        self.tuple_count == 0
    }

    /// Number of explored tuples (index pool size).
    pub fn pool_size(&self) -> usize {
        self.explored_count
    }

    /// Number of unexplored tuples (index generator size).
    pub fn generator_size(&self) -> usize {
        self.tuple_count - self.explored_count
    }

    /// Known objects in ascending id order.
    pub fn objects(&self) -> &[ObjectId] {
        &self.objects
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }

    pub fn contains_object(&self, object: ObjectId) -> bool {
        self.objects.binary_search(&object).is_ok()
    }

    /// Registers an object without linking it to any term.
    pub fn register_object(&mut self, object: ObjectId) {
        if let Err(pos) = self.objects.binary_search(&object) {
            self.objects.insert(pos, object);
        }
    }

    pub fn riv(&self, term: TermId, object: ObjectId) -> Option<f64> {
        self.postings.get(&term)?.get(&object).copied()
    }

    /// Links of one term, ascending by object.
    pub fn postings(&self, term: TermId) -> impl Iterator<Item = (ObjectId, f64)> + '_ {
        self.postings
            .get(&term)
            .into_iter()
            .flat_map(|p| p.iter().map(|(o, r)| (*o, *r)))
    }

    /// Terms linked to an object, ascending.
    pub fn terms_of(&self, object: ObjectId) -> impl Iterator<Item = TermId> + '_ {
        self.object_terms
            .get(&object)
            .into_iter()
            .flat_map(|t| t.iter().copied())
    }

    /// All tuples, in unspecified order.
    pub fn tuples(&self) -> impl Iterator<Item = TorTuple> + '_ {
        self.postings.iter().flat_map(|(term, p)| {
            p.iter().map(move |(object, riv)| TorTuple {
                term: *term,
                object: *object,
                riv: *riv,
            })
        })
    }

    /// All tuples sorted by `(term, object)`.
    pub fn sorted_tuples(&self) -> Vec<TorTuple> {
        let mut out: Vec<_> = self.tuples().collect();
        out.sort_by_key(|t| (t.term, t.object));
        out
    }

    pub fn class_of_riv(&self, riv: f64) -> IndexClass {
        if riv >= self.params.threshold {
            IndexClass::Explored
        } else {
            IndexClass::Unexplored
        }
    }

    pub fn classify(&self, term: TermId, object: ObjectId) -> IndexClass {
        match self.riv(term, object) {
            Some(riv) => self.class_of_riv(riv),
            None => IndexClass::Absent,
        }
    }

    fn insert_new(&mut self, term: TermId, object: ObjectId, riv: f64) {
        self.register_object(object);
        self.postings.entry(term).or_default().insert(object, riv);
        self.object_terms.entry(object).or_default().insert(term);
        self.total_riv += riv;
        self.tuple_count += 1;
        if self.class_of_riv(riv) == IndexClass::Explored {
            self.explored_count += 1;
        }
    }

    /// Overwrites (or creates) a tuple. Used by snapshot loading and tests.
    pub fn set_riv(&mut self, term: TermId, object: ObjectId, riv: f64) -> Result<(), IndexError> {
        if !(riv >= 0.0 && riv.is_finite()) {
            return Err(IndexError::InvalidParams(format!("riv must be finite and >= 0, got {riv}")));
        }
        match self.riv(term, object) {
            Some(old) => {
                self.replace(term, object, old, riv);
            }
            None => self.insert_new(term, object, riv),
        }
        Ok(())
    }

    fn replace(&mut self, term: TermId, object: ObjectId, old: f64, new: f64) {
        if let Some(slot) = self.postings.get_mut(&term).and_then(|p| p.get_mut(&object)) {
            *slot = new;
        }
        self.total_riv += new - old;
        match (self.class_of_riv(old), self.class_of_riv(new)) {
            (IndexClass::Explored, IndexClass::Unexplored) => self.explored_count -= 1,
            (IndexClass::Unexplored, IndexClass::Explored) => self.explored_count += 1,
            _ => {}
        }
    }

    /// Links `object` to every term in `terms` at `r_init`, leaving
    /// existing pairs alone. Returns the number of links created.
    pub fn init_minimal_index(
        &mut self,
        object: ObjectId,
        terms: &[TermId],
    ) -> Result<usize, IndexError> {
        if terms.is_empty() {
            return Err(IndexError::NoTerms);
        }
        let mut created = 0;
        for &term in terms {
            if self.riv(term, object).is_none() {
                self.insert_new(term, object, self.params.r_init);
                created += 1;
            }
        }
        Ok(created)
    }

    /// Adds `weight * R` to the pair, creating it at `r_init` first if absent.
    pub fn reinforce(
        &mut self,
        term: TermId,
        object: ObjectId,
        weight: f64,
    ) -> Result<RivUpdate, IndexError> {
        check_weight(weight)?;
        let delta = weight * self.params.relevance_base;
        let (old, created, before) = match self.riv(term, object) {
            Some(riv) => (riv, false, self.class_of_riv(riv)),
            None => {
                self.insert_new(term, object, self.params.r_init);
                (self.params.r_init, true, IndexClass::Absent)
            }
        };
        let riv = old + delta;
        self.replace(term, object, old, riv);
        Ok(RivUpdate {
            riv,
            delta,
            created,
            before,
            after: self.class_of_riv(riv),
        })
    }

    /// Subtracts `weight * R` from the pair, clamping at zero.
    ///
    /// Penalizing an absent pair is a no-op with a zero delta.
    pub fn penalize(
        &mut self,
        term: TermId,
        object: ObjectId,
        weight: f64,
    ) -> Result<RivUpdate, IndexError> {
        check_weight(weight)?;
        Ok(self.penalize_by(term, object, weight * self.params.relevance_base))
    }

    /// Subtracts an absolute amount from the pair, clamping at zero.
    pub(crate) fn penalize_by(&mut self, term: TermId, object: ObjectId, amount: f64) -> RivUpdate {
        let Some(old) = self.riv(term, object) else {
            return RivUpdate {
                riv: 0.0,
                delta: 0.0,
                created: false,
                before: IndexClass::Absent,
                after: IndexClass::Absent,
            };
        };
        let riv = (old - amount.max(0.0)).max(0.0);
        self.replace(term, object, old, riv);
        RivUpdate {
            riv,
            delta: riv - old,
            created: false,
            before: self.class_of_riv(old),
            after: self.class_of_riv(riv),
        }
    }

    fn remove_pair(&mut self, term: TermId, object: ObjectId) -> Option<f64> {
        let postings = self.postings.get_mut(&term)?;
        let riv = postings.remove(&object)?;
        if postings.is_empty() {
            self.postings.remove(&term);
        }
        if let Some(terms) = self.object_terms.get_mut(&object) {
            terms.remove(&term);
            if terms.is_empty() {
                self.object_terms.remove(&object);
            }
        }
        self.total_riv -= riv;
        self.tuple_count -= 1;
        if self.class_of_riv(riv) == IndexClass::Explored {
            self.explored_count -= 1;
        }
        Some(riv)
    }

    /// Removes tuples entirely. Returns how many were removed.
    pub fn deconstruct(&mut self, scope: Scope) -> usize {
        match scope {
            Scope::Pair(term, object) => usize::from(self.remove_pair(term, object).is_some()),
            Scope::Object(object) => {
                let terms: Vec<TermId> = self.terms_of(object).collect();
                let removed = terms
                    .into_iter()
                    .filter(|&term| self.remove_pair(term, object).is_some())
                    .count();
                if let Ok(pos) = self.objects.binary_search(&object) {
                    self.objects.remove(pos);
                }
                removed
            }
        }
    }

    /// Sum of the object's RIV over `terms`, absent pairs counting zero.
    pub fn cumulative_riv(&self, terms: &[TermId], object: ObjectId) -> Result<f64, IndexError> {
        if terms.is_empty() {
            return Err(IndexError::NoTerms);
        }
        Ok(self.cumulative_riv_unchecked(terms, object))
    }

    pub(crate) fn cumulative_riv_unchecked(&self, terms: &[TermId], object: ObjectId) -> f64 {
        terms
            .iter()
            .map(|&t| self.riv(t, object).unwrap_or(0.0))
            .fold(0.0, |acc, r| acc + r)
    }

    /// Cumulative scores of every object linked to at least one of `terms`,
    /// accumulated in the order the terms are given.
    pub fn linked_scores(&self, terms: &[TermId]) -> HashMap<ObjectId, f64> {
        let mut scores: HashMap<ObjectId, f64> = HashMap::new();
        for term in terms {
            for (object, riv) in self.postings(*term) {
                *scores.entry(object).or_insert(0.0) += riv;
            }
        }
        scores
    }

    /// Ground-truth pairs that are not yet explored.
    pub fn count_unexplored(&self, truth: &GroundTruth) -> usize {
        truth
            .pairs()
            .filter(|(t, o)| self.classify(*t, *o) != IndexClass::Explored)
            .count()
    }

    pub fn write_snapshot<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let p = &self.params;
        writeln!(out, "{},{},{}", p.threshold, p.relevance_base, p.r_init)?;
        for t in self.sorted_tuples() {
            writeln!(out, "{},{},{}", t.term.0, t.object.0, t.riv)?;
        }
        Ok(())
    }

    pub fn to_snapshot_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_snapshot(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("snapshot is ascii")
    }

    pub fn read_snapshot<R: BufRead>(input: R) -> Result<Self, IndexError> {
        let mut lines = input.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((i, line)) => {
                    let line = line.map_err(|e| IndexError::Io(e.to_string()))?;
                    if !line.trim().is_empty() {
                        break (i + 1, line);
                    }
                }
                None => {
                    return Err(IndexError::Snapshot {
                        line: 1,
                        message: "missing header".into(),
                    })
                }
            }
        };
        let fields = split_fields(&header.1, header.0)?;
        let params = IndexParams {
            threshold: parse_real(fields[0], header.0)?,
            relevance_base: parse_real(fields[1], header.0)?,
            r_init: parse_real(fields[2], header.0)?,
        };
        let mut store = IndexStore::new(params).map_err(|e| IndexError::Snapshot {
            line: header.0,
            message: e.to_string(),
        })?;
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| IndexError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields = split_fields(&line, lineno)?;
            let term = TermId(parse_id(fields[0], lineno)?);
            let object = ObjectId(parse_id(fields[1], lineno)?);
            let riv = parse_real(fields[2], lineno)?;
            if store.riv(term, object).is_some() {
                return Err(IndexError::Snapshot {
                    line: lineno,
                    message: format!("duplicate pair ({}, {})", term.0, object.0),
                });
            }
            store.set_riv(term, object, riv).map_err(|e| IndexError::Snapshot {
                line: lineno,
                message: e.to_string(),
            })?;
        }
        Ok(store)
    }

    pub fn from_snapshot_str(text: &str) -> Result<Self, IndexError> {
        Self::read_snapshot(text.as_bytes())
    }
}

fn split_fields(line: &str, lineno: usize) -> Result<[&str; 3], IndexError> {
    let parts: Vec<&str> = line.trim().split(',').map(str::trim).collect();
    <[&str; 3]>::try_from(parts).map_err(|p| IndexError::Snapshot {
        line: lineno,
        message: format!("expected 3 comma-separated fields, found {}", p.len()),
    })
}

fn parse_real(s: &str, line: usize) -> Result<f64, IndexError> {
    s.parse::<f64>().map_err(|_| IndexError::Snapshot {
        line,
        message: format!("not a real number: {s:?}"),
    })
}

fn parse_id(s: &str, line: usize) -> Result<u32, IndexError> {
    s.parse::<u32>().map_err(|_| IndexError::Snapshot {
        line,
        message: format!("not an id: {s:?}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const T1: TermId = TermId(1);
    const T2: TermId = TermId(2);
    const O1: ObjectId = ObjectId(1);

    fn store() -> IndexStore {
        IndexStore::new(IndexParams::default()).unwrap()
    }

    fn store_with(relevance_base: f64) -> IndexStore {
        IndexStore::new(IndexParams {
            relevance_base,
            ..IndexParams::default()
        })
        .unwrap()
    }

    #[test]
    fn rejects_bad_params() {
        let bad = [
            IndexParams { r_init: 10.0, ..Default::default() },
            IndexParams { r_init: 0.0, ..Default::default() },
            IndexParams { relevance_base: 0.0, ..Default::default() },
            IndexParams { threshold: f64::NAN, ..Default::default() },
        ];
        for p in bad {
            assert!(IndexStore::new(p).is_err(), "{p:?} accepted");
        }
    }

    #[test]
    fn minimal_index_creates_links_at_r_init() {
        let mut s = store();
        assert_eq!(s.init_minimal_index(O1, &[T1, T2]).unwrap(), 2);
        assert_eq!(s.riv(T1, O1), Some(1.0));
        assert_eq!(s.riv(T2, O1), Some(1.0));
        assert_eq!(s.total_riv(), 2.0);
        assert_eq!(s.object_count(), 1);
    }

    #[test]
    fn minimal_index_leaves_existing_pairs() {
        let mut s = store();
        s.set_riv(T1, O1, 7.0).unwrap();
        assert_eq!(s.init_minimal_index(O1, &[T1]).unwrap(), 0);
        assert_eq!(s.riv(T1, O1), Some(7.0));
    }

    #[test]
    fn minimal_index_needs_terms() {
        assert_eq!(store().init_minimal_index(O1, &[]), Err(IndexError::NoTerms));
    }

    #[test]
    fn reinforce_adds_weighted_base() {
        let mut s = store_with(4.0);
        s.set_riv(T1, O1, 2.0).unwrap();
        let up = s.reinforce(T1, O1, 0.5).unwrap();
        assert_eq!(up.riv, 4.0);
        assert_eq!(up.delta, 2.0);
        assert!(!up.created);
    }

    #[test]
    fn reinforce_absent_pair_starts_from_r_init() {
        let mut s = store();
        let up = s.reinforce(T1, O1, 1.0).unwrap();
        assert!(up.created);
        assert_eq!(up.riv, 2.0);
        assert_eq!(up.total_change(1.0), 2.0);
        assert_eq!(s.total_riv(), 2.0);
    }

    #[test]
    fn reinforce_rejects_bad_weight() {
        let mut s = store();
        for w in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(s.reinforce(T1, O1, w), Err(IndexError::InvalidWeight(_))));
        }
        assert!(s.is_empty());
    }

    #[test]
    fn crossing_threshold_promotes() {
        let mut s = store();
        s.set_riv(T1, O1, 10.0 - 1e-9).unwrap();
        assert_eq!(s.classify(T1, O1), IndexClass::Unexplored);
        let up = s.reinforce(T1, O1, 0.25).unwrap();
        assert!(up.promoted());
        assert_eq!(s.classify(T1, O1), IndexClass::Explored);
        assert_eq!(s.pool_size(), 1);
    }

    #[test]
    fn repeated_reinforcement_matches_closed_form() {
        let (r0, w, base) = (1.5, 0.3, 2.0);
        let mut s = store_with(base);
        s.set_riv(T1, O1, r0).unwrap();
        for _ in 0..5 {
            s.reinforce(T1, O1, w).unwrap();
        }
        let expected = r0 + 5.0 * w * base;
        assert!((s.riv(T1, O1).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn penalize_subtracts_and_clamps() {
        let mut s = store_with(4.0);
        s.set_riv(T1, O1, 3.0).unwrap();
        let up = s.penalize(T1, O1, 0.25).unwrap();
        assert_eq!((up.riv, up.delta), (2.0, -1.0));

        let mut s = store();
        s.set_riv(T1, O1, 0.5).unwrap();
        let up = s.penalize(T1, O1, 1.0).unwrap();
        assert_eq!((up.riv, up.delta), (0.0, -0.5));
        assert_eq!(s.classify(T1, O1), IndexClass::Unexplored);
    }

    #[test]
    fn penalize_can_demote() {
        let mut s = store();
        s.set_riv(T1, O1, 10.5).unwrap();
        assert_eq!(s.pool_size(), 1);
        let up = s.penalize(T1, O1, 1.0).unwrap();
        assert!(up.demoted());
        assert_eq!(s.classify(T1, O1), IndexClass::Unexplored);
        assert_eq!(s.pool_size(), 0);
    }

    #[test]
    fn penalize_absent_is_noop() {
        let mut s = store();
        let up = s.penalize(T1, O1, 0.5).unwrap();
        assert_eq!(up.delta, 0.0);
        assert_eq!(s.classify(T1, O1), IndexClass::Absent);
        assert!(s.is_empty());
    }

    #[test]
    fn classify_boundaries() {
        let mut s = store();
        s.set_riv(T1, O1, 10.0).unwrap();
        assert_eq!(s.classify(T1, O1), IndexClass::Explored);
        s.init_minimal_index(ObjectId(2), &[T1]).unwrap();
        assert_eq!(s.classify(T1, ObjectId(2)), IndexClass::Unexplored);
        assert_eq!(s.classify(T2, O1), IndexClass::Absent);
    }

    #[test]
    fn deconstruct_object_removes_all_links() {
        let mut s = store();
        s.init_minimal_index(O1, &[T1, T2, TermId(3)]).unwrap();
        s.init_minimal_index(ObjectId(2), &[T1]).unwrap();
        assert_eq!(s.deconstruct(Scope::Object(O1)), 3);
        for t in [T1, T2, TermId(3)] {
            assert_eq!(s.classify(t, O1), IndexClass::Absent);
        }
        assert!(!s.contains_object(O1));
        assert_eq!(s.total_riv(), 1.0);
        assert_eq!(s.cumulative_riv(&[T1, T2], O1).unwrap(), 0.0);
    }

    #[test]
    fn deconstruct_absent_pair_removes_nothing() {
        let mut s = store();
        assert_eq!(s.deconstruct(Scope::Pair(T1, O1)), 0);
    }

    #[test]
    fn deconstruct_then_cumulative_matches_survivors() {
        let mut s = store();
        s.set_riv(T1, O1, 2.0).unwrap();
        s.set_riv(T2, O1, 3.0).unwrap();
        s.deconstruct(Scope::Pair(T1, O1));
        let survivors: f64 = s
            .tuples()
            .filter(|t| t.object == O1 && [T1, T2].contains(&t.term))
            .map(|t| t.riv)
            .sum();
        assert_eq!(s.cumulative_riv(&[T1, T2], O1).unwrap(), survivors);
        assert_eq!(survivors, 3.0);
    }

    #[test]
    fn cumulative_riv_sums_links() {
        let mut s = store();
        s.set_riv(T1, O1, 2.0).unwrap();
        s.set_riv(T2, O1, 3.0).unwrap();
        assert_eq!(s.cumulative_riv(&[T1, T2], O1).unwrap(), 5.0);
        assert_eq!(s.cumulative_riv(&[TermId(9)], O1).unwrap(), 0.0);
        assert_eq!(s.cumulative_riv(&[], O1), Err(IndexError::NoTerms));
    }

    #[test]
    fn count_unexplored_tracks_promotions() {
        let truth = GroundTruth::from_pairs([(T1, O1), (T2, O1), (T1, ObjectId(2))]);
        let mut s = store();
        assert_eq!(s.count_unexplored(&truth), 3);
        for (t, o) in truth.pairs().collect::<Vec<_>>() {
            s.set_riv(t, o, 10.0).unwrap();
        }
        assert_eq!(s.count_unexplored(&truth), 0);
    }

    #[test]
    fn snapshot_round_trips() {
        let mut s = store_with(0.7);
        s.set_riv(T1, O1, 0.1 + 0.2).unwrap();
        s.set_riv(T2, ObjectId(5), 1.0 / 3.0).unwrap();
        s.set_riv(TermId(4), O1, 12.75).unwrap();
        let text = s.to_snapshot_string();
        assert!(text.starts_with("10,0.7,1\n"));
        let back = IndexStore::from_snapshot_str(&text).unwrap();
        assert_eq!(back.sorted_tuples(), s.sorted_tuples());
        assert_eq!(back.params(), s.params());
        assert_eq!(back.to_snapshot_string(), text);
    }

    #[test]
    fn snapshot_errors_name_line() {
        let err = IndexStore::from_snapshot_str("10,1,1\n1,2,3\n1,x,3\n").unwrap_err();
        assert!(matches!(err, IndexError::Snapshot { line: 3, .. }), "{err:?}");
        let err = IndexStore::from_snapshot_str("10,1\n").unwrap_err();
        assert!(matches!(err, IndexError::Snapshot { line: 1, .. }));
        let err = IndexStore::from_snapshot_str("10,1,1\n1,2,3\n1,2,4\n").unwrap_err();
        assert!(matches!(err, IndexError::Snapshot { line: 3, .. }));
    }

    #[derive(Debug, Clone)]
    enum Op {
        Init(u32, Vec<u32>),
        Reinforce(u32, u32, f64),
        Penalize(u32, u32, f64),
        RemovePair(u32, u32),
        RemoveObject(u32),
    }

    fn op() -> impl Strategy<Value = Op> {
        let weight = prop::sample::select(vec![0.25, 0.5, 0.75, 1.0, 0.1, 0.3]);
        prop_oneof![
            (0u32..8, prop::collection::vec(0u32..6, 1..4)).prop_map(|(o, t)| Op::Init(o, t)),
            (0u32..6, 0u32..8, weight.clone()).prop_map(|(t, o, w)| Op::Reinforce(t, o, w)),
            (0u32..6, 0u32..8, weight).prop_map(|(t, o, w)| Op::Penalize(t, o, w)),
            (0u32..6, 0u32..8).prop_map(|(t, o)| Op::RemovePair(t, o)),
            (0u32..8).prop_map(Op::RemoveObject),
        ]
    }

    fn apply(s: &mut IndexStore, op: &Op) {
        match op {
            Op::Init(o, ts) => {
                let ts: Vec<_> = ts.iter().map(|t| TermId(*t)).collect();
                s.init_minimal_index(ObjectId(*o), &ts).unwrap();
            }
            Op::Reinforce(t, o, w) => {
                s.reinforce(TermId(*t), ObjectId(*o), *w).unwrap();
            }
            Op::Penalize(t, o, w) => {
                s.penalize(TermId(*t), ObjectId(*o), *w).unwrap();
            }
            Op::RemovePair(t, o) => {
                s.deconstruct(Scope::Pair(TermId(*t), ObjectId(*o)));
            }
            Op::RemoveObject(o) => {
                s.deconstruct(Scope::Object(ObjectId(*o)));
            }
        }
    }

    proptest! {
        #[test]
        fn cached_counters_match_recount(ops in prop::collection::vec(op(), 0..60)) {
            let mut s = store_with(1.3);
            for op in &ops {
                apply(&mut s, op);
                let recomputed = s.recompute_total_riv();
                prop_assert!((s.total_riv() - recomputed).abs() <= 1e-9 * (1.0 + recomputed));
                let explored = s.tuples().filter(|t| t.riv >= s.threshold()).count();
                prop_assert_eq!(s.pool_size(), explored);
                prop_assert_eq!(s.len(), s.tuples().count());
                for t in s.tuples() {
                    prop_assert!(t.riv >= 0.0);
                    prop_assert!(s.contains_object(t.object));
                    let class = s.classify(t.term, t.object);
                    prop_assert_eq!(class == IndexClass::Explored, t.riv >= s.threshold());
                }
            }
        }

        #[test]
        fn removed_object_contributes_nothing(ops in prop::collection::vec(op(), 0..40), victim in 0u32..8) {
            let mut s = store();
            for op in &ops {
                apply(&mut s, op);
            }
            s.deconstruct(Scope::Object(ObjectId(victim)));
            let terms: Vec<TermId> = (0..6).map(TermId).collect();
            prop_assert_eq!(s.cumulative_riv(&terms, ObjectId(victim)).unwrap(), 0.0);
            prop_assert!(!s.contains_object(ObjectId(victim)));
            prop_assert_eq!(s.terms_of(ObjectId(victim)).count(), 0);
        }

        #[test]
        fn reinforce_then_penalize_restores(sixty_fourths in 0u32..6400, quarters in 1u32..=4) {
            // dyadic values keep every add/sub exact
            let r0 = f64::from(sixty_fourths) / 64.0;
            let w = f64::from(quarters) / 4.0;
            let mut s = store();
            s.set_riv(T1, O1, r0).unwrap();
            s.reinforce(T1, O1, w).unwrap();
            s.penalize(T1, O1, w).unwrap();
            prop_assert_eq!(s.riv(T1, O1).unwrap(), r0);
            prop_assert_eq!(s.total_riv(), r0);
        }

        #[test]
        fn snapshot_is_lossless(rivs in prop::collection::vec((0u32..20, 0u32..20, 0.0f64..1e6), 0..40)) {
            let mut s = store();
            for (t, o, r) in rivs {
                s.set_riv(TermId(t), ObjectId(o), r).unwrap();
            }
            let text = s.to_snapshot_string();
            let back = IndexStore::from_snapshot_str(&text).unwrap();
            prop_assert_eq!(back.sorted_tuples(), s.sorted_tuples());
            prop_assert_eq!(back.to_snapshot_string(), text);
        }
    }
}
