//! Simulated users: Poisson query arrivals, query generation and the
//! pertinence click model.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{ClickModel, Feedback, Query};
use crate::index::{ObjectId, TermId};
use crate::policy::MqList;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("arrival rate must be positive, got {0}")]
    InvalidRate(f64),
    #[error("case mix must be three non-negative weights summing to 1, got {0:?}")]
    InvalidCaseMix([f64; 3]),
    #[error("terms per query must be a range within 1..=n, got {0}..={1}")]
    InvalidTermRange(usize, usize),
    #[error("truth graph: {0}")]
    InvalidTruth(String),
    #[error("click noise must lie in [0, 1], got {0}")]
    InvalidNoise(f64),
    #[error("truth line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// The latent relevance relation that drives clicks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    relevant: HashSet<(TermId, ObjectId)>,
    by_object: BTreeMap<ObjectId, Vec<TermId>>,
    by_term: BTreeMap<TermId, Vec<ObjectId>>,
}

impl GroundTruth {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (TermId, ObjectId)>) -> Self {
        let mut truth = Self::default();
        for (t, o) in pairs {
            if truth.relevant.insert((t, o)) {
                truth.by_object.entry(o).or_default().push(t);
                truth.by_term.entry(t).or_default().push(o);
            }
        }
        for terms in truth.by_object.values_mut() {
            terms.sort_unstable();
        }
        for objects in truth.by_term.values_mut() {
            objects.sort_unstable();
        }
        truth
    }

    /// Random bipartite graph with exactly `pairs` edges over `objects`
    /// objects and `terms` terms. Every object gets `pairs / objects` distinct
    /// terms, the first `pairs % objects` objects one more.
    pub fn random_bipartite<R: Rng + ?Sized>(
        rng: &mut R,
        terms: u32,
        objects: u32,
        pairs: u64,
    ) -> Result<Self, SimError> {
        if objects == 0 || terms == 0 {
            return Err(SimError::InvalidTruth("need at least one term and one object".into()));
        }
        if pairs < u64::from(objects) {
            return Err(SimError::InvalidTruth(format!(
                "{pairs} pairs cannot cover {objects} objects"
            )));
        }
        let base = pairs / u64::from(objects);
        let extra = pairs % u64::from(objects);
        let max_degree = base + u64::from(extra > 0);
        if max_degree > u64::from(terms) {
            return Err(SimError::InvalidTruth(format!(
                "degree {max_degree} exceeds the {terms} available terms"
            )));
        }
        let mut edges = Vec::with_capacity(pairs as usize);
        for obj in 0..objects {
            let degree = base + u64::from(u64::from(obj) < extra);
            let picked = rand::seq::index::sample(rng, terms as usize, degree as usize);
            for t in picked {
                edges.push((TermId(t as u32), ObjectId(obj)));
            }
        }
        Ok(Self::from_pairs(edges))
    }

    /// `C`, the number of relevant pairs.
    pub fn len(&self) -> usize {
        self.relevant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relevant.is_empty()
    }

    pub fn contains(&self, term: TermId, object: ObjectId) -> bool {
        self.relevant.contains(&(term, object))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (TermId, ObjectId)> + '_ {
        self.by_object
            .iter()
            .flat_map(|(o, ts)| ts.iter().map(move |t| (*t, *o)))
    }

    pub fn terms(&self) -> impl Iterator<Item = TermId> + '_ {
        self.by_term.keys().copied()
    }

    pub fn objects(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.by_object.keys().copied()
    }

    pub fn terms_of(&self, object: ObjectId) -> &[TermId] {
        self.by_object.get(&object).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn objects_of(&self, term: TermId) -> &[ObjectId] {
        self.by_term.get(&term).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Whether `object` is relevant to any of `terms`.
    pub fn is_pertinent(&self, object: ObjectId, terms: &[TermId]) -> bool {
        terms.iter().any(|t| self.contains(*t, object))
    }

    /// Drops every pair of an object. Returns how many were dropped.
    pub fn retire_object(&mut self, object: ObjectId) -> usize {
        let Some(terms) = self.by_object.remove(&object) else {
            return 0;
        };
        for t in &terms {
            self.relevant.remove(&(*t, object));
            if let Some(objs) = self.by_term.get_mut(t) {
                objs.retain(|o| *o != object);
                if objs.is_empty() {
                    self.by_term.remove(t);
                }
            }
        }
        terms.len()
    }

    /// Writes `term_id,object_id` lines, sorted by object then term.
    pub fn write_lines<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (t, o) in self.pairs() {
            writeln!(out, "{},{}", t.0, o.0)?;
        }
        Ok(())
    }

    pub fn read_lines<R: BufRead>(input: R) -> Result<Self, SimError> {
        let mut pairs = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| SimError::Parse { line: i + 1, message: e.to_string() })?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse = |s: Option<&str>| -> Result<u32, SimError> {
                s.map(str::trim)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| SimError::Parse {
                        line: i + 1,
                        message: format!("expected `term_id,object_id`, got {line:?}"),
                    })
            };
            let mut fields = line.split(',');
            let t = parse(fields.next())?;
            let o = parse(fields.next())?;
            if fields.next().is_some() {
                return Err(SimError::Parse { line: i + 1, message: "too many fields".into() });
            }
            pairs.push((TermId(t), ObjectId(o)));
        }
        Ok(Self::from_pairs(pairs))
    }
}

/// Poisson query arrivals at `lambda` per day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalProcess {
    lambda: f64,
}

impl ArrivalProcess {
    pub fn new(lambda: f64) -> Result<Self, SimError> {
        if lambda > 0.0 && lambda.is_finite() {
            Ok(Self { lambda })
        } else {
            Err(SimError::InvalidRate(lambda))
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Days until the next arrival, always strictly positive.
    pub fn next_interarrival<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        next_interarrival(rng, self.lambda)
    }
}

/// `-ln(U) / lambda` with `U` uniform on the open interval `(0, 1)`.
pub fn next_interarrival<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> f64 {
    let u = open_unit(rng);
    -u.ln() / lambda
}

pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        // random::<f64>() is in [0, 1); only zero has to be rejected
        let u = rng.random::<f64>();
        if u > 0.0 {
            return u;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryCase {
    /// Every term is used for the first time.
    AllNew,
    /// Every term was used before.
    AllExisting,
    /// At least one new and one previously used term.
    Hybrid,
}

impl fmt::Display for QueryCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryCase::AllNew => "all_new",
            QueryCase::AllExisting => "all_existing",
            QueryCase::Hybrid => "hybrid",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryGenerator {
    /// Weights of `[AllNew, AllExisting, Hybrid]`.
    pub case_mix: [f64; 3],
    pub min_terms: usize,
    pub max_terms: usize,
}

impl Default for QueryGenerator {
    fn default() -> Self {
        Self {
            case_mix: [0.1, 0.7, 0.2],
            min_terms: 1,
            max_terms: 3,
        }
    }
}

impl QueryGenerator {
    pub fn validate(&self) -> Result<(), SimError> {
        let sum: f64 = self.case_mix.iter().sum();
        if self.case_mix.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(SimError::InvalidCaseMix(self.case_mix));
        }
        if self.min_terms == 0 || self.min_terms > self.max_terms {
            return Err(SimError::InvalidTermRange(self.min_terms, self.max_terms));
        }
        Ok(())
    }

    fn pick_case<R: Rng + ?Sized>(&self, rng: &mut R) -> QueryCase {
        let u = rng.random::<f64>();
        let [a, b, _] = self.case_mix;
        if u < a {
            QueryCase::AllNew
        } else if u < a + b {
            QueryCase::AllExisting
        } else {
            QueryCase::Hybrid
        }
    }
}

/// Which terms have been queried so far.
#[derive(Debug, Clone, Default)]
pub struct VocabularyState {
    seen: Vec<TermId>,
    unseen: Vec<TermId>,
    seen_set: HashSet<TermId>,
}

impl VocabularyState {
    /// Every term starts unseen.
    pub fn new(terms: impl IntoIterator<Item = TermId>) -> Self {
        let mut unseen: Vec<TermId> = terms.into_iter().collect();
        unseen.sort_unstable();
        unseen.dedup();
        Self {
            seen: Vec::new(),
            unseen,
            seen_set: HashSet::new(),
        }
    }

    pub fn is_seen(&self, term: TermId) -> bool {
        self.seen_set.contains(&term)
    }

    pub fn seen_count(&self) -> usize {
        self.seen.len()
    }

    pub fn unseen_count(&self) -> usize {
        self.unseen.len()
    }

    /// Marks terms as seen. Terms outside the vocabulary are added to it.
    pub fn observe(&mut self, terms: &[TermId]) {
        for t in terms {
            if self.seen_set.insert(*t) {
                self.seen.push(*t);
                if let Some(pos) = self.unseen.iter().position(|u| u == t) {
                    self.unseen.swap_remove(pos);
                }
            }
        }
    }

    fn draw_unseen<R: Rng + ?Sized>(&mut self, rng: &mut R, n: usize) -> Vec<TermId> {
        (0..n.min(self.unseen.len()))
            .map(|_| {
                let i = rng.random_range(0..self.unseen.len());
                let t = self.unseen.swap_remove(i);
                self.seen_set.insert(t);
                self.seen.push(t);
                t
            })
            .collect()
    }

    fn draw_seen<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<TermId> {
        rand::seq::index::sample(rng, self.seen.len(), n.min(self.seen.len()))
            .into_iter()
            .map(|i| self.seen[i])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedQuery {
    pub query: Query,
    pub case: QueryCase,
}

/// Draws a query and marks its terms as seen.
///
/// Cases that the vocabulary cannot satisfy fall back: no seen terms means
/// `AllNew`, no unseen terms means `AllExisting`.
pub fn generate_query<R: Rng + ?Sized>(
    rng: &mut R,
    generator: &QueryGenerator,
    vocab: &mut VocabularyState,
) -> Result<TaggedQuery, SimError> {
    generator.validate()?;
    let wanted = generator.pick_case(rng);
    let mut n = rng.random_range(generator.min_terms..=generator.max_terms);

    let case = match wanted {
        _ if vocab.seen.is_empty() && vocab.unseen.is_empty() => {
            return Err(SimError::InvalidTruth("empty vocabulary".into()))
        }
        QueryCase::AllExisting | QueryCase::Hybrid if vocab.seen.is_empty() => {
            log::debug!("{wanted} query requested before any term was seen; using all_new");
            QueryCase::AllNew
        }
        QueryCase::AllNew | QueryCase::Hybrid if vocab.unseen.is_empty() => {
            log::debug!("{wanted} query requested with no unseen terms; using all_existing");
            QueryCase::AllExisting
        }
        case => case,
    };

    let terms = match case {
        QueryCase::AllNew => vocab.draw_unseen(rng, n),
        QueryCase::AllExisting => vocab.draw_seen(rng, n),
        QueryCase::Hybrid => {
            n = n.max(2);
            let n_new = rng.random_range(1..n);
            let mut old = vocab.draw_seen(rng, n - n_new);
            let new = vocab.draw_unseen(rng, n_new);
            old.extend(new);
            old
        }
    };
    let query = Query::new(terms).expect("drawn terms are distinct and non-empty");
    Ok(TaggedQuery { query, case })
}

/// Deterministic pertinence rule: a presented object is clicked iff it is
/// relevant to at least one query term. Clicks come back in rank order.
pub fn simulate_click(presented: &MqList, truth: &GroundTruth, query: &Query) -> Feedback {
    Feedback::clicks(
        presented
            .objects()
            .filter(|o| truth.is_pertinent(*o, query.terms()))
            .collect(),
    )
}

/// [`simulate_click`] with an optional probability of flipping each decision.
#[derive(Debug, Clone)]
pub struct PertinenceClicks<'a> {
    truth: &'a GroundTruth,
    noise: f64,
}

impl<'a> PertinenceClicks<'a> {
    pub fn new(truth: &'a GroundTruth, noise: f64) -> Result<Self, SimError> {
        if !(0.0..=1.0).contains(&noise) {
            return Err(SimError::InvalidNoise(noise));
        }
        Ok(Self { truth, noise })
    }

    pub fn truth(&self) -> &GroundTruth {
        self.truth
    }
}

impl ClickModel for PertinenceClicks<'_> {
    fn respond<R: Rng + ?Sized>(&mut self, presented: &MqList, query: &Query, rng: &mut R) -> Feedback {
        if self.noise == 0.0 {
            return simulate_click(presented, self.truth, query);
        }
        Feedback::clicks(
            presented
                .objects()
                .filter(|o| {
                    let pertinent = self.truth.is_pertinent(*o, query.terms());
                    pertinent != (rng.random::<f64>() < self.noise)
                })
                .collect(),
        )
    }
}
