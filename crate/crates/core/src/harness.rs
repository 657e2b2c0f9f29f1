//! Seeded trials, Monte Carlo ensembles and their comparison with the
//! closed-form death model.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{run_episode, EngineConfig, EngineError};
use crate::index::{IndexError, IndexParams, IndexStore, ObjectId, Scope, TermId};
use crate::oracle::{
    exposure_times, fit_log_linear, AlphaEstimate, DeathModel, OracleError, Trajectory,
};
use crate::sim::{
    generate_query, next_interarrival, GroundTruth, PertinenceClicks, QueryGenerator, SimError,
    VocabularyState,
};

/// Exposure proportion beyond which a trial counts as converged.
pub const CONVERGENCE_P: f64 = 0.9;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("a Monte Carlo ensemble needs at least two seeds, got {0}")]
    TooFewSeeds(usize),
    #[error("trajectories disagree on their sample times (seed {0})")]
    Divergent(u64),
    #[error("the ensemble has no samples")]
    Empty,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Exposure clocks with a given rate, advanced by query arrivals.
    Abstract,
    /// The full engine against simulated users; the rate is measured.
    Mechanistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthConfig {
    pub terms: u32,
    pub objects: u32,
    /// Terms per object. Derived from `s0 / objects` when absent.
    pub degree: Option<u32>,
}

impl Default for TruthConfig {
    fn default() -> Self {
        Self {
            terms: 1_000,
            objects: 20_000,
            degree: None,
        }
    }
}

/// Removes `objects` random objects at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeconstructEvent {
    pub t: f64,
    pub objects: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub s0: u64,
    pub alpha: Option<f64>,
    pub lambda: f64,
    pub horizon: f64,
    pub sample_interval: f64,
    pub engine: EngineConfig,
    pub generator: QueryGenerator,
    pub truth: TruthConfig,
    /// Share of each object's relevant terms linked at `r_init` before the
    /// first query. Every object keeps at least one link.
    pub seed_fraction: f64,
    pub click_noise: f64,
    pub deconstruct: Vec<DeconstructEvent>,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Abstract,
            s0: 60_000,
            alpha: Some(1.0 / 15.0),
            lambda: 8_000.0,
            horizon: 90.0,
            sample_interval: 5.0,
            engine: EngineConfig::default(),
            generator: QueryGenerator::default(),
            truth: TruthConfig::default(),
            seed_fraction: 1.0,
            click_noise: 0.0,
            deconstruct: Vec::new(),
            seeds: (1..=20).collect(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.s0 == 0 {
            return bad("s0 must be at least 1".into());
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda {} must be positive", self.lambda));
        }
        if !(self.sample_interval > 0.0 && self.horizon > self.sample_interval && self.horizon.is_finite()) {
            return bad(format!(
                "need horizon > sample_interval > 0, got horizon {} and sample_interval {}",
                self.horizon, self.sample_interval
            ));
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        let distinct: HashSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        match (self.mode, self.alpha) {
            (Mode::Abstract, None) => return bad("abstract mode needs alpha".into()),
            (Mode::Abstract, Some(a)) if !(a > 0.0 && a.is_finite()) => {
                return bad(format!("alpha {a} must be positive"))
            }
            (Mode::Mechanistic, Some(_)) => {
                return bad("mechanistic mode measures alpha; remove the alpha key".into())
            }
            _ => {}
        }
        if self.mode == Mode::Mechanistic {
            self.engine.validate()?;
            self.generator.validate()?;
            if !(0.0..=1.0).contains(&self.click_noise) {
                return Err(SimError::InvalidNoise(self.click_noise).into());
            }
            if !(self.seed_fraction > 0.0 && self.seed_fraction <= 1.0) {
                return bad(format!("seed_fraction {} outside (0, 1]", self.seed_fraction));
            }
            let TruthConfig { terms, objects, degree } = self.truth;
            if objects == 0 || terms == 0 {
                return bad("truth.terms and truth.objects must be positive".into());
            }
            if self.s0 < u64::from(objects) {
                return bad(format!("s0 = {} cannot cover {objects} objects", self.s0));
            }
            if let Some(d) = degree {
                if u64::from(d) * u64::from(objects) != self.s0 {
                    return bad(format!(
                        "truth.degree {d} times truth.objects {objects} must equal s0 = {}",
                        self.s0
                    ));
                }
            }
            let needed = self.s0.div_ceil(u64::from(objects));
            if needed > u64::from(terms) {
                return bad(format!("each object needs {needed} terms but truth.terms is {terms}"));
            }
            for ev in &self.deconstruct {
                if !(ev.t >= 0.0) {
                    return bad(format!("deconstruct time {} must be non-negative", ev.t));
                }
            }
        } else if !self.deconstruct.is_empty() {
            return bad("deconstruction needs mechanistic mode".into());
        }
        Ok(())
    }

    /// `k * sample_interval` for `k = 1..=floor(horizon / sample_interval)`.
    pub fn sample_times(&self) -> Vec<f64> {
        sample_grid(self.horizon, self.sample_interval)
    }
}

pub fn sample_grid(horizon: f64, interval: f64) -> Vec<f64> {
    let n = (horizon / interval + 1e-9).floor() as u64;
    (1..=n).map(|k| k as f64 * interval).collect()
}

/// Everything one seeded trial produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub seed: u64,
    pub trajectory: Trajectory,
    /// Queries processed within the horizon.
    pub arrivals: u64,
    /// Presentations of an object after it was deconstructed.
    pub violations: u64,
    /// Explored indexes binned by the clicks they received.
    pub click_histogram: BTreeMap<u64, u64>,
    pub convergence: Option<f64>,
    pub alpha_hat: Option<AlphaEstimate>,
}

pub fn run_trial(config: &ExperimentConfig, seed: u64) -> Result<Trajectory, HarnessError> {
    Ok(run_trial_detailed(config, seed, &config.sample_times())?.trajectory)
}

/// Runs one trial sampled at `times`, which must be increasing and within
/// the horizon.
pub fn run_trial_detailed(
    config: &ExperimentConfig,
    seed: u64,
    times: &[f64],
) -> Result<TrialResult, HarnessError> {
    config.validate()?;
    check_times(config.horizon, times)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (trajectory, arrivals, violations, click_histogram) = match config.mode {
        Mode::Abstract => {
            let (t, a, h) = abstract_trial(config, times, &mut rng);
            (t, a, 0, h)
        }
        Mode::Mechanistic => mechanistic_trial(config, times, &mut rng)?,
    };
    let convergence = detect_convergence(&trajectory);
    let alpha_hat = crate::oracle::estimate_alpha(&trajectory).ok();
    Ok(TrialResult {
        seed,
        trajectory,
        arrivals,
        violations,
        click_histogram,
        convergence,
        alpha_hat,
    })
}

fn check_times(horizon: f64, times: &[f64]) -> Result<(), HarnessError> {
    if times.is_empty() {
        return Err(HarnessError::Empty);
    }
    for (i, &t) in times.iter().enumerate() {
        if !(t > 0.0 && t <= horizon) || (i > 0 && times[i - 1] >= t) {
            return Err(HarnessError::Config(format!(
                "sample times must increase strictly within (0, {horizon}], got {t}"
            )));
        }
    }
    Ok(())
}

fn abstract_trial<R: Rng + ?Sized>(
    config: &ExperimentConfig,
    times: &[f64],
    rng: &mut R,
) -> (Trajectory, u64, BTreeMap<u64, u64>) {
    let alpha = config.alpha.expect("validated");
    // calendar queue: every index's exposure instant, consumed in order
    let queue = exposure_times(rng, alpha, config.s0);
    let mut traj = Trajectory::new(config.s0);
    let (mut now, mut exposed, mut arrivals) = (0.0, 0usize, 0u64);
    let mut next = 0;
    loop {
        now += next_interarrival(rng, config.lambda);
        while next < times.len() && times[next] < now {
            traj.push(times[next], config.s0 - exposed as u64, exposed as u64);
            next += 1;
        }
        if now > config.horizon {
            break;
        }
        arrivals += 1;
        while exposed < queue.len() && queue[exposed] <= now {
            exposed += 1;
        }
    }
    let mut histogram = BTreeMap::new();
    if exposed > 0 {
        histogram.insert(1, exposed as u64);
    }
    (traj, arrivals, histogram)
}

/// Builds the truth graph and the minimally indexed store for a trial.
pub fn seed_store<R: Rng + ?Sized>(
    config: &ExperimentConfig,
    rng: &mut R,
) -> Result<(GroundTruth, IndexStore), HarnessError> {
    let truth = GroundTruth::random_bipartite(rng, config.truth.terms, config.truth.objects, config.s0)?;
    let mut store = IndexStore::new(IndexParams::default())?;
    let mut linked = Vec::new();
    for object in truth.objects() {
        linked.clear();
        for (i, &term) in truth.terms_of(object).iter().enumerate() {
            if i == 0 || config.seed_fraction >= 1.0 || rng.random::<f64>() < config.seed_fraction {
                linked.push(term);
            }
        }
        store.init_minimal_index(object, &linked)?;
    }
    Ok((truth, store))
}

type MechanisticOutcome = (Trajectory, u64, u64, BTreeMap<u64, u64>);

fn mechanistic_trial<R: Rng>(
    config: &ExperimentConfig,
    times: &[f64],
    rng: &mut R,
) -> Result<MechanisticOutcome, HarnessError> {
    let (mut truth, mut store) = seed_store(config, rng)?;
    let mut vocab = VocabularyState::new(truth.terms());
    let mut events = config.deconstruct.clone();
    events.sort_by(|a, b| a.t.total_cmp(&b.t));

    let mut traj = Trajectory::new(config.s0);
    let mut pair_clicks: HashMap<(TermId, ObjectId), u64> = HashMap::new();
    let mut removed: HashSet<ObjectId> = HashSet::new();
    let (mut now, mut arrivals, mut clicks, mut violations) = (0.0, 0u64, 0u64, 0u64);
    let (mut next_sample, mut next_event) = (0, 0);

    loop {
        now += next_interarrival(rng, config.lambda);
        loop {
            let sample_t = times.get(next_sample).copied().filter(|t| *t < now);
            let event_t = events.get(next_event).map(|e| e.t).filter(|t| *t < now);
            match (sample_t, event_t) {
                (Some(s), e) if e.is_none_or(|e| s <= e) => {
                    traj.push(s, store.count_unexplored(&truth) as u64, clicks);
                    next_sample += 1;
                }
                (_, Some(_)) => {
                    let ev = events[next_event];
                    deconstruct_random(&mut store, &mut truth, &mut removed, ev.objects, rng);
                    next_event += 1;
                }
                _ => break,
            }
        }
        if now > config.horizon {
            break;
        }
        arrivals += 1;
        let query = generate_query(rng, &config.generator, &mut vocab)?.query;
        let mut model = PertinenceClicks::new(&truth, config.click_noise)?;
        let episode = match run_episode(&mut store, &query, &config.engine, &mut model, rng) {
            Ok(ep) => ep,
            Err(EngineError::NoObjects) => continue,
            Err(e) => return Err(e.into()),
        };
        violations += episode.presented.objects().filter(|o| removed.contains(o)).count() as u64;
        clicks += episode.feedback.clicked.len() as u64;
        for &o in &episode.feedback.clicked {
            for &t in query.terms() {
                *pair_clicks.entry((t, o)).or_default() += 1;
            }
        }
    }

    let mut histogram = BTreeMap::new();
    for tuple in store.tuples() {
        if tuple.riv >= store.threshold() {
            let n = pair_clicks.get(&(tuple.term, tuple.object)).copied().unwrap_or(0);
            *histogram.entry(n).or_default() += 1;
        }
    }
    Ok((traj, arrivals, violations, histogram))
}

fn deconstruct_random<R: Rng + ?Sized>(
    store: &mut IndexStore,
    truth: &mut GroundTruth,
    removed: &mut HashSet<ObjectId>,
    count: usize,
    rng: &mut R,
) {
    let victims = crate::policy::sample_ob(rng, store.objects(), count.min(store.object_count()))
        .expect("count is capped by the population");
    for o in victims {
        store.deconstruct(Scope::Object(o));
        truth.retire_object(o);
        removed.insert(o);
    }
}

/// Earliest sample time with `p > 0.9`.
pub fn detect_convergence(trajectory: &Trajectory) -> Option<f64> {
    trajectory
        .samples
        .iter()
        .find(|s| s.p > CONVERGENCE_P)
        .map(|s| s.t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    pub t: f64,
    pub mean: f64,
    pub variance: f64,
    pub mean_p: f64,
    pub theory_mean: Option<f64>,
    pub theory_variance: Option<f64>,
    /// `(mean - theory_mean) / sqrt(theory_variance / n)`, where that variance is positive.
    pub z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleReport {
    pub mode: Mode,
    pub s0: u64,
    /// The rate the theory columns were computed with: the configured one in
    /// abstract mode, the fitted one in mechanistic mode.
    pub theory_alpha: Option<f64>,
    /// Fit on the ensemble mean.
    pub alpha_hat: Option<AlphaEstimate>,
    pub rows: Vec<EnsembleRow>,
    pub trials: Vec<TrialResult>,
}

impl EnsembleReport {
    pub fn seeds(&self) -> usize {
        self.trials.len()
    }

    pub fn total_violations(&self) -> u64 {
        self.trials.iter().map(|t| t.violations).sum()
    }

    /// The same ensemble judged against a different rate.
    pub fn with_theory_alpha(&self, alpha: f64) -> Result<Self, HarnessError> {
        let model = DeathModel::new(self.s0, alpha)?;
        let n = self.trials.len() as f64;
        let mut out = self.clone();
        out.theory_alpha = Some(alpha);
        for row in &mut out.rows {
            fill_theory(row, &model, n)?;
        }
        Ok(out)
    }
}

fn fill_theory(row: &mut EnsembleRow, model: &DeathModel, n: f64) -> Result<(), OracleError> {
    let e = crate::oracle::expected_remaining(model, row.t)?;
    let v = crate::oracle::variance_remaining(model, row.t)?;
    row.theory_mean = Some(e);
    row.theory_variance = Some(v);
    row.z = (v > 0.0).then(|| (row.mean - e) / (v / n).sqrt());
    Ok(())
}

pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<EnsembleReport, HarnessError> {
    run_monte_carlo_at(config, &config.sample_times())
}

/// Runs every seed in parallel and aggregates per sample time.
pub fn run_monte_carlo_at(config: &ExperimentConfig, times: &[f64]) -> Result<EnsembleReport, HarnessError> {
    if config.seeds.len() < 2 {
        return Err(HarnessError::TooFewSeeds(config.seeds.len()));
    }
    config.validate()?;
    let trials: Vec<TrialResult> = config
        .seeds
        .par_iter()
        .map(|&seed| run_trial_detailed(config, seed, times))
        .collect::<Result<_, _>>()?;
    aggregate(config.mode, config.s0, config.alpha, trials)
}

/// Builds an ensemble report from finished trials.
pub fn aggregate(
    mode: Mode,
    s0: u64,
    alpha: Option<f64>,
    trials: Vec<TrialResult>,
) -> Result<EnsembleReport, HarnessError> {
    let first = trials.first().ok_or(HarnessError::Empty)?;
    let times: Vec<f64> = first.trajectory.times().collect();
    if times.is_empty() {
        return Err(HarnessError::Empty);
    }
    for trial in &trials {
        if !trial.trajectory.times().eq(times.iter().copied()) {
            return Err(HarnessError::Divergent(trial.seed));
        }
    }
    let n = trials.len() as f64;
    let mut rows: Vec<EnsembleRow> = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let values: Vec<f64> = trials
                .iter()
                .map(|tr| tr.trajectory.samples[i].remaining as f64)
                .collect();
            let mean = values.iter().sum::<f64>() / n;
            let variance = if n > 1.0 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let mean_p = trials.iter().map(|tr| tr.trajectory.samples[i].p).sum::<f64>() / n;
            EnsembleRow {
                t,
                mean,
                variance,
                mean_p,
                theory_mean: None,
                theory_variance: None,
                z: None,
            }
        })
        .collect();

    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.mean > 0.0)
        .map(|r| (r.t, (r.mean / s0 as f64).ln()))
        .collect();
    let alpha_hat = fit_log_linear(&points).ok();
    let theory_alpha = match mode {
        Mode::Abstract => alpha,
        Mode::Mechanistic => alpha_hat.map(|a| a.alpha).filter(|a| *a > 0.0),
    };
    if let Some(a) = theory_alpha {
        let model = DeathModel::new(s0, a)?;
        for row in &mut rows {
            fill_theory(row, &model, n)?;
        }
    }
    Ok(EnsembleReport {
        mode,
        s0,
        theory_alpha,
        alpha_hat,
        rows,
        trials,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub pass: bool,
    /// Share of sample times with a defined z inside `|z| <= 3`.
    pub z_within: Option<f64>,
    pub failures: Vec<String>,
    pub table: String,
}

/// Judges a report against the acceptance bands and renders the
/// simulation-versus-theory table.
///
/// Abstract mode passes when at least 99% of defined z-scores satisfy
/// `|z| <= 3`. Mechanistic mode passes when every seed converged, the fitted
/// rate is positive and no deconstructed object was ever presented.
pub fn compare_with_theory(report: &EnsembleReport) -> Result<Comparison, HarnessError> {
    if report.rows.is_empty() || report.trials.is_empty() {
        return Err(HarnessError::Empty);
    }
    let zs: Vec<f64> = report.rows.iter().filter_map(|r| r.z).collect();
    let z_within = (!zs.is_empty())
        .then(|| zs.iter().filter(|z| z.abs() <= 3.0).count() as f64 / zs.len() as f64);

    let mut failures = Vec::new();
    match report.mode {
        Mode::Abstract => match z_within {
            Some(f) if f >= 0.99 => {}
            Some(f) => failures.push(format!(
                "only {:.1}% of sample times have |z| <= 3",
                100.0 * f
            )),
            None => failures.push("no sample time has a positive theoretical variance".into()),
        },
        Mode::Mechanistic => {
            for trial in &report.trials {
                if trial.convergence.is_none() {
                    failures.push(format!("seed {} never reached p > {CONVERGENCE_P}", trial.seed));
                }
            }
            match report.alpha_hat {
                Some(a) if a.alpha > 0.0 => {}
                Some(a) => failures.push(format!("fitted alpha {} is not positive", a.alpha)),
                None => failures.push("alpha could not be fitted".into()),
            }
            let v = report.total_violations();
            if v > 0 {
                failures.push(format!("{v} presentations of deconstructed objects"));
            }
        }
    }

    let mut table = String::from("t_days  sim_mean  theory_mean  sim_var  theory_var  z\n");
    for r in &report.rows {
        let opt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |v| format!("{v:.p$}"));
        let _ = writeln!(
            table,
            "{:.2}  {:.2}  {}  {:.2}  {}  {}",
            r.t,
            r.mean,
            opt(r.theory_mean, 2),
            r.variance,
            opt(r.theory_variance, 2),
            opt(r.z, 3)
        );
    }
    Ok(Comparison {
        pass: failures.is_empty(),
        z_within,
        failures,
        table,
    })
}

/// Writes per-seed trajectories, the ensemble table, the click histogram and
/// a summary into `dir`. Returns the written paths.
pub fn emit_outputs(report: &EnsembleReport, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| HarnessError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<(), HarnessError> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io(&path))?;
        written.push(path);
        Ok(())
    };

    for trial in &report.trials {
        put(format!("trajectory_seed_{}.csv", trial.seed), trial.trajectory.to_csv_string())?;
    }

    let mut ensemble = String::from("t_days,mean_remaining,var_remaining,mean_p,theory_mean,theory_var,z\n");
    for r in &report.rows {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
        let _ = writeln!(
            ensemble,
            "{:.6},{:.6},{:.6},{:.6},{},{},{}",
            r.t,
            r.mean,
            r.variance,
            r.mean_p,
            opt(r.theory_mean),
            opt(r.theory_variance),
            opt(r.z)
        );
    }
    put("ensemble.csv".into(), ensemble)?;

    let mut histogram = String::from("seed,clicks,indexes\n");
    for trial in &report.trials {
        for (clicks, count) in &trial.click_histogram {
            let _ = writeln!(histogram, "{},{clicks},{count}", trial.seed);
        }
    }
    put("click_histogram.csv".into(), histogram)?;

    put("summary.txt".into(), summary_text(report)?)?;
    Ok(written)
}

fn summary_text(report: &EnsembleReport) -> Result<String, HarnessError> {
    let cmp = compare_with_theory(report)?;
    let mut s = String::new();
    let mode = match report.mode {
        Mode::Abstract => "abstract",
        Mode::Mechanistic => "mechanistic",
    };
    let _ = writeln!(s, "mode: {mode}");
    let _ = writeln!(s, "s0: {}", report.s0);
    let _ = writeln!(s, "seeds: {}", report.seeds());
    if let Some(a) = report.theory_alpha {
        let _ = writeln!(s, "theory alpha: {a:.6}");
    }
    match report.alpha_hat {
        Some(AlphaEstimate { alpha, std_error: Some(se), .. }) => {
            let _ = writeln!(s, "alpha_hat: {alpha:.6} (se {se:.6})");
        }
        Some(AlphaEstimate { alpha, .. }) => {
            let _ = writeln!(s, "alpha_hat: {alpha:.6}");
        }
        None => {
            let _ = writeln!(s, "alpha_hat: none");
        }
    }
    if let Some(f) = cmp.z_within {
        let _ = writeln!(s, "sample times with |z| <= 3: {:.1}%", 100.0 * f);
    }
    let _ = writeln!(s, "deconstruction violations: {}", report.total_violations());
    let _ = writeln!(s, "\nseed  arrivals  converged_at  alpha_hat");
    for t in &report.trials {
        let conv = t.convergence.map_or("never".to_string(), |c| format!("{c:.2}"));
        let ah = t.alpha_hat.map_or("-".to_string(), |a| format!("{:.6}", a.alpha));
        let _ = writeln!(s, "{}  {}  {conv}  {ah}", t.seed, t.arrivals);
    }
    let _ = writeln!(s, "\n{}", cmp.table);
    let _ = writeln!(s, "result: {}", if cmp.pass { "pass" } else { "fail" });
    for f in &cmp.failures {
        let _ = writeln!(s, "  {f}");
    }
    Ok(s)
}
