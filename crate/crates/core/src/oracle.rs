//! Pure-death model of index discovery: closed forms, their inverses, a
//! brute-force simulator and a log-linear rate estimator.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("s0 must be at least 1")]
    ZeroPopulation,
    #[error("alpha must be a positive real, got {0}")]
    InvalidAlpha(f64),
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("proportion must lie in [0, 1), got {0}")]
    InvalidProportion(f64),
    #[error("sample time {0} outside [0, horizon]")]
    SampleOutOfRange(f64),
    #[error("sample times must be strictly increasing")]
    UnsortedSamples,
    #[error("need at least two samples with remaining > 0, got {0}")]
    TooFewPoints(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeathModel {
    s0: u64,
    alpha: f64,
}

impl DeathModel {
    pub fn new(s0: u64, alpha: f64) -> Result<Self, OracleError> {
        if s0 == 0 {
            return Err(OracleError::ZeroPopulation);
        }
        check_alpha(alpha)?;
        Ok(Self { s0, alpha })
    }

    pub fn s0(&self) -> u64 {
        self.s0
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

fn check_alpha(alpha: f64) -> Result<(), OracleError> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(OracleError::InvalidAlpha(alpha))
    }
}

fn check_time(t: f64) -> Result<(), OracleError> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(OracleError::NegativeTime(t))
    }
}

/// `E(S_t) = S0 e^{-alpha t}`.
pub fn expected_remaining(model: &DeathModel, t: f64) -> Result<f64, OracleError> {
    check_time(t)?;
    Ok(model.s0 as f64 * (-model.alpha * t).exp())
}

/// `V(S_t) = S0 e^{-alpha t} (1 - e^{-alpha t})`.
pub fn variance_remaining(model: &DeathModel, t: f64) -> Result<f64, OracleError> {
    check_time(t)?;
    let survive = (-model.alpha * t).exp();
    Ok(model.s0 as f64 * survive * -(-model.alpha * t).exp_m1())
}

/// `p = 1 - e^{-alpha ts}`, the share of initial unexplored indexes exposed by `ts`.
pub fn exposure_proportion(alpha: f64, ts: f64) -> Result<f64, OracleError> {
    check_alpha(alpha)?;
    check_time(ts)?;
    Ok(-(-alpha * ts).exp_m1())
}

/// Days until the exposure proportion reaches `p`.
pub fn time_to_proportion(alpha: f64, p: f64) -> Result<f64, OracleError> {
    check_alpha(alpha)?;
    if !(0.0..1.0).contains(&p) {
        return Err(OracleError::InvalidProportion(p));
    }
    Ok(-(-p).ln_1p() / alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub remaining: u64,
    pub p: f64,
    pub clicks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub s0: u64,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn new(s0: u64) -> Self {
        Self { s0, samples: Vec::new() }
    }

    /// Appends a sample, deriving `p` from `s0`.
    pub fn push(&mut self, t: f64, remaining: u64, clicks: u64) {
        let p = if self.s0 == 0 {
            1.0
        } else {
            (self.s0 as f64 - remaining as f64) / self.s0 as f64
        };
        self.samples.push(TrajectorySample { t, remaining, p, clicks });
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub const CSV_HEADER: &'static str = "t_days,remaining,p,clicks";

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for s in &self.samples {
            writeln!(out, "{:.6},{},{:.6},{}", s.t, s.remaining, s.p, s.clicks)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

fn check_sample_times(horizon: f64, sample_times: &[f64]) -> Result<(), OracleError> {
    for (i, &t) in sample_times.iter().enumerate() {
        if !(0.0..=horizon).contains(&t) {
            return Err(OracleError::SampleOutOfRange(t));
        }
        if i > 0 && sample_times[i - 1] >= t {
            return Err(OracleError::UnsortedSamples);
        }
    }
    Ok(())
}

/// Draws `count` independent `Exp(alpha)` times, sorted ascending.
pub fn exposure_times<R: Rng + ?Sized>(rng: &mut R, alpha: f64, count: u64) -> Vec<f64> {
    let mut times: Vec<f64> = (0..count)
        .map(|_| crate::sim::next_interarrival(rng, alpha))
        .collect();
    times.sort_unstable_by(f64::total_cmp);
    times
}

/// Simulates `s0` independent exposure clocks and counts the survivors at
/// each sample time. `clicks` is the number of exposures so far.
pub fn pure_death_oracle<R: Rng + ?Sized>(
    model: &DeathModel,
    horizon: f64,
    sample_times: &[f64],
    rng: &mut R,
) -> Result<Trajectory, OracleError> {
    check_time(horizon)?;
    check_sample_times(horizon, sample_times)?;
    let times = exposure_times(rng, model.alpha, model.s0);
    let mut traj = Trajectory::new(model.s0);
    let mut exposed = 0usize;
    for &t in sample_times {
        while exposed < times.len() && times[exposed] <= t {
            exposed += 1;
        }
        traj.push(t, model.s0 - exposed as u64, exposed as u64);
    }
    Ok(traj)
}

/// Fraction of `runs` single-index trials still unexposed at `t`.
pub fn survival_fraction<R: Rng + ?Sized>(rng: &mut R, alpha: f64, t: f64, runs: u64) -> f64 {
    let survived = (0..runs)
        .filter(|_| crate::sim::next_interarrival(rng, alpha) > t)
        .count();
    survived as f64 / runs as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    /// Standard error of the slope; absent when only two points were usable.
    pub std_error: Option<f64>,
    pub points: usize,
}

/// Least-squares slope of `ln(remaining / s0)` against `t`, negated.
///
/// Samples with `remaining = 0` are dropped. The fit has a free intercept.
pub fn estimate_alpha(trajectory: &Trajectory) -> Result<AlphaEstimate, OracleError> {
    let s0 = trajectory.s0 as f64;
    let points: Vec<(f64, f64)> = trajectory
        .samples
        .iter()
        .filter(|s| s.remaining > 0)
        .map(|s| (s.t, (s.remaining as f64 / s0).ln()))
        .collect();
    fit_log_linear(&points)
}

pub(crate) fn fit_log_linear(points: &[(f64, f64)]) -> Result<AlphaEstimate, OracleError> {
    let n = points.len();
    if n < 2 {
        return Err(OracleError::TooFewPoints(n));
    }
    let nf = n as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    if sxx == 0.0 {
        return Err(OracleError::TooFewPoints(1));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_t;
    let std_error = (n > 2).then(|| {
        let ssr: f64 = points
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).powi(2))
            .sum();
        (ssr / (nf - 2.0) / sxx).sqrt()
    });
    Ok(AlphaEstimate {
        alpha: -slope,
        std_error,
        points: n,
    })
}
