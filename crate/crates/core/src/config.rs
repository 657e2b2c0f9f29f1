//! Experiment configuration files.
//!
//! A config is flat `key = value` text in TOML syntax. Dotted keys such as
//! `truth.terms` address the ground-truth graph.
//!
//! | key | type | default |
//! |---|---|---|
//! | `mode` | `"abstract"` or `"mechanistic"` | required |
//! | `s0` | integer | required |
//! | `alpha` | real, abstract mode only | required in abstract mode |
//! | `lambda` | real | required |
//! | `horizon` | real | required |
//! | `sample_interval` | real | 5 |
//! | `seeds` | integer array | required |
//! | `m` | integer | 10 |
//! | `beta` | real or `"uniform"` | 0.8 |
//! | `ordering` | `completely_random`, `sectionally_random`, `partially_random`, `non_random` | `non_random` |
//! | `weight` | real | 1.0 |
//! | `penalty_scale` | real | 1.0 |
//! | `gamma` | real | 0.9 |
//! | `case_mix` | three reals | `[0.1, 0.7, 0.2]` |
//! | `terms_per_query` | two integers | `[1, 3]` |
//! | `truth.terms` | integer | required in mechanistic mode |
//! | `truth.objects` | integer | required in mechanistic mode |
//! | `truth.degree` | integer | `s0 / truth.objects` |
//! | `seed_fraction` | real | 1.0 |
//! | `click_noise` | real | 0.0 |
//! | `deconstruct` | array of `{ t = real, objects = integer }` | empty |

use std::path::Path;

use thiserror::Error;
use toml::{Table, Value};

use crate::engine::EngineConfig;
use crate::harness::{DeconstructEvent, ExperimentConfig, Mode, TruthConfig};
use crate::policy::{BetaPolicy, OrderingStrategy};
use crate::sim::QueryGenerator;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("line {line}: key `{key}`: {message}")]
    Invalid {
        key: String,
        line: usize,
        message: String,
    },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("{0}")]
    Rejected(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

const KEYS: &[&str] = &[
    "mode",
    "s0",
    "alpha",
    "lambda",
    "horizon",
    "sample_interval",
    "seeds",
    "m",
    "beta",
    "ordering",
    "weight",
    "penalty_scale",
    "gamma",
    "case_mix",
    "terms_per_query",
    "truth",
    "seed_fraction",
    "click_noise",
    "deconstruct",
];

const TRUTH_KEYS: &[&str] = &["terms", "objects", "degree"];

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&src)
}

pub fn parse_config(src: &str) -> Result<ExperimentConfig, ConfigError> {
    let table: Table = src.parse().map_err(|e: toml::de::Error| ConfigError::Syntax {
        line: e.span().map_or(1, |s| line_at(src, s.start)),
        message: e.message().to_string(),
    })?;
    let r = Reader { src, table: &table };

    for key in table.keys() {
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { key: key.clone(), line: r.line_of(key) });
        }
    }

    let mode = match r.req_str("mode")?.as_str() {
        "abstract" => Mode::Abstract,
        "mechanistic" => Mode::Mechanistic,
        other => return Err(r.invalid("mode", format!("expected abstract or mechanistic, got {other:?}"))),
    };
    let alpha = r.opt_f64("alpha")?;
    if mode == Mode::Abstract && alpha.is_none() {
        return Err(ConfigError::MissingKey("alpha".into()));
    }

    let defaults = ExperimentConfig::default();
    let engine_defaults = EngineConfig::default();
    let beta_policy = match r.table.get("beta") {
        None => engine_defaults.beta_policy,
        Some(Value::String(s)) if s == "uniform" => BetaPolicy::UniformRandom,
        Some(v) => BetaPolicy::Deterministic(
            as_f64(v).ok_or_else(|| r.invalid("beta", "expected a real or \"uniform\"".into()))?,
        ),
    };
    let ordering = match r.opt_str("ordering")? {
        None => engine_defaults.ordering,
        Some(s) => s
            .parse::<OrderingStrategy>()
            .map_err(|e| r.invalid("ordering", e.to_string()))?,
    };
    let engine = EngineConfig {
        m: r.opt_u64("m")?.map_or(engine_defaults.m, |v| v as usize),
        beta_policy,
        ordering,
        weight: r.opt_f64("weight")?.unwrap_or(engine_defaults.weight),
        penalty_scale: r.opt_f64("penalty_scale")?.unwrap_or(engine_defaults.penalty_scale),
        gamma: r.opt_f64("gamma")?.unwrap_or(engine_defaults.gamma),
    };

    let mut generator = QueryGenerator::default();
    if let Some(mix) = r.opt_f64_array("case_mix")? {
        generator.case_mix = mix
            .try_into()
            .map_err(|_| r.invalid("case_mix", "expected three weights".into()))?;
    }
    if let Some(range) = r.opt_u64_array("terms_per_query")? {
        let [lo, hi]: [u64; 2] = range
            .try_into()
            .map_err(|_| r.invalid("terms_per_query", "expected [min, max]".into()))?;
        generator.min_terms = lo as usize;
        generator.max_terms = hi as usize;
    }

    let truth = match r.table.get("truth") {
        None if mode == Mode::Mechanistic => return Err(ConfigError::MissingKey("truth.terms".into())),
        None => TruthConfig::default(),
        Some(Value::Table(t)) => {
            for key in t.keys() {
                if !TRUTH_KEYS.contains(&key.as_str()) {
                    let key = format!("truth.{key}");
                    return Err(ConfigError::UnknownKey { line: r.line_of(&key), key });
                }
            }
            let sub = |k: &str, required: bool| -> Result<Option<u32>, ConfigError> {
                let full = format!("truth.{k}");
                match t.get(k) {
                    None if required => Err(ConfigError::MissingKey(full)),
                    None => Ok(None),
                    Some(Value::Integer(i)) if (0..=i64::from(u32::MAX)).contains(i) => Ok(Some(*i as u32)),
                    Some(_) => Err(r.invalid(&full, "expected a non-negative integer".into())),
                }
            };
            let need = mode == Mode::Mechanistic;
            let fallback = TruthConfig::default();
            TruthConfig {
                terms: sub("terms", need)?.unwrap_or(fallback.terms),
                objects: sub("objects", need)?.unwrap_or(fallback.objects),
                degree: sub("degree", false)?,
            }
        }
        Some(_) => return Err(r.invalid("truth", "expected truth.terms, truth.objects, truth.degree".into())),
    };

    let deconstruct = match r.table.get("deconstruct") {
        None => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|item| {
                let t = item.get("t").and_then(as_f64);
                let n = item.get("objects").and_then(Value::as_integer).filter(|n| *n >= 0);
                match (t, n) {
                    (Some(t), Some(n)) => Ok(DeconstructEvent { t, objects: n as usize }),
                    _ => Err(r.invalid("deconstruct", "expected entries like { t = 20.0, objects = 50 }".into())),
                }
            })
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(r.invalid("deconstruct", "expected an array".into())),
    };

    let config = ExperimentConfig {
        mode,
        s0: r.req_u64("s0")?,
        alpha,
        lambda: r.req_f64("lambda")?,
        horizon: r.req_f64("horizon")?,
        sample_interval: r.opt_f64("sample_interval")?.unwrap_or(defaults.sample_interval),
        engine,
        generator,
        truth,
        seed_fraction: r.opt_f64("seed_fraction")?.unwrap_or(defaults.seed_fraction),
        click_noise: r.opt_f64("click_noise")?.unwrap_or(defaults.click_noise),
        deconstruct,
        seeds: r.opt_u64_array("seeds")?.ok_or_else(|| ConfigError::MissingKey("seeds".into()))?,
    };
    config
        .validate()
        .map_err(|e| ConfigError::Rejected(e.to_string()))?;
    Ok(config)
}

/// Parses a `1,2,3` seed list.
pub fn parse_seed_list(s: &str) -> Result<Vec<u64>, ConfigError> {
    s.split(',')
        .map(|p| {
            p.trim().parse::<u64>().map_err(|e| ConfigError::Invalid {
                key: "seeds".into(),
                line: 0,
                message: format!("{p:?}: {e}"),
            })
        })
        .collect()
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn line_at(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

struct Reader<'a> {
    src: &'a str,
    table: &'a Table,
}

impl Reader<'_> {
    /// First line defining `key`, or 0 when it cannot be located.
    fn line_of(&self, key: &str) -> usize {
        let (head, tail) = key.split_once('.').unwrap_or((key, ""));
        let mut section = String::new();
        for (i, line) in self.src.lines().enumerate() {
            let line = line.trim();
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((lhs, _)) = line.split_once('=') else { continue };
            let lhs: String = lhs.split('.').map(str::trim).collect::<Vec<_>>().join(".");
            let full = if section.is_empty() { lhs } else { format!("{section}.{lhs}") };
            if full == key || (tail.is_empty() && full.split('.').next() == Some(head)) {
                return i + 1;
            }
        }
        0
    }

    fn invalid(&self, key: &str, message: String) -> ConfigError {
        ConfigError::Invalid {
            key: key.to_string(),
            line: self.line_of(key),
            message,
        }
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.table
            .get(key)
            .map(|v| as_f64(v).ok_or_else(|| self.invalid(key, "expected a real number".into())))
            .transpose()
    }

    fn req_f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.opt_f64(key)?.ok_or_else(|| ConfigError::MissingKey(key.into()))
    }

    fn opt_u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.table
            .get(key)
            .map(|v| match v {
                Value::Integer(i) if *i >= 0 => Ok(*i as u64),
                _ => Err(self.invalid(key, "expected a non-negative integer".into())),
            })
            .transpose()
    }

    fn req_u64(&self, key: &str) -> Result<u64, ConfigError> {
        self.opt_u64(key)?.ok_or_else(|| ConfigError::MissingKey(key.into()))
    }

    fn opt_str(&self, key: &str) -> Result<Option<String>, ConfigError> {
        self.table
            .get(key)
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| self.invalid(key, "expected a string".into()))
            })
            .transpose()
    }

    fn req_str(&self, key: &str) -> Result<String, ConfigError> {
        self.opt_str(key)?.ok_or_else(|| ConfigError::MissingKey(key.into()))
    }

    fn opt_f64_array(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.table
            .get(key)
            .map(|v| {
                v.as_array()
                    .and_then(|a| a.iter().map(as_f64).collect::<Option<Vec<_>>>())
                    .ok_or_else(|| self.invalid(key, "expected an array of reals".into()))
            })
            .transpose()
    }

    fn opt_u64_array(&self, key: &str) -> Result<Option<Vec<u64>>, ConfigError> {
        self.table
            .get(key)
            .map(|v| {
                v.as_array()
                    .and_then(|a| {
                        a.iter()
                            .map(|x| x.as_integer().filter(|i| *i >= 0).map(|i| i as u64))
                            .collect::<Option<Vec<_>>>()
                    })
                    .ok_or_else(|| self.invalid(key, "expected an array of non-negative integers".into()))
            })
            .transpose()
    }
}
