//! Implementations of the `simulate` and `oracle` subcommands.

use std::fmt::Write as _;
use std::path::Path;

use evoindex::config::{load_config, parse_seed_list, ConfigError};
use evoindex::harness::{compare_with_theory, emit_outputs, run_monte_carlo};
use evoindex::oracle::{
    expected_remaining, exposure_proportion, time_to_proportion, variance_remaining, DeathModel,
};

/// Process exit codes.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Parses a positive rate written as a decimal or a fraction such as `1/20`.
pub fn parse_rate(s: &str) -> Result<f64, String> {
    let value = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
            let d: f64 = d.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
            n / d
        }
        None => s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?,
    };
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(format!("{s} must be positive"))
    }
}

/// The closed-form table at one-day resolution followed by the t90 line.
pub fn oracle_table(alpha: f64, s0: u64, horizon: f64) -> Result<String, String> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(format!("horizon {horizon} must be positive"));
    }
    let model = DeathModel::new(s0, alpha).map_err(|e| e.to_string())?;
    let mut out = String::from("t_days,expected_remaining,variance_remaining,p\n");
    let days = horizon.floor() as u64;
    for d in 0..=days {
        let t = d as f64;
        let e = expected_remaining(&model, t).map_err(|e| e.to_string())?;
        let v = variance_remaining(&model, t).map_err(|e| e.to_string())?;
        let p = exposure_proportion(alpha, t).map_err(|e| e.to_string())?;
        let _ = writeln!(out, "{d},{e:.3},{v:.3},{p:.6}");
    }
    let t90 = time_to_proportion(alpha, 0.9).map_err(|e| e.to_string())?;
    let _ = writeln!(out, "t90: {t90:.2} days");
    Ok(out)
}

/// Runs an experiment file. Returns the exit code and what to print.
pub fn simulate(config_path: &Path, seeds: Option<&str>, out_dir: &Path) -> (i32, String) {
    let mut config = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => return (EXIT_USAGE, describe(config_path, &e)),
    };
    if let Some(list) = seeds {
        match parse_seed_list(list) {
            Ok(s) => config.seeds = s,
            Err(e) => return (EXIT_USAGE, format!("--seeds: {e}")),
        }
        if let Err(e) = config.validate() {
            return (EXIT_USAGE, format!("--seeds: {e}"));
        }
    }
    let report = match run_monte_carlo(&config) {
        Ok(r) => r,
        Err(e) => return (EXIT_USAGE, e.to_string()),
    };
    let cmp = match compare_with_theory(&report) {
        Ok(c) => c,
        Err(e) => return (EXIT_FAIL, e.to_string()),
    };
    let written = match emit_outputs(&report, out_dir) {
        Ok(w) => w,
        Err(e) => return (EXIT_FAIL, e.to_string()),
    };
    let mut msg = cmp.table.clone();
    for path in &written {
        let _ = writeln!(msg, "wrote {}", path.display());
    }
    if cmp.pass {
        msg.push_str("pass\n");
        (EXIT_PASS, msg)
    } else {
        let _ = writeln!(msg, "fail: {}", cmp.failures.join("; "));
        (EXIT_FAIL, msg)
    }
}

fn describe(path: &Path, e: &ConfigError) -> String {
    format!("{}: {e}", path.display())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_accept_fractions() {
        assert_eq!(parse_rate("1/20").unwrap(), 0.05);
        assert_eq!(parse_rate("0.25").unwrap(), 0.25);
        assert!(parse_rate("0").is_err());
        assert!(parse_rate("-1/3").is_err());
        assert!(parse_rate("x").is_err());
    }

    #[test]
    fn table_ends_with_t90() {
        let t = oracle_table(1.0 / 20.0, 500_000, 3.0).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1], "0,500000.000,0.000,0.000000");
        assert_eq!(lines[5], "t90: 46.05 days");
        assert!(oracle_table(1.0 / 40.0, 10, 1.0).unwrap().ends_with("t90: 92.10 days\n"));
        assert!(oracle_table(0.1, 0, 1.0).is_err());
        assert!(oracle_table(0.1, 10, 0.0).is_err());
    }
}
