use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use evoindex::engine::EngineConfig;
use evoindex::policy::{BetaPolicy, OrderingStrategy};
use evoindex::sim::GroundTruth;
use evoindex_cli::commands::{self, EXIT_USAGE};
use evoindex_cli::gateway::{serve, Gateway, GatewayOptions};

#[derive(Parser)]
#[command(name = "evoindex", version, about = "Self-learning index evolution engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment described by a config file.
    Simulate {
        config: PathBuf,
        /// Comma-separated seeds; overrides the file.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the closed-form death model at one-day resolution.
    Oracle {
        /// Discovery rate per day, e.g. 0.05 or 1/20.
        #[arg(long, value_parser = commands::parse_rate)]
        alpha: f64,
        #[arg(long)]
        s0: u64,
        /// Days.
        #[arg(long)]
        horizon: f64,
    },
    /// Serve the JSON gateway.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Store snapshot to resume from and to save to.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Fresh store size when no snapshot or truth file is given.
        #[arg(long, default_value_t = 100)]
        objects: u32,
        /// Ground-truth pairs as `term_id,object_id` lines.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        m: usize,
        /// A grid value such as 0.8, or `uniform`.
        #[arg(long, default_value = "0.8")]
        beta: String,
        #[arg(long, default_value = "non_random")]
        ordering: OrderingStrategy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Simulate { config, seeds, out } => {
            let (code, msg) = commands::simulate(&config, seeds.as_deref(), &out);
            if code == 0 {
                print!("{msg}");
            } else {
                eprint!("{msg}");
                if !msg.ends_with('\n') {
                    eprintln!();
                }
            }
            ExitCode::from(code as u8)
        }
        Command::Oracle { alpha, s0, horizon } => match commands::oracle_table(alpha, s0, horizon) {
            Ok(table) => {
                print!("{table}");
                ExitCode::SUCCESS
            }
            Err(e) => usage(e),
        },
        Command::Serve {
            port,
            snapshot,
            objects,
            truth,
            m,
            beta,
            ordering,
            seed,
        } => {
            let beta_policy = if beta == "uniform" {
                BetaPolicy::UniformRandom
            } else {
                match beta.parse() {
                    Ok(b) => BetaPolicy::Deterministic(b),
                    Err(_) => return usage(format!("--beta {beta:?} is neither a number nor `uniform`")),
                }
            };
            let options = GatewayOptions {
                engine: EngineConfig {
                    m,
                    beta_policy,
                    ordering,
                    ..EngineConfig::default()
                },
                seed,
                snapshot: snapshot.clone(),
            };
            let truth = match truth.as_deref().map(std::fs::File::open) {
                None => None,
                Some(Ok(f)) => match GroundTruth::read_lines(std::io::BufReader::new(f)) {
                    Ok(t) => Some(t),
                    Err(e) => return usage(e),
                },
                Some(Err(e)) => return usage(e),
            };
            let gateway = match (&snapshot, truth) {
                (Some(path), truth) if path.exists() => Gateway::from_snapshot(path, truth, options),
                (_, Some(truth)) => Gateway::with_truth(truth, options),
                (_, None) => Gateway::with_objects(objects, options),
            };
            let gateway = match gateway {
                Ok(g) => Arc::new(g),
                Err(e) => return usage(e),
            };
            let addr = SocketAddr::from(([127, 0, 0, 1], port));
            let runtime = match tokio::runtime::Runtime::new() {
                Ok(r) => r,
                Err(e) => return usage(e),
            };
            match runtime.block_on(serve(gateway, addr)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
