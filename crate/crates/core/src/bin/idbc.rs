use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use idbc::channel::Channel;
use idbc::container::{self, AnyCode};
use idbc::eval::EvalMode;
use idbc::harness::{self, ExperimentConfig, SchemeParams};
use idbc::info::{capacity, region_membership, OptimizerOptions, RegionKind, RegionQuery};
use idbc::lemmas::{self, LemmaConfig};
use idbc::{Error, Result};

/// Exit status for sweeps with unfinished points and for failed lemma checks.
const INCOMPLETE: u8 = 3;

#[derive(Parser)]
#[command(name = "idbc", version, about = "Identification codes over DMCs and broadcast channels")]
struct Cli {
    /// Root seed; replaces the config's seed list where one is used.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output-space budget for exact evaluation.
    #[arg(long, global = true)]
    budget_states: Option<u64>,
    /// Output file; stdout when absent (for simulate, the CSV path).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "IDBC_WORKERS", global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Capacity of a DMC, or of each marginal of a broadcast channel.
    Capacity {
        channel: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Membership of a rate tuple in a capacity region.
    Region {
        channel: PathBuf,
        #[arg(long)]
        kind: RegionKind,
        /// Comma-separated rates.
        #[arg(long, value_delimiter = ',')]
        query: Vec<f64>,
        /// Auxiliary alphabet size for the common-randomness kind
        /// (defaults to |X| + 1).
        #[arg(long)]
        u_size: Option<usize>,
    },
    /// Builds the code of one grid point and writes its container.
    BuildCode {
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        point: usize,
    },
    /// Runs a sweep and writes the CSV plus its JSON sidecar.
    Simulate { config: PathBuf },
    /// Runs the lemma checks of a lemma config.
    VerifyLemmas { config: PathBuf },
}

#[derive(Serialize)]
struct CapacityOut {
    receiver: String,
    capacity: f64,
    upper: f64,
    pmf: Vec<f64>,
    iterations: usize,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn with_overrides(mut cfg: ExperimentConfig, cli: &Cli) -> ExperimentConfig {
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    if let Some(b) = cli.budget_states {
        cfg.mode = match cfg.mode {
            EvalMode::Exact { .. } => EvalMode::Exact { budget_states: b },
            EvalMode::Auto { trials, seed, .. } => EvalMode::Auto {
                budget_states: b,
                trials,
                seed,
            },
            m => m,
        };
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    cfg
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Capacity { channel, tol } => {
            let ch = Channel::load(channel)?;
            let marginals = match &ch {
                Channel::Dmc(w) => vec![("x".to_string(), w.clone())],
                Channel::Bc2(b) => vec![("y".into(), b.marginal_y().clone()), ("z".into(), b.marginal_z().clone())],
                Channel::Bc3(b) => (0..3).map(|k| ((k + 1).to_string(), b.marginal(k).clone())).collect(),
            };
            let mut rows = Vec::new();
            for (name, w) in marginals {
                let c = capacity(&w, *tol, 100_000)?;
                rows.push(CapacityOut {
                    receiver: name,
                    capacity: c.capacity,
                    upper: c.upper,
                    pmf: c.pmf.probs().to_vec(),
                    iterations: c.iterations,
                });
            }
            emit(cli.out.as_deref(), &json(&rows)?)?;
            Ok(true)
        }
        Command::Region {
            channel,
            kind,
            query,
            u_size,
        } => {
            let ch = Channel::load(channel)?;
            let mut q = RegionQuery::new(*kind, query);
            if *kind == RegionKind::CommonRandomness {
                q.u_size = Some(u_size.unwrap_or(ch.input_size() + 1));
            }
            let mut opts = OptimizerOptions::default();
            if let Some(s) = cli.seed {
                opts.seed = s;
            }
            let a = region_membership(&q, &ch, &opts)?;
            emit(cli.out.as_deref(), &json(&a)?)?;
            Ok(true)
        }
        Command::BuildCode { config, point } => {
            let cfg = ExperimentConfig::load(config)?;
            let ch = cfg.load_channel()?;
            harness::validate_config(&cfg, &ch)?;
            let p = cfg
                .points()
                .into_iter()
                .nth(*point)
                .ok_or_else(|| Error::Config(format!("no grid point {point}")))?;
            let seed = cli
                .seed
                .or_else(|| cfg.seeds.first().copied())
                .ok_or_else(|| Error::Config("no seed given".into()))?;
            let pmf = match &cfg.input_pmf {
                Some(v) => idbc::channel::Pmf::new(v.clone())?,
                None => idbc::channel::Pmf::uniform(ch.input_size()),
            };
            let params = SchemeParams::new(&cfg, &p, &pmf, harness::code_seed(cfg.scheme, p.index, seed))?;
            let code: AnyCode = params.build(&ch)?;
            emit(cli.out.as_deref(), &(container::write_code(&code)? + "\n"))?;
            Ok(true)
        }
        Command::Simulate { config } => {
            let cfg = with_overrides(ExperimentConfig::load(config)?, cli);
            let outcome = harness::run_sweep(&cfg)?;
            let summary = harness::summarize(&outcome.records);
            if cfg.out.is_none() {
                print!("{}", json(&summary)?);
            }
            eprintln!(
                "{} records ({} computed), {} incomplete",
                outcome.records.len(),
                outcome.computed,
                outcome.records.iter().filter(|r| r.status != harness::Status::Ok).count()
            );
            Ok(outcome.all_completed())
        }
        Command::VerifyLemmas { config } => {
            let mut cfg = LemmaConfig::load(config)?;
            if let Some(s) = cli.seed {
                cfg.seeds = vec![s];
            }
            if cli.out.is_some() {
                cfg.out = cli.out.clone();
            }
            let report = lemmas::verify_lemmas(&cfg)?;
            if cfg.out.is_none() {
                print!("{}", json(&report)?);
            }
            Ok(report.all_pass())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.workers.filter(|&w| w > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("idbc: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(INCOMPLETE),
        Err(e) => {
            eprintln!("idbc: {e}");
            ExitCode::FAILURE
        }
    }
}
