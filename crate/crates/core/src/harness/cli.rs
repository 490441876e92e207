//! Command-line front end: `run`, `report` and `simulate`.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use super::{render_report, ProblemSpec, RunLog, RunLogWriter};
use crate::belief::{LogOddsLimit, NoiseModel};
use crate::engine::{run, RunConfig, RunError};
use crate::gateway::{ChatClient, TextProvider};
use crate::lab::{recovery_experiment, threshold_sweep, LabParams, LatentWorld, RecoveryStats};
use crate::operators::MockProvider;
use crate::sandbox::SandboxExecutor;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PROVIDER: i32 = 3;
pub const EXIT_EXECUTOR: i32 = 4;
pub const EXIT_CORRUPT_LOG: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "bace", version, about = "Co-evolve candidate programs and tests with belief-weighted selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve solutions for one problem and write a run log.
    Run(RunArgs),
    /// Render a tab-separated report from a run log.
    Report {
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run synthetic recovery experiments and print result tables.
    Simulate(SimulateArgs),
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON script for the offline provider; no network access is made.
    #[arg(long)]
    pub mock_provider: Option<PathBuf>,
    #[arg(long)]
    pub no_anchoring: bool,
    #[arg(long)]
    pub generations: Option<u32>,
    /// Run log path; defaults to `<problem id>.runlog.jsonl`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Directory for the on-disk execution cache.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Recovery,
    Adversarial,
    Sweep,
    All,
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub experiment: Experiment,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub seeds: u64,
    #[arg(long, default_value_t = 1)]
    pub rounds: usize,
    #[arg(long)]
    pub no_anchoring: bool,
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig, i32> {
    match path {
        Some(p) => RunConfig::from_file(p).map_err(|e| {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }),
        None => Ok(RunConfig::default()),
    }
}

fn exit_code(e: &RunError) -> i32 {
    match e {
        RunError::Config(_) | RunError::Problem(_) => EXIT_CONFIG,
        RunError::Provider(_) | RunError::Init(_) => EXIT_PROVIDER,
        RunError::Exec(_) => EXIT_EXECUTOR,
        RunError::Belief(_) => EXIT_FAILURE,
    }
}

fn cmd_run(args: RunArgs) -> i32 {
    let mut config = match load_config(args.config.as_ref()) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(g) = args.generations {
        config.generations = g;
    }
    if args.no_anchoring {
        config.anchoring_enabled = false;
    }
    if let Err(e) = config.validate() {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    let problem = match ProblemSpec::from_file(&args.problem) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };

    let provider: Box<dyn TextProvider> = match &args.mock_provider {
        Some(path) => match MockProvider::from_file(path) {
            Ok(m) => Box::new(m),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        },
        None => match ChatClient::new(config.provider.clone()) {
            Ok(c) => Box::new(c),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_PROVIDER;
            }
        },
    };
    let mut executor = SandboxExecutor::new(problem.candidate_runtime.clone(), config.limits);
    if let Some(dir) = &args.cache_dir {
        executor = match executor.with_cache_dir(dir) {
            Ok(e) => e,
            Err(e) => {
                eprintln!("error: cache dir {}: {e}", dir.display());
                return EXIT_EXECUTOR;
            }
        };
    }

    let log_path = args.log.clone().unwrap_or_else(|| PathBuf::from(format!("{}.runlog.jsonl", problem.id)));
    let mut writer = match RunLogWriter::create(&log_path) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: cannot create {}: {e}", log_path.display());
            return EXIT_FAILURE;
        }
    };
    writer.begin(&config, &problem);
    match run(&problem, &config, provider.as_ref(), &executor, &mut writer) {
        Ok(result) => {
            let digest = match writer.finish(&result) {
                Ok(d) => d,
                Err(e) => {
                    eprintln!("error: writing {}: {e}", log_path.display());
                    return EXIT_FAILURE;
                }
            };
            println!("problem\t{}", problem.id);
            println!("best\t{}\t{}", result.best_code.id, crate::engine::source_digest(&result.best_code.source));
            println!("belief\t{:.9}", result.best_code.belief.probability());
            println!("generations\t{}", result.generations.len());
            println!("passes_anchors\t{}", result.best_passes_anchors);
            println!("log\t{}\t{digest}", log_path.display());
            EXIT_OK
        }
        Err(e) => {
            let _ = writer.close();
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn cmd_report(log: PathBuf, out: Option<PathBuf>) -> i32 {
    let parsed = match RunLog::read(&log) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {}: {e}", log.display());
            return EXIT_CORRUPT_LOG;
        }
    };
    let text = render_report(&parsed);
    let written = match out {
        Some(path) => std::fs::write(&path, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    match written {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn stats_row(name: &str, s: &RecoveryStats) -> String {
    format!(
        "{name}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:.6}\t{:.6}\t{}",
        s.seeds,
        s.anchoring,
        s.rounds,
        s.map_accuracy,
        s.baseline_accuracy,
        s.mean_belief_correct,
        s.mean_belief_incorrect,
        s.anchor_violations
    )
}

fn cmd_simulate(args: SimulateArgs) -> i32 {
    let config = match load_config(args.config.as_ref()) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let params = LabParams {
        update: config.update_params(),
        b_init: config.b_init,
        anchoring: config.anchoring_enabled && !args.no_anchoring,
        rounds: args.rounds.max(1),
    };
    let seeds = config.seed..config.seed + args.seeds;
    let noise = config.evolved_noise;
    let want = |e: Experiment| args.experiment == e || args.experiment == Experiment::All;

    let mut recovery = Vec::new();
    if want(Experiment::Recovery) {
        recovery.push(("standard", LatentWorld::standard(noise)));
    }
    if want(Experiment::Adversarial) {
        recovery.push(("adversarial", LatentWorld::adversarial(noise)));
    }
    if !recovery.is_empty() {
        println!("world\tseeds\tanchoring\trounds\tmap_accuracy\tbaseline_accuracy\tmean_belief_correct\tmean_belief_incorrect\tanchor_violations");
        for (name, world) in &recovery {
            let stats =
                recovery_experiment(world, &params, seeds.clone()).expect("built-in worlds have a correct candidate");
            println!("{}", stats_row(name, &stats));
        }
    }
    if want(Experiment::Sweep) {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let mut noises = Vec::new();
        for &a in &grid {
            for &b in &grid {
                for &g in &grid {
                    if let Ok(n) = NoiseModel::new(a, b, g) {
                        noises.push(n);
                    }
                }
            }
        }
        let beliefs: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
        let rows = threshold_sweep(&noises, &beliefs, LogOddsLimit::new(config.max_log_odds).expect("validated"));
        let disagreements = rows.iter().filter(|r| !r.agrees()).count();
        if !recovery.is_empty() {
            println!();
        }
        println!("sweep_points\tdisagreements");
        println!("{}\t{disagreements}", rows.len());
    }
    EXIT_OK
}

/// Parses `args` and runs the chosen subcommand; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Report { log, out } => cmd_report(log, out),
        Command::Simulate(a) => cmd_simulate(a),
    }
}
