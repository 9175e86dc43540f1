use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use gsgd_cli::commands;
use gsgd_cli::config::{
    parse_latency, parse_rank_by, parse_rmsprop_init, Algo, ExperimentConfig,
};

#[derive(Parser)]
#[command(
    name = "gsgd",
    about = "Parallel SGD training with a parameter server and guided delay compensation",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one algorithm on one dataset for `--runs` seeded repetitions.
    Run(RunArgs),
    /// Compare algorithms across datasets (summaries, Wilcoxon p-values, win counts).
    Bench(BenchArgs),
    /// Mean accuracy per delay tolerance, with c = rho (rho = 0 means sequential).
    SweepRho(SweepArgs),
    /// Remove IQR outliers from a dataset CSV.
    Filter(FilterArgs),
}

/// Flags shared by the experiment commands. Precedence: CLI > config file >
/// benchmark defaults.
#[derive(Args)]
struct CommonArgs {
    /// key=value config file applied before the CLI flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algo: Option<String>,
    /// Seeded repetitions (seed, seed+1, ...).
    #[arg(long)]
    runs: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<u64>,
    /// Cap on applied gradients (replays never count).
    #[arg(long = "max-updates")]
    max_updates: Option<u64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Delay tolerance: replay period, ledger capacity, and default c.
    #[arg(long)]
    rho: Option<u64>,
    /// Worker count; defaults to rho (the paper's c = rho convention).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    #[arg(long = "replay-cap")]
    replay_cap: Option<usize>,
    #[arg(long = "test-fraction")]
    test_fraction: Option<f64>,
    #[arg(long = "validation-fraction")]
    validation_fraction: Option<f64>,
    /// Stratify the splits by class.
    #[arg(long)]
    stratify: bool,
    /// simulated (deterministic) or concurrent (real threads).
    #[arg(long)]
    scheduler: Option<String>,
    /// Per-cycle worker latency range in virtual ticks, as lo:hi.
    #[arg(long)]
    latency: Option<String>,
    /// RMSprop first-step accumulator: paper or square.
    #[arg(long = "rmsprop-init")]
    rmsprop_init: Option<String>,
    /// Replay ranking key: verif or self.
    #[arg(long = "rank-by")]
    rank_by: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// First CSV row is a header.
    #[arg(long = "has-header")]
    has_header: bool,
    /// 0-based label column (default: last).
    #[arg(long = "label-col")]
    label_col: Option<usize>,
}

impl CommonArgs {
    fn resolve(&self, dataset: Option<&PathBuf>) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(d) = dataset {
            cfg.dataset = d.clone();
        }
        if let Some(v) = &self.algo {
            cfg.algo = v.parse()?;
        }
        if let Some(v) = self.runs {
            cfg.runs = v;
        }
        if let Some(v) = self.seed {
            cfg.base_seed = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.max_updates {
            cfg.max_updates = Some(v);
        }
        if let Some(v) = self.eta {
            cfg.eta = v;
        }
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = Some(v);
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.replay_cap {
            cfg.replay_cap = v;
        }
        if let Some(v) = self.test_fraction {
            cfg.test_fraction = v;
        }
        if let Some(v) = self.validation_fraction {
            cfg.validation_fraction = v;
        }
        if self.stratify {
            cfg.stratify = true;
        }
        if let Some(v) = &self.scheduler {
            cfg.scheduler = v.parse()?;
        }
        if let Some(v) = &self.latency {
            cfg.latency = parse_latency(v)?;
        }
        if let Some(v) = &self.rmsprop_init {
            cfg.rmsprop_init = parse_rmsprop_init(v)?;
        }
        if let Some(v) = &self.rank_by {
            cfg.rank_by = parse_rank_by(v)?;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if self.has_header {
            cfg.has_header = true;
        }
        if let Some(v) = self.label_col {
            cfg.label_col = Some(v);
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated dataset CSV paths.
    #[arg(long, value_delimiter = ',')]
    datasets: Vec<PathBuf>,
    /// Comma-separated algorithm names.
    #[arg(long, value_delimiter = ',')]
    algos: Vec<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Comma-separated rho values; 0 means the sequential baseline.
    #[arg(long = "rho-values", value_delimiter = ',')]
    rho_values: Vec<u64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// IQR fence factor.
    #[arg(long, default_value_t = 3.0)]
    factor: f64,
    #[arg(long = "has-header")]
    has_header: bool,
    #[arg(long = "label-col")]
    label_col: Option<usize>,
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Run(args) => {
            let cfg = args.common.resolve(args.dataset.as_ref())?;
            commands::cmd_run(&cfg)
        }
        Cmd::Bench(args) => {
            let cfg = args.common.resolve(None)?;
            let algos = args
                .algos
                .iter()
                .map(|s| s.parse::<Algo>())
                .collect::<Result<Vec<_>>>()?;
            commands::cmd_bench(&cfg, &args.datasets, &algos)
        }
        Cmd::SweepRho(args) => {
            let cfg = args.common.resolve(args.dataset.as_ref())?;
            commands::cmd_sweep_rho(&cfg, &args.rho_values)
        }
        Cmd::Filter(args) => commands::cmd_filter(
            &args.input,
            &args.output,
            args.factor,
            args.has_header,
            args.label_col,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
