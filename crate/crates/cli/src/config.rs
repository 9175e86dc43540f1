//! Experiment configuration: algorithm naming, benchmark defaults, the
//! flat key=value config-file format, and the CLI-over-file-over-defaults
//! merge. Every resolved run echoes its full config into the output
//! directory so it can be re-run identically.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use gsgd_core::engine::Mode;
use gsgd_core::guided::RankBy;
use gsgd_core::optim::{RmspropInit, Rule};

/// Benchmark algorithm names: a leading `g` selects the guided variant,
/// `s`/`a` select synchronous/asynchronous parameter-server modes.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Algo {
    Sgd,
    Gsgd,
    Ssgd,
    Gssgd,
    Asgd,
    Gasgd,
    Srmsprop,
    Gsrmsprop,
    Sadagrad,
    Gsadagrad,
}

impl Algo {
    pub const ALL: [Algo; 10] = [
        Algo::Sgd,
        Algo::Gsgd,
        Algo::Ssgd,
        Algo::Gssgd,
        Algo::Asgd,
        Algo::Gasgd,
        Algo::Srmsprop,
        Algo::Gsrmsprop,
        Algo::Sadagrad,
        Algo::Gsadagrad,
    ];

    /// The guided/naive pairs compared by the benchmark tables.
    pub const PAIRINGS: [(Algo, Algo); 5] = [
        (Algo::Sgd, Algo::Gsgd),
        (Algo::Ssgd, Algo::Gssgd),
        (Algo::Asgd, Algo::Gasgd),
        (Algo::Srmsprop, Algo::Gsrmsprop),
        (Algo::Sadagrad, Algo::Gsadagrad),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Sgd => "sgd",
            Algo::Gsgd => "gsgd",
            Algo::Ssgd => "ssgd",
            Algo::Gssgd => "gssgd",
            Algo::Asgd => "asgd",
            Algo::Gasgd => "gasgd",
            Algo::Srmsprop => "srmsprop",
            Algo::Gsrmsprop => "gsrmsprop",
            Algo::Sadagrad => "sadagrad",
            Algo::Gsadagrad => "gsadagrad",
        }
    }

    pub fn guided(self) -> bool {
        self.name().starts_with('g')
    }

    pub fn mode(self) -> Mode {
        let base = self.name().trim_start_matches('g');
        match base.as_bytes()[0] {
            b's' if base != "sgd" => Mode::Sync,
            b'a' => Mode::Async,
            _ => Mode::Sequential,
        }
    }

    pub fn rule(self) -> Rule {
        match self {
            Algo::Srmsprop | Algo::Gsrmsprop => Rule::Rmsprop,
            Algo::Sadagrad | Algo::Gsadagrad => Rule::Adagrad,
            _ => Rule::Vanilla,
        }
    }
}

impl FromStr for Algo {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                anyhow::anyhow!(
                    "unknown algorithm {s:?} for --algo; expected one of: {}",
                    Algo::ALL.map(|a| a.name()).join(", ")
                )
            })
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Backend {
    Simulated,
    Concurrent,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Simulated => "simulated",
            Backend::Concurrent => "concurrent",
        }
    }
}

impl FromStr for Backend {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simulated" => Ok(Backend::Simulated),
            "concurrent" => Ok(Backend::Concurrent),
            other => bail!("unknown scheduler {other:?}; expected simulated or concurrent"),
        }
    }
}

/// A fully resolved experiment configuration (benchmark defaults filled in).
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub has_header: bool,
    pub label_col: Option<usize>,
    pub algo: Algo,
    pub runs: u32,
    pub base_seed: u64,
    pub epochs: u64,
    pub max_updates: Option<u64>,
    pub eta: f64,
    pub rho: u64,
    /// None means the paper's c = rho convention.
    pub workers: Option<usize>,
    pub batch_size: usize,
    pub replay_cap: usize,
    pub test_fraction: f64,
    pub validation_fraction: f64,
    pub stratify: bool,
    pub scheduler: Backend,
    pub latency: (u64, u64),
    pub rmsprop_init: RmspropInit,
    pub rank_by: RankBy,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: PathBuf::new(),
            has_header: false,
            label_col: None,
            algo: Algo::Sgd,
            runs: 30,
            base_seed: 1,
            epochs: 50,
            max_updates: None,
            eta: 0.2,
            rho: 10,
            workers: None,
            batch_size: 10,
            replay_cap: 4,
            test_fraction: 0.2,
            validation_fraction: 0.2,
            stratify: false,
            scheduler: Backend::Simulated,
            latency: (0, 0),
            rmsprop_init: RmspropInit::Paper,
            rank_by: RankBy::VerifDelta,
            out: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    /// Effective worker count (c = rho unless overridden).
    pub fn effective_workers(&self) -> usize {
        self.workers.unwrap_or(self.rho.max(1) as usize)
    }

    pub fn engine_config(&self, seed: u64) -> gsgd_core::engine::EngineConfig {
        let mut cfg = gsgd_core::engine::EngineConfig::new(seed);
        cfg.mode = self.algo.mode();
        cfg.guided = self.algo.guided();
        cfg.rule = self.algo.rule();
        cfg.rmsprop_init = self.rmsprop_init;
        cfg.rank_by = self.rank_by;
        cfg.workers = self.effective_workers();
        cfg.epochs = self.epochs;
        cfg.max_updates = self.max_updates;
        cfg.eta = self.eta;
        cfg.rho = self.rho;
        cfg.replay_cap = self.replay_cap.min(self.rho.max(1) as usize);
        cfg.batch_size = self.batch_size;
        cfg.latency = gsgd_core::sim::LatencyModel::Uniform {
            lo: self.latency.0,
            hi: self.latency.1,
        };
        cfg
    }

    pub fn split_spec(&self, seed: u64) -> gsgd_core::data::SplitSpec {
        gsgd_core::data::SplitSpec {
            test_fraction: self.test_fraction,
            validation_fraction: self.validation_fraction,
            seed,
            stratify: self.stratify,
        }
    }

    /// Canonical key=value rendering; parseable by [`apply_file`].
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        kv("dataset", self.dataset.display().to_string());
        kv("has_header", self.has_header.to_string());
        kv(
            "label_col",
            self.label_col.map(|c| c.to_string()).unwrap_or_else(|| "last".into()),
        );
        kv("algo", self.algo.to_string());
        kv("runs", self.runs.to_string());
        kv("seed", self.base_seed.to_string());
        kv("epochs", self.epochs.to_string());
        kv(
            "max_updates",
            self.max_updates.map(|c| c.to_string()).unwrap_or_else(|| "none".into()),
        );
        kv("eta", self.eta.to_string());
        kv("rho", self.rho.to_string());
        kv(
            "workers",
            self.workers.map(|c| c.to_string()).unwrap_or_else(|| "rho".into()),
        );
        kv("batch_size", self.batch_size.to_string());
        kv("replay_cap", self.replay_cap.to_string());
        kv("test_fraction", self.test_fraction.to_string());
        kv("validation_fraction", self.validation_fraction.to_string());
        kv("stratify", self.stratify.to_string());
        kv("scheduler", self.scheduler.name().to_string());
        kv("latency", format!("{}:{}", self.latency.0, self.latency.1));
        kv(
            "rmsprop_init",
            match self.rmsprop_init {
                RmspropInit::Paper => "paper".to_string(),
                RmspropInit::Square => "square".to_string(),
            },
        );
        kv(
            "rank_by",
            match self.rank_by {
                RankBy::VerifDelta => "verif".to_string(),
                RankBy::SelfDelta => "self".to_string(),
            },
        );
        kv("out", self.out.display().to_string());
        s
    }

    /// Overlay `key=value` lines from a config file onto `self`.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("config line {}: expected key=value", lineno + 1))?;
            self.apply_kv(key.trim(), value.trim())
                .with_context(|| format!("config line {}", lineno + 1))?;
        }
        Ok(())
    }

    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = PathBuf::from(value),
            "has_header" => self.has_header = parse_bool(value)?,
            "label_col" => {
                self.label_col = if value == "last" {
                    None
                } else {
                    Some(value.parse().context("label_col")?)
                }
            }
            "algo" => self.algo = value.parse()?,
            "runs" => self.runs = value.parse().context("runs")?,
            "seed" => self.base_seed = value.parse().context("seed")?,
            "epochs" => self.epochs = value.parse().context("epochs")?,
            "max_updates" => {
                self.max_updates = if value == "none" {
                    None
                } else {
                    Some(value.parse().context("max_updates")?)
                }
            }
            "eta" => self.eta = value.parse().context("eta")?,
            "rho" => self.rho = value.parse().context("rho")?,
            "workers" => {
                self.workers = if value == "rho" {
                    None
                } else {
                    Some(value.parse().context("workers")?)
                }
            }
            "batch_size" => self.batch_size = value.parse().context("batch_size")?,
            "replay_cap" => self.replay_cap = value.parse().context("replay_cap")?,
            "test_fraction" => self.test_fraction = value.parse().context("test_fraction")?,
            "validation_fraction" => {
                self.validation_fraction = value.parse().context("validation_fraction")?
            }
            "stratify" => self.stratify = parse_bool(value)?,
            "scheduler" => self.scheduler = value.parse()?,
            "latency" => self.latency = parse_latency(value)?,
            "rmsprop_init" => self.rmsprop_init = parse_rmsprop_init(value)?,
            "rank_by" => self.rank_by = parse_rank_by(value)?,
            "out" => self.out = PathBuf::from(value),
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }
}

pub fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => bail!("expected a boolean, got {other:?}"),
    }
}

pub fn parse_latency(s: &str) -> Result<(u64, u64)> {
    let (lo, hi) = s
        .split_once(':')
        .with_context(|| format!("latency must be lo:hi, got {s:?}"))?;
    let lo: u64 = lo.trim().parse().context("latency lo")?;
    let hi: u64 = hi.trim().parse().context("latency hi")?;
    if lo > hi {
        bail!("latency range inverted: {lo}:{hi}");
    }
    Ok((lo, hi))
}

pub fn parse_rmsprop_init(s: &str) -> Result<RmspropInit> {
    match s.to_ascii_lowercase().as_str() {
        "paper" => Ok(RmspropInit::Paper),
        "square" => Ok(RmspropInit::Square),
        other => bail!("unknown rmsprop-init {other:?}; expected paper or square"),
    }
}

pub fn parse_rank_by(s: &str) -> Result<RankBy> {
    match s.to_ascii_lowercase().as_str() {
        "verif" => Ok(RankBy::VerifDelta),
        "self" => Ok(RankBy::SelfDelta),
        other => bail!("unknown rank-by {other:?}; expected verif or self"),
    }
}

/// Parse a simple key=value text file into a map (used for summaries too).
pub fn parse_kv_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algo_naming_matches_mode_and_rule() {
        assert_eq!(Algo::Sgd.mode(), Mode::Sequential);
        assert!(!Algo::Sgd.guided());
        assert_eq!(Algo::Gsgd.mode(), Mode::Sequential);
        assert!(Algo::Gsgd.guided());
        assert_eq!(Algo::Ssgd.mode(), Mode::Sync);
        assert_eq!(Algo::Gssgd.mode(), Mode::Sync);
        assert_eq!(Algo::Asgd.mode(), Mode::Async);
        assert_eq!(Algo::Gasgd.mode(), Mode::Async);
        assert!(Algo::Gasgd.guided());
        assert_eq!(Algo::Gsrmsprop.mode(), Mode::Sync);
        assert_eq!(Algo::Gsrmsprop.rule(), Rule::Rmsprop);
        assert_eq!(Algo::Sadagrad.rule(), Rule::Adagrad);
        assert_eq!(Algo::Sadagrad.mode(), Mode::Sync);
        for a in Algo::ALL {
            assert_eq!(a.name().parse::<Algo>().unwrap(), a);
            assert_eq!(a.guided(), a.name().starts_with('g'));
        }
        assert!("sgdx".parse::<Algo>().is_err());
    }

    #[test]
    fn config_render_parse_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.dataset = PathBuf::from("data/pima.csv");
        cfg.algo = Algo::Gssgd;
        cfg.rho = 7;
        cfg.workers = Some(3);
        cfg.latency = (1, 4);
        cfg.rank_by = RankBy::SelfDelta;
        cfg.max_updates = Some(123);
        let rendered = cfg.render();

        let tmp = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(tmp.path(), &rendered).unwrap();
        let mut reparsed = ExperimentConfig::default();
        reparsed.apply_file(tmp.path()).unwrap();
        assert_eq!(reparsed, cfg);
    }

    #[test]
    fn c_equals_rho_by_default() {
        let mut cfg = ExperimentConfig::default();
        cfg.rho = 13;
        assert_eq!(cfg.effective_workers(), 13);
        cfg.workers = Some(4);
        assert_eq!(cfg.effective_workers(), 4);
    }

    #[test]
    fn latency_parsing() {
        assert_eq!(parse_latency("0:0").unwrap(), (0, 0));
        assert_eq!(parse_latency("2:9").unwrap(), (2, 9));
        assert!(parse_latency("9:2").is_err());
        assert!(parse_latency("x").is_err());
    }
}
