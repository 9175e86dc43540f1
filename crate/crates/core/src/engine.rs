//! The training engine: a single-authority parameter server plus three
//! drivers over it (sequential, synchronous rounds, asynchronous on the
//! simulated virtual clock). All weight mutation happens inside
//! [`ParameterServer::apply`]; workers only compute gradients against
//! immutable snapshots. External backends (e.g. a real thread pool) can
//! drive the same server through its public API.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::time::Duration;

use crate::data::{self, Splits};
use crate::error::{Error, Result};
use crate::guided::{self, GuidedConfig, Ledger, RankBy};
use crate::linalg::Matrix;
use crate::model::{self, MiniBatch};
use crate::optim::{OptimizerState, RmspropInit, Rule};
use crate::rng;
use crate::sim::{LatencyModel, ScheduleGen};

/// Runs abort when the validation loss passes this bound.
pub const DIVERGENCE_LOSS_LIMIT: f64 = 1e6;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mode {
    Sequential,
    Sync,
    Async,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    pub mode: Mode,
    pub guided: bool,
    pub rule: Rule,
    pub rmsprop_init: RmspropInit,
    pub rank_by: RankBy,
    /// Worker count c; ignored in sequential mode.
    pub workers: usize,
    /// Passes over the training set.
    pub epochs: u64,
    /// Optional cap on applied gradients (replays never count).
    pub max_updates: Option<u64>,
    pub eta: f64,
    pub beta: f64,
    pub epsilon: f64,
    /// Delay tolerance: replay period and ledger capacity.
    pub rho: u64,
    pub replay_cap: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub latency: LatencyModel,
}

impl EngineConfig {
    /// Benchmark defaults: 50 epochs, eta 0.2, rho 10, c = rho, batches of
    /// 10, replay cap 4, zero simulated latency.
    pub fn new(seed: u64) -> Self {
        EngineConfig {
            mode: Mode::Sequential,
            guided: false,
            rule: Rule::Vanilla,
            rmsprop_init: RmspropInit::Paper,
            rank_by: RankBy::VerifDelta,
            workers: 10,
            epochs: 50,
            max_updates: None,
            eta: 0.2,
            beta: 0.9,
            epsilon: 1e-8,
            rho: 10,
            replay_cap: 4,
            batch_size: 10,
            seed,
            latency: LatencyModel::zero(),
        }
    }

    pub fn guided_config(&self) -> GuidedConfig {
        GuidedConfig {
            rho: self.rho,
            replay_cap: self.replay_cap,
            rank_by: self.rank_by,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::InvalidConfig(String::from("epochs must be >= 1")));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidConfig(String::from("batch size must be >= 1")));
        }
        if self.mode != Mode::Sequential && self.workers < 1 {
            return Err(Error::InvalidConfig(String::from("worker count must be >= 1")));
        }
        if self.guided {
            self.guided_config().validate()?;
        }
        if self.mode == Mode::Async {
            self.latency.validate(self.workers)?;
        }
        Ok(())
    }
}

/// A worker's gradient report.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientMessage {
    pub worker_id: usize,
    pub batch_id: u64,
    pub gradient: Matrix,
    /// Weight version the gradient was computed against.
    pub read_version: u64,
    /// Batch loss at that same snapshot; feeds the training-loss trace.
    pub batch_loss_at_read: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    /// 1-based epoch index.
    pub epoch: u64,
    /// Mean batch loss at read time over the epoch's applied gradients.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    /// Cumulative applied + replayed updates at the epoch boundary.
    pub updates: u64,
    /// Cumulative replayed updates.
    pub replays: u64,
    /// Mean staleness of the epoch's applied gradients (async; 0 otherwise).
    pub mean_staleness: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DivergenceInfo {
    /// Applied-update count at which the run aborted.
    pub update: u64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub mode: Mode,
    pub epoch_metrics: Vec<EpochMetrics>,
    /// NaN when the run diverged.
    pub final_test_accuracy: f64,
    /// staleness -> count over applied gradients; populated in async mode only.
    pub staleness_histogram: BTreeMap<u64, u64>,
    pub per_worker_applied: Vec<u64>,
    pub applied_count: u64,
    pub replay_count: u64,
    /// applied_count + replay_count.
    pub update_count: u64,
    pub final_version: u64,
    /// Guided-module invocations made by this run; 0 whenever guided is off.
    pub guided_touches: u64,
    /// Filled in by std drivers; the simulated engine leaves it zero.
    pub wall_time: Duration,
    pub diverged: Option<DivergenceInfo>,
    pub final_weights: Matrix,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ServerStatus {
    Running,
    /// The applied-gradient budget is exhausted.
    Finished,
    Diverged,
}

struct GuidedRuntime {
    config: GuidedConfig,
    ledger: Ledger,
    /// Verification error after the last update; None right after a replay
    /// (recomputed lazily when the next record is written).
    cached_verif_error: Option<f64>,
}

/// The single mutation context: weights, optimizer state, version counter,
/// and the guided ledger. One instance per run.
pub struct ParameterServer<'a> {
    cfg: &'a EngineConfig,
    splits: &'a Splits,
    weights: Matrix,
    optimizer: OptimizerState,
    version: u64,
    applied: u64,
    replays: u64,
    budget: u64,
    batches_per_epoch: u64,
    guided: Option<GuidedRuntime>,
    guided_touches: u64,
    staleness_histogram: BTreeMap<u64, u64>,
    per_worker_applied: Vec<u64>,
    epoch_metrics: Vec<EpochMetrics>,
    epoch_loss_sum: f64,
    epoch_msgs: u64,
    epoch_staleness_sum: u64,
    diverged: Option<DivergenceInfo>,
}

impl<'a> ParameterServer<'a> {
    pub fn new(cfg: &'a EngineConfig, splits: &'a Splits) -> Result<Self> {
        cfg.validate()?;
        validate_splits(splits)?;
        let rows = splits.class_count;
        let cols = splits.feature_count + 1;
        let weights = model::init_weights(
            rows,
            splits.feature_count,
            &mut rng::stream_rng(cfg.seed, rng::STREAM_WEIGHT_INIT),
        );
        let optimizer = OptimizerState::with_options(
            cfg.rule,
            cfg.eta,
            rows,
            cols,
            cfg.beta,
            cfg.epsilon,
            cfg.rmsprop_init,
        )?;
        let batches_per_epoch = data::batches_per_epoch(splits.train.len(), cfg.batch_size);
        let mut budget = cfg.epochs * batches_per_epoch;
        if let Some(cap) = cfg.max_updates {
            budget = budget.min(cap);
        }
        let workers = if cfg.mode == Mode::Sequential { 1 } else { cfg.workers };
        Ok(ParameterServer {
            cfg,
            splits,
            weights,
            optimizer,
            version: 0,
            applied: 0,
            replays: 0,
            budget,
            batches_per_epoch,
            guided: cfg.guided.then(|| GuidedRuntime {
                config: cfg.guided_config(),
                ledger: Ledger::new(cfg.rho as usize),
                cached_verif_error: None,
            }),
            guided_touches: 0,
            staleness_histogram: BTreeMap::new(),
            per_worker_applied: alloc::vec![0; workers],
            epoch_metrics: Vec::new(),
            epoch_loss_sum: 0.0,
            epoch_msgs: 0,
            epoch_staleness_sum: 0,
            diverged: None,
        })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Versioned weight copy for a worker (pull-on-read).
    pub fn snapshot(&self) -> (u64, Matrix) {
        (self.version, self.weights.clone())
    }

    /// Applied-gradient budget for the whole run.
    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn is_done(&self) -> bool {
        self.diverged.is_some() || self.applied == self.budget
    }

    fn status(&self) -> ServerStatus {
        if self.diverged.is_some() {
            ServerStatus::Diverged
        } else if self.applied == self.budget {
            ServerStatus::Finished
        } else {
            ServerStatus::Running
        }
    }

    fn diverge(&mut self, reason: String) -> ServerStatus {
        self.diverged = Some(DivergenceInfo {
            update: self.applied,
            reason,
        });
        ServerStatus::Diverged
    }

    /// Apply one gradient message. `batch` is the mini-batch the message was
    /// computed on (the server pulls it from storage by id; here the caller
    /// hands it over). Performs guided bookkeeping, fires replay every `rho`
    /// applied updates, and emits epoch metrics at epoch boundaries.
    pub fn apply(&mut self, msg: GradientMessage, batch: &MiniBatch) -> ServerStatus {
        if self.is_done() {
            return self.status();
        }
        debug_assert_eq!(msg.batch_id, batch.id);
        debug_assert!(msg.read_version <= self.version);
        let staleness = self.version - msg.read_version;

        // guided pre-update errors (batch's own and verification)
        let pre = if let Some(g) = &mut self.guided {
            let self_before = match model::loss(&self.weights, &batch.examples) {
                Ok(v) => v,
                Err(e) => return self.diverge(alloc::format!("batch loss failed: {e}")),
            };
            let verif_before = match g.cached_verif_error {
                Some(v) => v,
                None => {
                    self.guided_touches += 1;
                    match guided::approximate_avg_error(&self.weights, &self.splits.validation) {
                        Ok(v) => v,
                        Err(e) => {
                            return self.diverge(alloc::format!("verification loss failed: {e}"))
                        }
                    }
                }
            };
            Some((self_before, verif_before))
        } else {
            None
        };

        if let Err(e) = self.optimizer.step(&mut self.weights, &msg.gradient) {
            return self.diverge(alloc::format!("{e}"));
        }
        self.version += 1;
        self.applied += 1;
        self.per_worker_applied[msg.worker_id] += 1;
        self.epoch_loss_sum += msg.batch_loss_at_read;
        self.epoch_msgs += 1;
        if self.cfg.mode == Mode::Async {
            *self.staleness_histogram.entry(staleness).or_insert(0) += 1;
            self.epoch_staleness_sum += staleness;
        }
        if !self.weights.is_finite() {
            return self.diverge(String::from("non-finite weight entry"));
        }

        if let Some((self_before, verif_before)) = pre {
            let self_after = match model::loss(&self.weights, &batch.examples) {
                Ok(v) => v,
                Err(e) => return self.diverge(alloc::format!("batch loss failed: {e}")),
            };
            self.guided_touches += 1;
            let verif_after =
                match guided::approximate_avg_error(&self.weights, &self.splits.validation) {
                    Ok(v) => v,
                    Err(e) => return self.diverge(alloc::format!("verification loss failed: {e}")),
                };
            let g = self.guided.as_mut().expect("guided runtime present");
            g.cached_verif_error = Some(verif_after);
            self.guided_touches += 1;
            g.ledger
                .record(batch.clone(), self_before, self_after, verif_before, verif_after);
            if !verif_after.is_finite() || verif_after > DIVERGENCE_LOSS_LIMIT {
                return self.diverge(alloc::format!("validation loss {verif_after} out of bounds"));
            }
            // delay tolerance reached: replay the most consistent batches
            if self.applied % g.config.rho == 0 {
                let g = self.guided.as_mut().expect("guided runtime present");
                self.guided_touches += 2;
                let selected = g
                    .ledger
                    .select_most_consistent(g.config.replay_cap, g.config.rank_by);
                g.cached_verif_error = None;
                match guided::replay(&mut self.weights, &mut self.optimizer, &selected) {
                    Ok(n) => {
                        self.version += n as u64;
                        self.replays += n as u64;
                    }
                    Err(e) => return self.diverge(alloc::format!("replay failed: {e}")),
                }
                if !self.weights.is_finite() {
                    return self.diverge(String::from("non-finite weight entry after replay"));
                }
            }
        }

        if self.applied % self.batches_per_epoch == 0 {
            if let Err(status) = self.emit_epoch_metrics() {
                return status;
            }
        }
        self.status()
    }

    fn emit_epoch_metrics(&mut self) -> core::result::Result<(), ServerStatus> {
        let val_loss = match model::loss(&self.weights, &self.splits.validation) {
            Ok(v) => v,
            Err(e) => return Err(self.diverge(alloc::format!("validation loss failed: {e}"))),
        };
        if !val_loss.is_finite() || val_loss > DIVERGENCE_LOSS_LIMIT {
            return Err(self.diverge(alloc::format!("validation loss {val_loss} out of bounds")));
        }
        let val_accuracy = match model::accuracy(&self.weights, &self.splits.validation) {
            Ok(v) => v,
            Err(e) => return Err(self.diverge(alloc::format!("validation accuracy failed: {e}"))),
        };
        let epoch = self.applied / self.batches_per_epoch;
        self.epoch_metrics.push(EpochMetrics {
            epoch,
            train_loss: self.epoch_loss_sum / self.epoch_msgs.max(1) as f64,
            val_loss,
            val_accuracy,
            updates: self.applied + self.replays,
            replays: self.replays,
            mean_staleness: if self.cfg.mode == Mode::Async {
                self.epoch_staleness_sum as f64 / self.epoch_msgs.max(1) as f64
            } else {
                0.0
            },
        });
        self.epoch_loss_sum = 0.0;
        self.epoch_msgs = 0;
        self.epoch_staleness_sum = 0;
        Ok(())
    }

    /// Close out the run: evaluate test accuracy and assemble the result.
    pub fn finish(self) -> Result<RunResult> {
        let final_test_accuracy = if self.diverged.is_some() {
            f64::NAN
        } else {
            model::accuracy(&self.weights, &self.splits.test)?
        };
        Ok(RunResult {
            seed: self.cfg.seed,
            mode: self.cfg.mode,
            epoch_metrics: self.epoch_metrics,
            final_test_accuracy,
            staleness_histogram: self.staleness_histogram,
            per_worker_applied: self.per_worker_applied,
            applied_count: self.applied,
            replay_count: self.replays,
            update_count: self.applied + self.replays,
            final_version: self.version,
            guided_touches: self.guided_touches,
            wall_time: Duration::ZERO,
            diverged: self.diverged,
            final_weights: self.weights,
        })
    }
}

fn validate_splits(splits: &Splits) -> Result<()> {
    if splits.train.is_empty() {
        return Err(Error::EmptyInput("training split"));
    }
    if splits.validation.is_empty() {
        return Err(Error::EmptyInput("validation split"));
    }
    if splits.test.is_empty() {
        return Err(Error::EmptyInput("test split"));
    }
    if splits.class_count < 2 {
        return Err(Error::InvalidConfig(String::from("need at least two classes")));
    }
    for ex in splits
        .train
        .iter()
        .chain(&splits.validation)
        .chain(&splits.test)
    {
        if ex.features.len() != splits.feature_count {
            return Err(Error::DimensionMismatch {
                expected: splits.feature_count,
                got: ex.features.len(),
            });
        }
        if ex.label >= splits.class_count {
            return Err(Error::InvalidConfig(alloc::format!(
                "label {} out of range for {} classes",
                ex.label,
                splits.class_count
            )));
        }
    }
    Ok(())
}

/// Epoch-refilling batch stream shared by every driver: yields the epoch-0
/// batches in order, then epoch 1, ..., capped at the applied budget.
struct BatchQueue<'a> {
    train: &'a [crate::model::Example],
    batch_size: usize,
    seed: u64,
    epochs: u64,
    next_epoch: u64,
    buf: alloc::vec::IntoIter<MiniBatch>,
    remaining: u64,
}

impl<'a> BatchQueue<'a> {
    fn new(cfg: &EngineConfig, splits: &'a Splits, budget: u64) -> Self {
        BatchQueue {
            train: &splits.train,
            batch_size: cfg.batch_size,
            seed: cfg.seed,
            epochs: cfg.epochs,
            next_epoch: 0,
            buf: Vec::new().into_iter(),
            remaining: budget,
        }
    }

    fn next(&mut self) -> Result<Option<MiniBatch>> {
        if self.remaining == 0 {
            return Ok(None);
        }
        loop {
            if let Some(b) = self.buf.next() {
                self.remaining -= 1;
                return Ok(Some(b));
            }
            if self.next_epoch == self.epochs {
                return Ok(None);
            }
            self.buf =
                data::make_batches(self.train, self.batch_size, self.seed, self.next_epoch)?
                    .into_iter();
            self.next_epoch += 1;
        }
    }
}

/// Run with the mode picked by the config.
pub fn run(cfg: &EngineConfig, splits: &Splits) -> Result<RunResult> {
    match cfg.mode {
        Mode::Sequential => run_sequential(cfg, splits),
        Mode::Sync | Mode::Async => run_parallel(cfg, splits),
    }
}

/// Plain mini-batch (g)SGD: one gradient at a time, computed at the current
/// weights.
pub fn run_sequential(cfg: &EngineConfig, splits: &Splits) -> Result<RunResult> {
    if cfg.mode != Mode::Sequential {
        return Err(Error::InvalidConfig(String::from(
            "run_sequential requires sequential mode",
        )));
    }
    let mut server = ParameterServer::new(cfg, splits)?;
    let mut queue = BatchQueue::new(cfg, splits, server.budget());
    while let Some(batch) = queue.next()? {
        let (gradient, batch_loss) = model::gradient_and_loss(server.weights(), &batch.examples)?;
        let msg = GradientMessage {
            worker_id: 0,
            batch_id: batch.id,
            gradient,
            read_version: server.version(),
            batch_loss_at_read: batch_loss,
        };
        if server.apply(msg, &batch) != ServerStatus::Running {
            break;
        }
    }
    server.finish()
}

/// Simulated parallel run (sync barrier rounds or async on the virtual
/// clock). Deterministic given the seed.
pub fn run_parallel(cfg: &EngineConfig, splits: &Splits) -> Result<RunResult> {
    match cfg.mode {
        Mode::Sync => run_sync_simulated(cfg, splits),
        Mode::Async => run_async_simulated(cfg, splits),
        Mode::Sequential => Err(Error::InvalidConfig(String::from(
            "run_parallel requires sync or async mode",
        ))),
    }
}

fn run_sync_simulated(cfg: &EngineConfig, splits: &Splits) -> Result<RunResult> {
    let mut server = ParameterServer::new(cfg, splits)?;
    let mut queue = BatchQueue::new(cfg, splits, server.budget());
    'rounds: loop {
        let mut round = Vec::with_capacity(cfg.workers);
        for _ in 0..cfg.workers {
            match queue.next()? {
                Some(b) => round.push(b),
                None => break,
            }
        }
        if round.is_empty() {
            break;
        }
        // every worker in the round reads the same snapshot
        let read_version = server.version();
        let mut computed = Vec::with_capacity(round.len());
        for batch in &round {
            computed.push(model::gradient_and_loss(server.weights(), &batch.examples)?);
        }
        for (worker_id, (batch, (gradient, batch_loss))) in
            round.iter().zip(computed).enumerate()
        {
            let msg = GradientMessage {
                worker_id,
                batch_id: batch.id,
                gradient,
                read_version,
                batch_loss_at_read: batch_loss,
            };
            debug_assert_eq!(msg.read_version, read_version);
            if server.apply(msg, batch) == ServerStatus::Diverged {
                break 'rounds;
            }
        }
        if server.is_done() {
            break;
        }
    }
    server.finish()
}

fn run_async_simulated(cfg: &EngineConfig, splits: &Splits) -> Result<RunResult> {
    struct Lane {
        batch: MiniBatch,
        gradient: Matrix,
        batch_loss: f64,
        read_version: u64,
    }

    let mut server = ParameterServer::new(cfg, splits)?;
    let mut queue = BatchQueue::new(cfg, splits, server.budget());
    let mut schedule = ScheduleGen::new(cfg.seed, &cfg.latency, cfg.workers)?;

    let read = |server: &ParameterServer, queue: &mut BatchQueue| -> Result<Option<Lane>> {
        Ok(match queue.next()? {
            Some(batch) => {
                let (gradient, batch_loss) =
                    model::gradient_and_loss(server.weights(), &batch.examples)?;
                Some(Lane {
                    batch,
                    gradient,
                    batch_loss,
                    read_version: server.version(),
                })
            }
            None => None,
        })
    };

    // all workers read the initial weights at tick 0
    let mut lanes: Vec<Option<Lane>> = Vec::with_capacity(cfg.workers);
    for _ in 0..cfg.workers {
        lanes.push(read(&server, &mut queue)?);
    }

    while !server.is_done() {
        let ev = schedule.next().expect("schedule stream is infinite");
        let Some(lane) = lanes[ev.worker].take() else {
            continue; // this worker ran out of batches
        };
        let msg = GradientMessage {
            worker_id: ev.worker,
            batch_id: lane.batch.id,
            gradient: lane.gradient,
            read_version: lane.read_version,
            batch_loss_at_read: lane.batch_loss,
        };
        if server.apply(msg, &lane.batch) == ServerStatus::Diverged {
            break;
        }
        // the worker re-reads the latest weights right away
        lanes[ev.worker] = read(&server, &mut queue)?;
    }
    server.finish()
}
