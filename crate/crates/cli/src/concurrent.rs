//! Real-thread backend: the same parameter-server contract as the simulated
//! engine, driven by OS threads. Gradient computation happens concurrently
//! in worker threads; the server (main thread) stays the only context that
//! mutates weights. Wall time is real here and reproducibility is not
//! guaranteed in async mode, by design.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Mutex, RwLock};
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use gsgd_core::data::{self, Splits};
use gsgd_core::engine::{
    EngineConfig, GradientMessage, Mode, ParameterServer, RunResult, ServerStatus,
};
use gsgd_core::linalg::Matrix;
use gsgd_core::model::{self, MiniBatch};

const WORKER_STALL_TIMEOUT: Duration = Duration::from_secs(120);

/// Epoch-refilling batch stream, capped at the applied budget. Mirrors the
/// simulated engine's shared queue semantics.
struct BatchQueue<'a> {
    splits: &'a Splits,
    batch_size: usize,
    seed: u64,
    epochs: u64,
    next_epoch: u64,
    buf: std::vec::IntoIter<MiniBatch>,
    remaining: u64,
}

impl<'a> BatchQueue<'a> {
    fn new(cfg: &EngineConfig, splits: &'a Splits, budget: u64) -> Self {
        BatchQueue {
            splits,
            batch_size: cfg.batch_size,
            seed: cfg.seed,
            epochs: cfg.epochs,
            next_epoch: 0,
            buf: Vec::new().into_iter(),
            remaining: budget,
        }
    }

    fn next(&mut self) -> Option<MiniBatch> {
        if self.remaining == 0 {
            return None;
        }
        loop {
            if let Some(b) = self.buf.next() {
                self.remaining -= 1;
                return Some(b);
            }
            if self.next_epoch == self.epochs {
                return None;
            }
            self.buf = data::make_batches(
                &self.splits.train,
                self.batch_size,
                self.seed,
                self.next_epoch,
            )
            .expect("batch size validated")
            .into_iter();
            self.next_epoch += 1;
        }
    }
}

struct Computed {
    worker_id: usize,
    batch: MiniBatch,
    gradient: Matrix,
    batch_loss: f64,
    read_version: u64,
}

pub fn run_concurrent(cfg: &EngineConfig, splits: &Splits) -> Result<RunResult> {
    let start = Instant::now();
    let mut result = match cfg.mode {
        Mode::Sequential => gsgd_core::engine::run_sequential(cfg, splits)
            .context("sequential run failed")?,
        Mode::Sync => run_sync(cfg, splits)?,
        Mode::Async => run_async(cfg, splits)?,
    };
    result.wall_time = start.elapsed();
    Ok(result)
}

fn run_sync(cfg: &EngineConfig, splits: &Splits) -> Result<RunResult> {
    let mut server = ParameterServer::new(cfg, splits)?;
    let budget = server.budget();
    let mut queue = BatchQueue::new(cfg, splits, budget);

    struct Job {
        batch: MiniBatch,
        weights: Arc<Matrix>,
        version: u64,
    }

    thread::scope(|scope| -> Result<()> {
        let (reply_tx, reply_rx) = mpsc::channel::<Computed>();
        let mut job_txs = Vec::with_capacity(cfg.workers);
        for worker_id in 0..cfg.workers {
            let (tx, rx) = mpsc::channel::<Job>();
            job_txs.push(tx);
            let reply = reply_tx.clone();
            scope.spawn(move || {
                while let Ok(job) = rx.recv() {
                    let (gradient, batch_loss) =
                        model::gradient_and_loss(&job.weights, &job.batch.examples)
                            .expect("worker gradient: shapes are validated by the server");
                    if reply
                        .send(Computed {
                            worker_id,
                            batch: job.batch,
                            gradient,
                            batch_loss,
                            read_version: job.version,
                        })
                        .is_err()
                    {
                        break;
                    }
                }
            });
        }
        drop(reply_tx);

        'rounds: loop {
            // barrier round: every participating worker reads the same snapshot
            let (version, weights) = server.snapshot();
            let weights = Arc::new(weights);
            let mut dispatched = 0usize;
            for tx in job_txs.iter() {
                let Some(batch) = queue.next() else { break };
                tx.send(Job {
                    batch,
                    weights: Arc::clone(&weights),
                    version,
                })
                .ok();
                dispatched += 1;
            }
            if dispatched == 0 {
                break;
            }
            let mut round = Vec::with_capacity(dispatched);
            for _ in 0..dispatched {
                match reply_rx.recv_timeout(WORKER_STALL_TIMEOUT) {
                    Ok(msg) => round.push(msg),
                    Err(RecvTimeoutError::Timeout) => bail!("worker pool stalled"),
                    Err(RecvTimeoutError::Disconnected) => bail!("a worker died mid-round"),
                }
            }
            round.sort_by_key(|m| m.worker_id);
            for m in round {
                debug_assert_eq!(m.read_version, version);
                let msg = GradientMessage {
                    worker_id: m.worker_id,
                    batch_id: m.batch.id,
                    gradient: m.gradient,
                    read_version: m.read_version,
                    batch_loss_at_read: m.batch_loss,
                };
                if server.apply(msg, &m.batch) == ServerStatus::Diverged {
                    break 'rounds;
                }
            }
            if server.is_done() {
                break;
            }
        }
        drop(job_txs);
        Ok(())
    })?;
    Ok(server.finish()?)
}

fn run_async(cfg: &EngineConfig, splits: &Splits) -> Result<RunResult> {
    let mut server = ParameterServer::new(cfg, splits)?;
    let budget = server.budget();
    let queue = Mutex::new(BatchQueue::new(cfg, splits, budget));
    // pull-on-read: workers fetch the latest published snapshot on demand
    let snapshot = RwLock::new(Arc::new(server.snapshot()));
    let stop = AtomicBool::new(false);

    thread::scope(|scope| -> Result<()> {
        let (tx, rx) = mpsc::channel::<Computed>();
        for worker_id in 0..cfg.workers {
            let tx = tx.clone();
            let queue = &queue;
            let snapshot = &snapshot;
            let stop = &stop;
            scope.spawn(move || {
                loop {
                    if stop.load(Ordering::Relaxed) {
                        break;
                    }
                    let batch = queue.lock().expect("queue lock").next();
                    let Some(batch) = batch else { break };
                    let snap = snapshot.read().expect("snapshot lock").clone();
                    let (gradient, batch_loss) =
                        model::gradient_and_loss(&snap.1, &batch.examples)
                            .expect("worker gradient: shapes are validated by the server");
                    if tx
                        .send(Computed {
                            worker_id,
                            batch,
                            gradient,
                            batch_loss,
                            read_version: snap.0,
                        })
                        .is_err()
                    {
                        break;
                    }
                }
            });
        }
        drop(tx);

        while !server.is_done() {
            let m = match rx.recv_timeout(WORKER_STALL_TIMEOUT) {
                Ok(m) => m,
                Err(RecvTimeoutError::Timeout) => bail!("worker pool stalled"),
                Err(RecvTimeoutError::Disconnected) => bail!("all workers died before the budget"),
            };
            let msg = GradientMessage {
                worker_id: m.worker_id,
                batch_id: m.batch.id,
                gradient: m.gradient,
                read_version: m.read_version,
                batch_loss_at_read: m.batch_loss,
            };
            let status = server.apply(msg, &m.batch);
            *snapshot.write().expect("snapshot lock") = Arc::new(server.snapshot());
            if status == ServerStatus::Diverged {
                break;
            }
        }
        stop.store(true, Ordering::Relaxed);
        drop(rx); // unblocks senders; workers exit on send failure or empty queue
        Ok(())
    })?;
    Ok(server.finish()?)
}
