//! Deterministic virtual-clock scheduler for the simulated parallel modes.
//!
//! Each worker cycles read -> compute -> deliver; the compute/transfer cost
//! of a cycle is a per-worker latency draw in whole ticks. Deliveries form a
//! total order: by tick, then by scheduling order within a tick, so the
//! stream is reproducible for a given seed and every interleaving of the
//! asynchronous analysis can be constructed by choosing latencies.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Reverse;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub enum LatencyModel {
    /// Every worker draws from the same [lo, hi] tick range.
    Uniform { lo: u64, hi: u64 },
    /// One [lo, hi] range per worker.
    PerWorker(Vec<(u64, u64)>),
}

impl LatencyModel {
    pub fn zero() -> Self {
        LatencyModel::Uniform { lo: 0, hi: 0 }
    }

    pub fn fixed_per_worker(ticks: &[u64]) -> Self {
        LatencyModel::PerWorker(ticks.iter().map(|&t| (t, t)).collect())
    }

    pub fn validate(&self, workers: usize) -> Result<()> {
        match self {
            LatencyModel::Uniform { lo, hi } if lo > hi => Err(Error::InvalidConfig(
                alloc::format!("latency range inverted: {lo}:{hi}"),
            )),
            LatencyModel::PerWorker(ranges) if ranges.len() != workers => {
                Err(Error::InvalidConfig(alloc::format!(
                    "per-worker latency list has {} entries for {} workers",
                    ranges.len(),
                    workers
                )))
            }
            LatencyModel::PerWorker(ranges) if ranges.iter().any(|(lo, hi)| lo > hi) => Err(
                Error::InvalidConfig(alloc::string::String::from("latency range inverted")),
            ),
            _ => Ok(()),
        }
    }

    fn range_for(&self, worker: usize) -> (u64, u64) {
        match self {
            LatencyModel::Uniform { lo, hi } => (*lo, *hi),
            LatencyModel::PerWorker(ranges) => ranges[worker],
        }
    }
}

/// One gradient delivery in the simulated total order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeliveryEvent {
    pub time: u64,
    pub worker: usize,
}

/// Infinite, deterministic stream of delivery events. A worker's next
/// delivery is re-armed the moment its previous one is popped (the worker
/// re-reads immediately after its gradient is applied), so the stream never
/// depends on what the training loop does with the events.
pub struct ScheduleGen {
    latency: LatencyModel,
    rngs: Vec<ChaCha8Rng>,
    // Reverse-ordered min-heap on (time, seq); seq is a global arm counter
    // so same-tick deliveries pop in scheduling order (FIFO).
    heap: BinaryHeap<Reverse<(u64, u64, usize)>>,
    seq: u64,
}

impl ScheduleGen {
    pub fn new(seed: u64, latency: &LatencyModel, workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidConfig(alloc::string::String::from(
                "worker count must be >= 1",
            )));
        }
        latency.validate(workers)?;
        let mut gen = ScheduleGen {
            latency: latency.clone(),
            rngs: (0..workers)
                .map(|w| rng::substream_rng(seed, rng::STREAM_LATENCY, w as u64))
                .collect(),
            heap: BinaryHeap::new(),
            seq: 0,
        };
        for w in 0..workers {
            gen.arm(w, 0);
        }
        Ok(gen)
    }

    fn arm(&mut self, worker: usize, now: u64) {
        let (lo, hi) = self.latency.range_for(worker);
        let delay = self.rngs[worker].gen_range(lo..=hi);
        self.heap.push(Reverse((now + delay, self.seq, worker)));
        self.seq += 1;
    }
}

impl Iterator for ScheduleGen {
    type Item = DeliveryEvent;

    fn next(&mut self) -> Option<DeliveryEvent> {
        let Reverse((time, _, worker)) = self.heap.pop()?;
        self.arm(worker, time);
        Some(DeliveryEvent { time, worker })
    }
}

/// First `n` deliveries of the stream for (seed, latency, workers).
pub fn simulated_schedule(
    seed: u64,
    latency: &LatencyModel,
    workers: usize,
    n: usize,
) -> Result<Vec<DeliveryEvent>> {
    Ok(ScheduleGen::new(seed, latency, workers)?.take(n).collect())
}
