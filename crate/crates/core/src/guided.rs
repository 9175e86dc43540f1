//! The delay-compensation ledger. Every applied gradient is recorded with
//! two error deltas: how the batch's own loss moved across the update and
//! how the verification-set loss moved. A batch is *consistent* when the
//! two deltas agree in sign; every `rho` applied updates the server replays
//! the few consistent batches with the largest verification improvement,
//! recomputing their gradients at the current weights.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{self, Example, MiniBatch};
use crate::optim::OptimizerState;

/// Default cap on replayed batches per window.
pub const DEFAULT_REPLAY_CAP: usize = 4;

/// Instrumentation: bumped by every ledger/replay touch so tests can verify
/// unguided runs never enter this module.
static TOUCHES: AtomicU64 = AtomicU64::new(0);

pub fn touch_count() -> u64 {
    TOUCHES.load(Ordering::Relaxed)
}

pub fn reset_touch_count() {
    TOUCHES.store(0, Ordering::Relaxed);
}

fn touch() {
    TOUCHES.fetch_add(1, Ordering::Relaxed);
}

/// Ranking key for [`Ledger::select_most_consistent`].
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RankBy {
    /// Verification-error improvement (default).
    VerifDelta,
    /// The batch's own error improvement.
    SelfDelta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GuidedConfig {
    /// Delay tolerance: ledger capacity and replay period, in applied updates.
    pub rho: u64,
    /// Max batches replayed per window.
    pub replay_cap: usize,
    pub rank_by: RankBy,
}

impl GuidedConfig {
    /// Paper defaults: rho = 10, cap = 4 (clipped to rho when rho < 4).
    pub fn new(rho: u64) -> Self {
        GuidedConfig {
            rho,
            replay_cap: DEFAULT_REPLAY_CAP.min(rho.max(1) as usize),
            rank_by: RankBy::VerifDelta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho < 1 {
            return Err(Error::InvalidConfig(alloc::format!(
                "delay tolerance rho must be >= 1, got {}",
                self.rho
            )));
        }
        if self.replay_cap < 1 || self.replay_cap as u64 > self.rho {
            return Err(Error::InvalidConfig(alloc::format!(
                "replay cap must lie in 1..=rho ({}), got {}",
                self.rho,
                self.replay_cap
            )));
        }
        Ok(())
    }
}

/// One ledger entry: the batch plus the error deltas observed across the
/// update that applied it. Positive delta = that error improved.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyRecord {
    pub batch_id: u64,
    /// E_bar(before) - E_bar(after) on the verification set.
    pub delta_verif: f64,
    /// E(before, batch) - E(after, batch) on the batch itself.
    pub delta_self: f64,
    pub batch: MiniBatch,
}

/// Rolling window of the last `rho` applied batches.
#[derive(Debug, Clone)]
pub struct Ledger {
    capacity: usize,
    records: VecDeque<ConsistencyRecord>,
}

impl Ledger {
    pub fn new(capacity: usize) -> Self {
        Ledger {
            capacity: capacity.max(1),
            records: VecDeque::with_capacity(capacity.max(1)),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &ConsistencyRecord> {
        self.records.iter()
    }

    /// Append a record; evicts the oldest when the window is full.
    pub fn record(
        &mut self,
        batch: MiniBatch,
        self_error_before: f64,
        self_error_after: f64,
        verif_error_before: f64,
        verif_error_after: f64,
    ) {
        touch();
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(ConsistencyRecord {
            batch_id: batch.id,
            delta_verif: verif_error_before - verif_error_after,
            delta_self: self_error_before - self_error_after,
            batch,
        });
    }

    /// The consistent-and-improving batches (both deltas positive), sorted
    /// by the ranking key descending with ties broken toward the lower batch
    /// id, truncated to `cap`. May be empty.
    pub fn select_most_consistent(&self, cap: usize, rank_by: RankBy) -> Vec<MiniBatch> {
        touch();
        let mut picked: Vec<&ConsistencyRecord> = self
            .records
            .iter()
            .filter(|r| r.delta_verif > 0.0 && r.delta_self > 0.0)
            .collect();
        let key = |r: &ConsistencyRecord| match rank_by {
            RankBy::VerifDelta => r.delta_verif,
            RankBy::SelfDelta => r.delta_self,
        };
        picked.sort_by(|a, b| key(b).total_cmp(&key(a)).then(a.batch_id.cmp(&b.batch_id)));
        picked.truncate(cap);
        picked.into_iter().map(|r| r.batch.clone()).collect()
    }
}

/// Mean cross-entropy on the verification set; the cheap stand-in for the
/// full training loss.
pub fn approximate_avg_error(weights: &Matrix, verification: &[Example]) -> Result<f64> {
    touch();
    if verification.is_empty() {
        return Err(Error::EmptyInput("verification set"));
    }
    model::loss(weights, verification)
}

/// Apply one optimizer step per selected batch, sequentially, each gradient
/// recomputed at the then-current weights. Returns the number of updates.
pub fn replay(
    weights: &mut Matrix,
    optimizer: &mut OptimizerState,
    selected: &[MiniBatch],
) -> Result<usize> {
    touch();
    for batch in selected {
        let grad = model::gradient(weights, &batch.examples)?;
        optimizer.step(weights, &grad)?;
    }
    Ok(selected.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::optim::Rule;
    use alloc::vec;

    fn batch(id: u64, x: f64, label: usize) -> MiniBatch {
        MiniBatch {
            id,
            examples: vec![Example { features: vec![x], label }],
        }
    }

    fn rec(ledger: &mut Ledger, id: u64, delta_self: f64, delta_verif: f64) {
        // record() computes deltas as before - after
        ledger.record(batch(id, 0.0, 0), delta_self, 0.0, delta_verif, 0.0);
    }

    #[test]
    fn avg_error_matches_model_loss() {
        let w = Matrix::zeros(2, 2);
        let set = vec![Example { features: vec![1.0], label: 0 }];
        let e = approximate_avg_error(&w, &set).unwrap();
        assert_eq!(e, model::loss(&w, &set).unwrap());
        assert!((e - core::f64::consts::LN_2).abs() < 1e-12);

        // perfect classifier -> ~0
        let sharp = Matrix::from_rows(&[&[60.0, 0.0], &[-60.0, 0.0]]);
        assert!(approximate_avg_error(&sharp, &set).unwrap() < 1e-9);
    }

    #[test]
    fn record_keeps_deltas_and_capacity() {
        let mut ledger = Ledger::new(3);
        // both improve -> both deltas positive
        ledger.record(batch(1, 0.0, 0), 0.9, 0.4, 0.8, 0.6);
        let r = ledger.records().next().unwrap();
        assert!(r.delta_self > 0.0 && r.delta_verif > 0.0);

        // self improves, average worsens -> the inconsistent case
        ledger.record(batch(2, 0.0, 0), 0.9, 0.4, 0.6, 0.8);
        let r2 = ledger.records().nth(1).unwrap();
        assert!(r2.delta_self > 0.0 && r2.delta_verif < 0.0);

        rec(&mut ledger, 3, 0.1, 0.1);
        rec(&mut ledger, 4, 0.1, 0.1);
        assert_eq!(ledger.len(), 3);
        // oldest (id 1) evicted
        assert_eq!(ledger.records().next().unwrap().batch_id, 2);
    }

    #[test]
    fn select_filters_and_ranks() {
        let mut ledger = Ledger::new(10);
        rec(&mut ledger, 1, 0.5, 0.3);
        rec(&mut ledger, 2, 0.5, -0.2); // inconsistent
        rec(&mut ledger, 3, -0.5, 0.2); // inconsistent
        rec(&mut ledger, 4, 0.2, 0.9);
        rec(&mut ledger, 5, 0.2, 0.7);
        rec(&mut ledger, 6, 0.9, 0.1);
        rec(&mut ledger, 7, 0.9, 0.5);
        rec(&mut ledger, 8, 0.9, 0.6);
        // 6 consistent-improving records, cap 4 -> top 4 by delta_verif
        let sel = ledger.select_most_consistent(4, RankBy::VerifDelta);
        let ids: Vec<u64> = sel.iter().map(|b| b.id).collect();
        assert_eq!(ids, vec![4, 5, 8, 7]);

        // ranking by self-delta instead
        let sel_self = ledger.select_most_consistent(4, RankBy::SelfDelta);
        let ids_self: Vec<u64> = sel_self.iter().map(|b| b.id).collect();
        // equal self-deltas 0.9 tie-break toward lower id
        assert_eq!(ids_self, vec![6, 7, 8, 1]);
    }

    #[test]
    fn select_all_inconsistent_is_empty() {
        let mut ledger = Ledger::new(5);
        rec(&mut ledger, 1, 0.5, -0.1);
        rec(&mut ledger, 2, -0.5, 0.1);
        rec(&mut ledger, 3, -0.5, -0.1);
        assert!(ledger.select_most_consistent(4, RankBy::VerifDelta).is_empty());
    }

    #[test]
    fn select_tie_break_matches_stable_sort_oracle() {
        let mut ledger = Ledger::new(10);
        rec(&mut ledger, 5, 0.1, 0.4);
        rec(&mut ledger, 2, 0.2, 0.4);
        rec(&mut ledger, 9, 0.3, 0.4);
        rec(&mut ledger, 1, 0.4, 0.2);
        let sel = ledger.select_most_consistent(3, RankBy::VerifDelta);
        let ids: Vec<u64> = sel.iter().map(|b| b.id).collect();

        // oracle: stable sort of (delta_verif desc) over records pre-sorted by id
        let mut oracle: Vec<(u64, f64)> = ledger
            .records()
            .filter(|r| r.delta_verif > 0.0 && r.delta_self > 0.0)
            .map(|r| (r.batch_id, r.delta_verif))
            .collect();
        oracle.sort_by_key(|(id, _)| *id);
        oracle.sort_by(|a, b| b.1.total_cmp(&a.1)); // stable: keeps id order within ties
        let expect: Vec<u64> = oracle.iter().take(3).map(|(id, _)| *id).collect();
        assert_eq!(ids, expect);
        assert_eq!(ids, vec![2, 5, 9]);
    }

    #[test]
    fn replay_empty_selection_is_noop() {
        let mut w = Matrix::from_rows(&[&[0.3, -0.2], &[0.1, 0.0]]);
        let orig = w.clone();
        let mut opt = OptimizerState::new(Rule::Vanilla, 0.2, 2, 2).unwrap();
        let n = replay(&mut w, &mut opt, &[]).unwrap();
        assert_eq!(n, 0);
        assert_eq!(w, orig);
        assert_eq!(opt.step_count(), 0);
    }

    #[test]
    fn replay_single_batch_is_one_vanilla_step() {
        let mut w = Matrix::zeros(2, 2);
        let mut opt = OptimizerState::new(Rule::Vanilla, 0.2, 2, 2).unwrap();
        let b = batch(3, 1.0, 0);
        let g = model::gradient(&w, &b.examples).unwrap();
        let mut expect = w.clone();
        expect.add_scaled(&g, -0.2);
        replay(&mut w, &mut opt, core::slice::from_ref(&b)).unwrap();
        assert_eq!(w, expect);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn replay_four_batches_equals_sequential_sgd_oracle() {
        let batches: Vec<MiniBatch> = (0..4)
            .map(|i| batch(i, 0.5 + i as f64, (i % 2) as usize))
            .collect();
        let mut w = Matrix::from_rows(&[&[0.02, -0.01], &[-0.03, 0.04]]);
        let mut oracle_w = w.clone();

        // oracle: four plain SGD steps, gradient recomputed at each iterate
        for b in &batches {
            let g = model::gradient(&oracle_w, &b.examples).unwrap();
            oracle_w.add_scaled(&g, -0.2);
        }

        let mut opt = OptimizerState::new(Rule::Vanilla, 0.2, 2, 2).unwrap();
        replay(&mut w, &mut opt, &batches).unwrap();
        assert_eq!(w, oracle_w);
    }

    #[test]
    fn touch_counter_tracks_module_use() {
        // other tests may bump the global counter concurrently, so only the
        // lower bound of the delta is assertable here
        let before = touch_count();
        let mut ledger = Ledger::new(2);
        rec(&mut ledger, 1, 0.1, 0.1);
        ledger.select_most_consistent(1, RankBy::VerifDelta);
        assert!(touch_count() >= before + 2);
    }

    #[test]
    fn config_validation() {
        assert!(GuidedConfig::new(10).validate().is_ok());
        assert_eq!(GuidedConfig::new(10).replay_cap, 4);
        assert_eq!(GuidedConfig::new(2).replay_cap, 2);
        let bad = GuidedConfig { rho: 0, replay_cap: 1, rank_by: RankBy::VerifDelta };
        assert!(bad.validate().is_err());
        let bad_cap = GuidedConfig { rho: 3, replay_cap: 4, rank_by: RankBy::VerifDelta };
        assert!(bad_cap.validate().is_err());
    }
}
