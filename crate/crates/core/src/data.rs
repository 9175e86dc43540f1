//! In-memory dataset handling: train/validation/test splitting, per-epoch
//! mini-batch construction, and IQR outlier filtering. CSV ingestion lives
//! in the companion crate; this module only sees parsed examples.

use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::model::{Example, MiniBatch};
use crate::rng;
use crate::stats::quantile_sorted;

/// Default IQR fence factor (the WEKA InterquartileRange default).
pub const DEFAULT_IQR_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub feature_count: usize,
    pub class_count: usize,
    /// Label strings in first-appearance order; index = class id.
    pub class_names: Vec<String>,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub validation_fraction: f64,
    pub seed: u64,
    pub stratify: bool,
}

impl SplitSpec {
    /// 80:20 test split, then 80:20 validation split of the training pool.
    pub fn new(seed: u64) -> Self {
        SplitSpec {
            test_fraction: 0.2,
            validation_fraction: 0.2,
            seed,
            stratify: false,
        }
    }
}

/// The three disjoint parts produced by [`split`].
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Vec<Example>,
    pub validation: Vec<Example>,
    pub test: Vec<Example>,
    pub feature_count: usize,
    pub class_count: usize,
}

/// Seeded shuffle, then `test` takes the last floor(N * test_fraction)
/// examples, `validation` the last floor(pool * validation_fraction) of the
/// remaining pool, `train` the rest. Deterministic given the seed.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<Splits> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)
        || !(spec.validation_fraction > 0.0 && spec.validation_fraction < 1.0)
    {
        return Err(Error::InvalidConfig(alloc::format!(
            "split fractions must lie in (0, 1): test {}, validation {}",
            spec.test_fraction,
            spec.validation_fraction
        )));
    }
    let n = ds.len();
    if n < 5 {
        return Err(Error::DatasetTooSmall { len: n, min: 5 });
    }

    let order = if spec.stratify {
        stratified_order(ds, spec)
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng::stream_rng(spec.seed, rng::STREAM_SPLIT));
        idx
    };

    let test_len = (n as f64 * spec.test_fraction) as usize;
    let pool_len = n - test_len;
    let val_len = (pool_len as f64 * spec.validation_fraction) as usize;
    let train_len = pool_len - val_len;
    if test_len == 0 || val_len == 0 || train_len == 0 {
        return Err(Error::DatasetTooSmall { len: n, min: 5 });
    }

    let pick = |range: core::ops::Range<usize>| -> Vec<Example> {
        order[range].iter().map(|&i| ds.examples[i].clone()).collect()
    };
    Ok(Splits {
        train: pick(0..train_len),
        validation: pick(train_len..pool_len),
        test: pick(pool_len..n),
        feature_count: ds.feature_count,
        class_count: ds.class_count,
    })
}

/// Shuffle within each class, then interleave classes so every prefix/suffix
/// cut keeps roughly the dataset's class proportions.
fn stratified_order(ds: &Dataset, spec: &SplitSpec) -> Vec<usize> {
    let mut by_class: Vec<Vec<usize>> = alloc::vec![Vec::new(); ds.class_count];
    for (i, ex) in ds.examples.iter().enumerate() {
        by_class[ex.label].push(i);
    }
    for (k, group) in by_class.iter_mut().enumerate() {
        group.shuffle(&mut rng::substream_rng(spec.seed, rng::STREAM_SPLIT, k as u64));
    }
    // proportional round-robin: at each slot emit the class lagging most
    let n = ds.len();
    let mut taken = alloc::vec![0usize; ds.class_count];
    let mut order = Vec::with_capacity(n);
    for pos in 0..n {
        let mut best: Option<usize> = None;
        let mut best_lag = f64::NEG_INFINITY;
        for k in 0..ds.class_count {
            if taken[k] >= by_class[k].len() {
                continue;
            }
            let want = by_class[k].len() as f64 * (pos + 1) as f64 / n as f64;
            let lag = want - taken[k] as f64;
            if lag > best_lag {
                best_lag = lag;
                best = Some(k);
            }
        }
        let k = best.expect("some class must have examples left");
        order.push(by_class[k][taken[k]]);
        taken[k] += 1;
    }
    order
}

/// Per-epoch seeded shuffle of the training examples, chunked into batches
/// of `m` (last batch may be short). Batch ids are globally monotone across
/// epochs: epoch e yields ids [e*Q, (e+1)*Q) with Q = ceil(|train| / m).
pub fn make_batches(train: &[Example], m: usize, seed: u64, epoch: u64) -> Result<Vec<MiniBatch>> {
    if m == 0 {
        return Err(Error::InvalidConfig(String::from("batch size must be >= 1")));
    }
    let n = train.len();
    let per_epoch = n.div_ceil(m) as u64;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::substream_rng(seed, rng::STREAM_BATCHES, epoch));
    let mut batches = Vec::with_capacity(per_epoch as usize);
    for (i, chunk) in idx.chunks(m).enumerate() {
        batches.push(MiniBatch {
            id: epoch * per_epoch + i as u64,
            examples: chunk.iter().map(|&j| train[j].clone()).collect(),
        });
    }
    Ok(batches)
}

/// Number of batches one epoch produces.
pub fn batches_per_epoch(train_len: usize, m: usize) -> u64 {
    train_len.div_ceil(m.max(1)) as u64
}

/// Remove every example with some feature outside
/// [Q1 - factor*IQR, Q3 + factor*IQR], fences computed per feature column
/// from the full dataset in one pass (type-7 quantiles). Returns the
/// filtered dataset and the removed row indices.
pub fn iqr_filter(ds: &Dataset, factor: f64) -> Result<(Dataset, Vec<usize>)> {
    let n = ds.len();
    if n < 4 {
        return Err(Error::DatasetTooSmall { len: n, min: 4 });
    }
    let mut fences = Vec::with_capacity(ds.feature_count);
    let mut col = Vec::with_capacity(n);
    for j in 0..ds.feature_count {
        col.clear();
        col.extend(ds.examples.iter().map(|e| e.features[j]));
        col.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&col, 0.25);
        let q3 = quantile_sorted(&col, 0.75);
        let iqr = q3 - q1;
        fences.push((q1 - factor * iqr, q3 + factor * iqr));
    }
    let mut kept = Vec::with_capacity(n);
    let mut removed = Vec::new();
    for (i, ex) in ds.examples.iter().enumerate() {
        let outlier = ex
            .features
            .iter()
            .zip(&fences)
            .any(|(v, (lo, hi))| v < lo || v > hi);
        if outlier {
            removed.push(i);
        } else {
            kept.push(ex.clone());
        }
    }
    Ok((
        Dataset {
            name: ds.name.clone(),
            feature_count: ds.feature_count,
            class_count: ds.class_count,
            class_names: ds.class_names.clone(),
            examples: kept,
        },
        removed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_dataset(n: usize, features: usize, classes: usize) -> Dataset {
        let examples = (0..n)
            .map(|i| Example {
                features: (0..features).map(|j| (i * 31 + j * 7) as f64 % 13.0).collect(),
                label: i % classes,
            })
            .collect();
        Dataset {
            name: String::from("toy"),
            feature_count: features,
            class_count: classes,
            class_names: (0..classes).map(|k| alloc::format!("c{k}")).collect(),
            examples,
        }
    }

    fn sorted_multiset(examples: &[Example]) -> Vec<(Vec<u64>, usize)> {
        let mut keys: Vec<(Vec<u64>, usize)> = examples
            .iter()
            .map(|e| (e.features.iter().map(|v| v.to_bits()).collect(), e.label))
            .collect();
        keys.sort();
        keys
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let ds = toy_dataset(100, 3, 2);
        let s = split(&ds, &SplitSpec::new(7)).unwrap();
        assert_eq!(s.test.len(), 20);
        assert_eq!(s.validation.len(), 16);
        assert_eq!(s.train.len(), 64);

        let ds10 = toy_dataset(10, 2, 2);
        let s10 = split(&ds10, &SplitSpec::new(7)).unwrap();
        assert_eq!(s10.test.len(), 2);
        assert_eq!(s10.validation.len(), 1);
        assert_eq!(s10.train.len(), 7);
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let ds = toy_dataset(47, 4, 3);
        let a = split(&ds, &SplitSpec::new(99)).unwrap();
        let b = split(&ds, &SplitSpec::new(99)).unwrap();
        assert_eq!(a, b);

        let mut union = a.train.clone();
        union.extend(a.validation.iter().cloned());
        union.extend(a.test.iter().cloned());
        assert_eq!(sorted_multiset(&union), sorted_multiset(&ds.examples));
    }

    #[test]
    fn split_too_small_errors() {
        let ds = toy_dataset(4, 2, 2);
        assert!(matches!(
            split(&ds, &SplitSpec::new(1)),
            Err(Error::DatasetTooSmall { .. })
        ));
    }

    #[test]
    fn stratified_split_preserves_proportions() {
        let ds = toy_dataset(100, 2, 2); // 50/50 classes
        let mut spec = SplitSpec::new(3);
        spec.stratify = true;
        let s = split(&ds, &spec).unwrap();
        let count = |part: &[Example]| part.iter().filter(|e| e.label == 0).count();
        assert_eq!(count(&s.test), 10);
        assert_eq!(count(&s.validation), 8);
        assert_eq!(count(&s.train), 32);
        // still a partition
        let mut union = s.train.clone();
        union.extend(s.validation.iter().cloned());
        union.extend(s.test.iter().cloned());
        assert_eq!(sorted_multiset(&union), sorted_multiset(&ds.examples));
    }

    #[test]
    fn batches_shapes_and_ids() {
        let ds = toy_dataset(64, 2, 2);
        let batches = make_batches(&ds.examples, 10, 5, 0).unwrap();
        assert_eq!(batches.len(), 7);
        let sizes: Vec<usize> = batches.iter().map(|b| b.examples.len()).collect();
        assert_eq!(sizes, [10, 10, 10, 10, 10, 10, 4]);
        let ids: Vec<u64> = batches.iter().map(|b| b.id).collect();
        assert_eq!(ids, [0, 1, 2, 3, 4, 5, 6]);

        // ids keep growing across epochs
        let next = make_batches(&ds.examples, 10, 5, 1).unwrap();
        assert_eq!(next[0].id, 7);
        assert_eq!(next.last().unwrap().id, 13);
    }

    #[test]
    fn one_batch_when_m_exceeds_train() {
        let ds = toy_dataset(6, 2, 2);
        let batches = make_batches(&ds.examples, 100, 5, 0).unwrap();
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0].examples.len(), 6);
    }

    #[test]
    fn batches_deterministic_per_seed_epoch() {
        let ds = toy_dataset(30, 3, 2);
        let a = make_batches(&ds.examples, 7, 11, 3).unwrap();
        let b = make_batches(&ds.examples, 7, 11, 3).unwrap();
        assert_eq!(a, b);
        let c = make_batches(&ds.examples, 7, 11, 4).unwrap();
        assert_ne!(a, c); // different epoch shuffles differently
    }

    #[test]
    fn iqr_hand_fixture_removes_the_outlier() {
        // feature column {1..9, 100}: type-7 Q1 = 3.25, Q3 = 7.75,
        // IQR = 4.5, fences [-10.25, 21.25] at factor 3 -> only 100 removed
        let examples: Vec<Example> = (1..=9)
            .map(|v| Example { features: alloc::vec![v as f64], label: 0 })
            .chain(core::iter::once(Example { features: alloc::vec![100.0], label: 1 }))
            .collect();
        let ds = Dataset {
            name: String::from("outlier"),
            feature_count: 1,
            class_count: 2,
            class_names: alloc::vec![String::from("a"), String::from("b")],
            examples,
        };
        let (filtered, removed) = iqr_filter(&ds, 3.0).unwrap();
        assert_eq!(removed, alloc::vec![9]);
        assert_eq!(filtered.len(), 9);
        assert!(filtered.examples.iter().all(|e| e.features[0] <= 9.0));
    }

    #[test]
    fn iqr_identical_values_remove_nothing() {
        let ds = Dataset {
            name: String::from("flat"),
            feature_count: 1,
            class_count: 2,
            class_names: alloc::vec![String::from("a"), String::from("b")],
            examples: (0..8)
                .map(|i| Example { features: alloc::vec![4.2], label: i % 2 })
                .collect(),
        };
        let (filtered, removed) = iqr_filter(&ds, 3.0).unwrap();
        assert!(removed.is_empty());
        assert_eq!(filtered, ds);
    }

    #[test]
    fn iqr_clean_data_unchanged() {
        let ds = toy_dataset(20, 3, 2);
        let (filtered, removed) = iqr_filter(&ds, 3.0).unwrap();
        assert!(removed.is_empty());
        assert_eq!(filtered.examples, ds.examples);
    }

    #[test]
    fn iqr_too_small_errors() {
        let ds = toy_dataset(3, 1, 2);
        assert!(matches!(iqr_filter(&ds, 3.0), Err(Error::DatasetTooSmall { .. })));
    }

    proptest! {
        #[test]
        fn split_parts_partition_input(seed in 0u64..100, n in 5usize..60) {
            let ds = toy_dataset(n, 2, 2);
            if let Ok(s) = split(&ds, &SplitSpec::new(seed)) {
                prop_assert_eq!(s.train.len() + s.validation.len() + s.test.len(), n);
                let mut union = s.train.clone();
                union.extend(s.validation.iter().cloned());
                union.extend(s.test.iter().cloned());
                prop_assert_eq!(sorted_multiset(&union), sorted_multiset(&ds.examples));
            }
        }

        #[test]
        fn batches_cover_train_exactly_once(seed in 0u64..100, n in 1usize..50, m in 1usize..12, epoch in 0u64..4) {
            let ds = toy_dataset(n, 2, 2);
            let batches = make_batches(&ds.examples, m, seed, epoch).unwrap();
            let mut union = Vec::new();
            for b in &batches {
                union.extend(b.examples.iter().cloned());
            }
            prop_assert_eq!(sorted_multiset(&union), sorted_multiset(&ds.examples));
            prop_assert_eq!(batches.len() as u64, batches_per_epoch(n, m));
        }

        #[test]
        fn iqr_output_never_grows(n in 4usize..40, factor in 0.5f64..5.0) {
            let ds = toy_dataset(n, 3, 2);
            let (filtered, removed) = iqr_filter(&ds, factor).unwrap();
            prop_assert_eq!(filtered.len() + removed.len(), n);
            prop_assert!(filtered.len() <= n);
        }
    }
}
