//! Multinomial logistic regression: softmax probabilities, mean
//! cross-entropy loss, and the analytic mini-batch gradient.
//!
//! Weights live in a `K x (F+1)` [`Matrix`]; the last column of each class
//! row is the bias, applied as an implicit constant-1 feature. The binary
//! case runs through the same softmax path (two rows), which reduces to the
//! standard sigmoid.

use alloc::vec::Vec;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Probabilities are clamped to this range before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

/// Weight-init range: each entry uniform in [-INIT_RANGE, INIT_RANGE].
pub const INIT_RANGE: f64 = 0.05;

/// One labeled training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: usize,
}

/// An indexed group of examples; the unit of gradient computation and of
/// the guided ledger. Ids are globally monotone across epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniBatch {
    pub id: u64,
    pub examples: Vec<Example>,
}

pub fn init_weights<R: Rng>(class_count: usize, feature_count: usize, rng: &mut R) -> Matrix {
    let mut w = Matrix::zeros(class_count, feature_count + 1);
    for v in w.iter_mut() {
        *v = rng.gen_range(-INIT_RANGE..=INIT_RANGE);
    }
    w
}

fn check_dims(weights: &Matrix, x: &[f64]) -> Result<()> {
    if x.len() + 1 != weights.cols() {
        return Err(Error::DimensionMismatch {
            expected: weights.cols() - 1,
            got: x.len(),
        });
    }
    Ok(())
}

fn class_scores(weights: &Matrix, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for k in 0..weights.rows() {
        let row = weights.row(k);
        let mut s = row[x.len()]; // bias
        for (w, xi) in row[..x.len()].iter().zip(x) {
            s += w * xi;
        }
        out.push(s);
    }
}

fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = libm::exp(*s - max);
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

/// Class-probability vector for one feature vector, softmax over per-class
/// scores. Entries are strictly positive and sum to 1 (within 1e-12) for
/// finite weights.
pub fn predict_probs(weights: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    check_dims(weights, x)?;
    let mut p = Vec::with_capacity(weights.rows());
    class_scores(weights, x, &mut p);
    softmax_in_place(&mut p);
    Ok(p)
}

fn neg_log_likelihood(probs: &[f64], label: usize) -> f64 {
    let p = probs[label].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -libm::log(p)
}

/// Mean cross-entropy of `weights` over `examples`.
pub fn loss(weights: &Matrix, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::EmptyInput("loss over empty example list"));
    }
    let mut scores = Vec::with_capacity(weights.rows());
    let mut total = 0.0;
    for ex in examples {
        check_dims(weights, &ex.features)?;
        class_scores(weights, &ex.features, &mut scores);
        softmax_in_place(&mut scores);
        total += neg_log_likelihood(&scores, ex.label);
    }
    Ok(total / examples.len() as f64)
}

/// Mini-batch-averaged analytic gradient of [`loss`]:
/// `(1/n) sum (p - onehot(y)) (x;1)^T`, shaped like the weights.
pub fn gradient(weights: &Matrix, examples: &[Example]) -> Result<Matrix> {
    gradient_and_loss(weights, examples).map(|(g, _)| g)
}

/// Gradient and loss in one pass over the batch; the engine uses this so a
/// worker's gradient report can carry the batch loss it saw at read time.
pub fn gradient_and_loss(weights: &Matrix, examples: &[Example]) -> Result<(Matrix, f64)> {
    if examples.is_empty() {
        return Err(Error::EmptyInput("gradient over empty batch"));
    }
    let mut grad = Matrix::zeros(weights.rows(), weights.cols());
    let mut scores = Vec::with_capacity(weights.rows());
    let mut total_loss = 0.0;
    for ex in examples {
        check_dims(weights, &ex.features)?;
        class_scores(weights, &ex.features, &mut scores);
        softmax_in_place(&mut scores);
        total_loss += neg_log_likelihood(&scores, ex.label);
        for k in 0..weights.rows() {
            let residual = scores[k] - if k == ex.label { 1.0 } else { 0.0 };
            let row = grad.row_mut(k);
            for (g, xi) in row[..ex.features.len()].iter_mut().zip(&ex.features) {
                *g += residual * xi;
            }
            row[ex.features.len()] += residual; // bias input is 1
        }
    }
    let inv = 1.0 / examples.len() as f64;
    grad.scale(inv);
    Ok((grad, total_loss * inv))
}

/// Fraction of examples whose argmax class equals the label.
/// Argmax ties break toward the lowest class index.
pub fn accuracy(weights: &Matrix, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::EmptyInput("accuracy over empty example list"));
    }
    let mut scores = Vec::with_capacity(weights.rows());
    let mut hits = 0usize;
    for ex in examples {
        check_dims(weights, &ex.features)?;
        class_scores(weights, &ex.features, &mut scores);
        if argmax_lowest(&scores) == ex.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / examples.len() as f64)
}

/// Index of the largest value; first occurrence wins on ties.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
