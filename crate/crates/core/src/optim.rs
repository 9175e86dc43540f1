//! Weight-update rules applied by the parameter server: vanilla SGD,
//! RMSprop, and Adagrad. State (the accumulator) is owned by the single
//! server context; workers never hold optimizer state.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Rule {
    Vanilla,
    Rmsprop,
    Adagrad,
}

/// First-step accumulator semantics for RMSprop.
///
/// `Paper` stores the first gradient's magnitude (`r_1 = |v_1|`, literal up
/// to the absolute value that keeps the accumulator nonnegative);
/// `Square` is the conventional rule, `r_0 = 0` with the plain recurrence
/// `r_t = beta * r_{t-1} + (1 - beta) * v_t^2` from the first step on.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RmspropInit {
    Paper,
    Square,
}

pub const DEFAULT_BETA: f64 = 0.9;
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    rule: Rule,
    eta: f64,
    beta: f64,
    epsilon: f64,
    rmsprop_init: RmspropInit,
    accumulator: Matrix,
    step_count: u64,
}

impl OptimizerState {
    pub fn new(rule: Rule, eta: f64, rows: usize, cols: usize) -> Result<Self> {
        Self::with_options(rule, eta, rows, cols, DEFAULT_BETA, DEFAULT_EPSILON, RmspropInit::Paper)
    }

    pub fn with_options(
        rule: Rule,
        eta: f64,
        rows: usize,
        cols: usize,
        beta: f64,
        epsilon: f64,
        rmsprop_init: RmspropInit,
    ) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::InvalidConfig(alloc::format!("eta must be positive, got {eta}")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidConfig(alloc::format!("beta must be in (0, 1), got {beta}")));
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(OptimizerState {
            rule,
            eta,
            beta,
            epsilon,
            rmsprop_init,
            accumulator: Matrix::zeros(rows, cols),
            step_count: 0,
        })
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn accumulator(&self) -> &Matrix {
        &self.accumulator
    }

    /// Apply one update in place. Errors (without touching the weights) if
    /// the gradient has the wrong shape or a non-finite entry.
    pub fn step(&mut self, weights: &mut Matrix, gradient: &Matrix) -> Result<()> {
        if !weights.same_shape(gradient) {
            return Err(Error::DimensionMismatch {
                expected: weights.rows() * weights.cols(),
                got: gradient.rows() * gradient.cols(),
            });
        }
        if !gradient.is_finite() {
            return Err(Error::NonFiniteGradient {
                step: self.step_count + 1,
            });
        }
        match self.rule {
            Rule::Vanilla => {
                weights.add_scaled(gradient, -self.eta);
            }
            Rule::Rmsprop => {
                let first = self.step_count == 0;
                for ((w, g), acc) in weights
                    .iter_mut()
                    .zip(gradient.iter())
                    .zip(self.accumulator.iter_mut())
                {
                    if first && self.rmsprop_init == RmspropInit::Paper {
                        *acc = libm::fabs(*g);
                    } else {
                        *acc = self.beta * *acc + (1.0 - self.beta) * g * g;
                    }
                    *w -= self.eta * g / libm::sqrt(*acc + self.epsilon);
                }
            }
            Rule::Adagrad => {
                for ((w, g), acc) in weights
                    .iter_mut()
                    .zip(gradient.iter())
                    .zip(self.accumulator.iter_mut())
                {
                    *acc += g * g;
                    *w -= self.eta * g / libm::sqrt(*acc + self.epsilon);
                }
            }
        }
        self.step_count += 1;
        Ok(())
    }
}
