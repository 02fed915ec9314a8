//! Lock-free parallel SGD with lazy elastic-net updates.

pub mod store;
mod train;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use store::{ScaledView, WeightStore};
pub use train::{grid_search_alpha0, select_alpha0, train, train_with, EpochReport, GridResult, TrainOutput};

/// Training hyperparameters. `lambda1` and `lambda2` are dataset-level
/// strengths; the trainer divides them by the number of examples.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams {
    pub alpha0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub epochs: usize,
    /// First epoch that samples by confidence. `epochs` disables sampling.
    pub ab_start_epoch: usize,
    /// Number of recent confidences averaged per example.
    pub history: usize,
    pub threads: usize,
    pub seed: u64,
    /// Stop when the dev metric fails to improve for two epochs in a row.
    pub early_stop: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            alpha0: 0.1,
            lambda1: 0.0,
            lambda2: 0.0,
            epochs: 10,
            ab_start_epoch: 7,
            history: 3,
            threads: 1,
            seed: 42,
            early_stop: false,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidHyperparams(msg));
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return fail(format!("alpha0 must be positive, got {}", self.alpha0));
        }
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return fail(format!("lambda1 must be non-negative, got {}", self.lambda1));
        }
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return fail(format!("lambda2 must be non-negative, got {}", self.lambda2));
        }
        if self.epochs == 0 {
            return fail("epochs must be positive".into());
        }
        if self.ab_start_epoch > self.epochs {
            return fail(format!(
                "ab_start_epoch {} exceeds epochs {}",
                self.ab_start_epoch, self.epochs
            ));
        }
        if self.history == 0 {
            return fail("history must be positive".into());
        }
        if self.threads == 0 {
            return fail("threads must be positive".into());
        }
        Ok(())
    }

    /// Plain shuffled SGD for every epoch.
    pub fn without_active_bias(mut self) -> Self {
        self.ab_start_epoch = self.epochs;
        self
    }
}

/// Linearly decaying step size `alpha0 (1 - k / (N epochs))`, clamped at 0.
pub fn learning_rate(k: u64, n: usize, epochs: usize, alpha0: f64) -> f64 {
    let total = (n * epochs) as f64;
    (alpha0 * (1.0 - k as f64 / total)).max(0.0)
}

/// Random generator for one epoch, derived from the run seed and the epoch
/// index.
pub fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    rng
}

/// Fisher-Yates permutation of `0..n` for the given epoch.
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut epoch_rng(seed, epoch));
    order
}
