//! Active-bias sampling: examples are drawn with probability peaked at
//! medium model confidence, and each draw's step size is scaled by an
//! importance weight that averages to one.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::error::{Error, Result};
use crate::optimizer::store::AtomicF64;

/// Confidence assumed for examples that have never been visited.
pub const UNVISITED_CONFIDENCE: f64 = 0.5;

const CONFIDENCE_SLACK: f64 = 1e-9;

/// Ring buffer of the last `h` gold-output probabilities per example.
///
/// Slots of different examples are independent, so concurrent recording of
/// distinct examples is safe. Concurrent recording of the same example may
/// lose one of the values.
#[derive(Debug)]
pub struct ConfidenceTracker {
    history: usize,
    values: Vec<AtomicF64>,
    visits: Vec<AtomicU64>,
}

impl ConfidenceTracker {
    pub fn new(num_examples: usize, history: usize) -> Self {
        assert!(history > 0, "history length must be positive");
        ConfidenceTracker {
            history,
            values: (0..num_examples * history).map(|_| AtomicF64::new(0.0)).collect(),
            visits: (0..num_examples).map(|_| AtomicU64::new(0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.visits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }

    pub fn history(&self) -> usize {
        self.history
    }

    pub fn record(&self, example: usize, p: f64) -> Result<()> {
        if !(-CONFIDENCE_SLACK..=1.0 + CONFIDENCE_SLACK).contains(&p) {
            return Err(Error::InvalidConfidence(p));
        }
        let n = self.visits[example].load(Ordering::Relaxed);
        let slot = example * self.history + (n % self.history as u64) as usize;
        self.values[slot].store(p.clamp(0.0, 1.0));
        self.visits[example].store(n + 1, Ordering::Relaxed);
        Ok(())
    }

    pub fn visits(&self, example: usize) -> u64 {
        self.visits[example].load(Ordering::Relaxed)
    }

    /// Values currently held for `example`, oldest first.
    pub fn recent(&self, example: usize) -> Vec<f64> {
        let n = self.visits(example);
        let h = self.history as u64;
        let held = n.min(h);
        (n - held..n)
            .map(|v| self.values[example * self.history + (v % h) as usize].load())
            .collect()
    }

    /// Mean of the held values, or [`UNVISITED_CONFIDENCE`].
    pub fn mean(&self, example: usize) -> f64 {
        let recent = self.recent(example);
        if recent.is_empty() {
            UNVISITED_CONFIDENCE
        } else {
            recent.iter().sum::<f64>() / recent.len() as f64
        }
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.mean(j)).collect()
    }
}

/// Sampling probabilities and importance weights over the training set.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingDistribution {
    /// Normalized sampling probabilities.
    pub probs: Vec<f64>,
    /// Importance weights, mean 1.
    pub importance: Vec<f64>,
    /// Smoothing prior: the mean of the base terms.
    pub epsilon: f64,
    /// Normalizer of the importance weights, `mean(base) + epsilon`.
    pub normalizer: f64,
    cumulative: Vec<f64>,
}

impl SamplingDistribution {
    pub fn from_tracker(tracker: &ConfidenceTracker) -> Self {
        Self::from_confidences(&tracker.means())
    }

    /// Builds the distribution from mean confidences:
    ///
    /// ```text
    /// base_j = p_j (1 - p_j)
    /// eps    = mean(base)
    /// P(j)   ∝ base_j + eps
    /// v_j    = (base_j + eps) / (mean(base) + eps)
    /// ```
    ///
    /// Falls back to uniform sampling with unit weights when every base
    /// term is zero.
    pub fn from_confidences(confidences: &[f64]) -> Self {
        assert!(!confidences.is_empty(), "no examples to sample from");
        let n = confidences.len() as f64;
        let base: Vec<f64> = confidences.iter().map(|p| p * (1.0 - p)).collect();
        let epsilon = base.iter().sum::<f64>() / n;
        if epsilon <= 0.0 {
            return Self::uniform(confidences.len());
        }
        let normalizer = epsilon + epsilon;
        let unnormalized: Vec<f64> = base.iter().map(|b| b + epsilon).collect();
        let total: f64 = unnormalized.iter().sum();
        let probs: Vec<f64> = unnormalized.iter().map(|x| x / total).collect();
        let importance = unnormalized.iter().map(|x| x / normalizer).collect();
        SamplingDistribution {
            cumulative: cumulative(&probs),
            probs,
            importance,
            epsilon,
            normalizer,
        }
    }

    pub fn uniform(n: usize) -> Self {
        let probs = vec![1.0 / n as f64; n];
        SamplingDistribution {
            cumulative: cumulative(&probs),
            probs,
            importance: vec![1.0; n],
            epsilon: 0.0,
            normalizer: 0.0,
        }
    }

    /// Distribution from explicit probabilities, with unit importance
    /// weights. Probabilities are renormalized.
    pub fn from_probs(probs: &[f64]) -> Self {
        let total: f64 = probs.iter().sum();
        let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
        SamplingDistribution {
            cumulative: cumulative(&probs),
            importance: vec![1.0; probs.len()],
            probs,
            epsilon: 0.0,
            normalizer: 0.0,
        }
    }

    /// `count` independent draws with replacement, by inverse CDF.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<usize> {
        let last = self.probs.len() - 1;
        (0..count)
            .map(|_| {
                let r: f64 = rng.gen();
                self.cumulative.partition_point(|&c| c <= r).min(last)
            })
            .collect()
    }
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    // trailing zero-probability entries must stay unreachable
    if let Some(last_positive) = probs.iter().rposition(|&p| p > 0.0) {
        for c in &mut out[last_positive..] {
            *c = 1.0;
        }
    }
    out
}
