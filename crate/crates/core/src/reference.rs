//! Slow reference implementations used by the test suites: a dense SGD
//! step and trainer, brute-force CRF enumeration, and central finite
//! differences. Nothing here is used by the trainer itself.

use crate::crf::CrfModel;
use crate::error::{Error, Result};
use crate::model::{log_sum_exp, LinearModel};
use crate::optimizer::{epoch_order, learning_rate, Hyperparams};
use crate::sparse::SparseVector;

/// Counts from one dense step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DenseStep {
    /// Weights the L1 term pushed across zero and that were clipped to 0.
    pub clipped: usize,
}

/// One full-vector elastic-net SGD step:
///
/// `w <- w (1 - alpha l2) - alpha grad`, then every weight moves `alpha l1`
/// towards zero, stopping at zero.
pub fn dense_sgd_step(w: &mut [f64], grad: &[f64], alpha: f64, l1: f64, l2: f64) -> DenseStep {
    assert_eq!(w.len(), grad.len());
    let mut report = DenseStep::default();
    let shrink = alpha * l1;
    for (wi, gi) in w.iter_mut().zip(grad) {
        let half = *wi * (1.0 - alpha * l2) - alpha * gi;
        *wi = if half > 0.0 {
            if half < shrink {
                report.clipped += 1;
            }
            (half - shrink).max(0.0)
        } else if half < 0.0 {
            if -half < shrink {
                report.clipped += 1;
            }
            (half + shrink).min(0.0)
        } else {
            0.0
        };
    }
    report
}

/// Single-threaded dense trainer with the same example order and learning
/// rate schedule as the lazy trainer. Active-bias epochs are not modeled;
/// `hyper.ab_start_epoch` must equal `hyper.epochs`.
pub fn dense_train<M: LinearModel>(
    model: &M,
    examples: &[M::Example],
    hyper: &Hyperparams,
) -> (Vec<f64>, DenseStep) {
    assert!(hyper.ab_start_epoch >= hyper.epochs, "dense oracle does not model active bias");
    let n = examples.len();
    let l1 = hyper.lambda1 / n as f64;
    let l2 = hyper.lambda2 / n as f64;
    let mut w = vec![0.0; model.num_weights()];
    let mut dense_grad = vec![0.0; w.len()];
    let mut sparse = Vec::new();
    let mut total = DenseStep::default();
    let mut k = 0u64;
    for epoch in 0..hyper.epochs {
        for j in epoch_order(hyper.seed, epoch, n) {
            let alpha = learning_rate(k, n, hyper.epochs, hyper.alpha0);
            model.loss_and_gradient(w.as_slice(), &examples[j], &mut sparse);
            dense_grad.iter_mut().for_each(|g| *g = 0.0);
            for &(i, g) in &sparse {
                dense_grad[i] += g;
            }
            total.clipped += dense_sgd_step(&mut w, &dense_grad, alpha, l1, l2).clipped;
            k += 1;
        }
    }
    (w, total)
}

const MAX_PATHS: f64 = 1e6;

/// Every label sequence of length `len` over `num_labels` labels, in
/// lexicographic order.
pub fn enumerate_paths(num_labels: usize, len: usize) -> Result<impl Iterator<Item = Vec<usize>>> {
    let count = (num_labels as f64).powi(len as i32);
    if count > MAX_PATHS {
        return Err(Error::TooLarge(count));
    }
    Ok((0..count as usize).map(move |mut code| {
        let mut path = vec![0; len];
        for slot in path.iter_mut().rev() {
            *slot = code % num_labels;
            code /= num_labels;
        }
        path
    }))
}

/// Log partition function by summing over every label path.
pub fn enumerate_log_z(model: &CrfModel, weights: &[f64], tokens: &[SparseVector]) -> Result<f64> {
    let pot = model.potentials(weights, tokens);
    let scores: Vec<f64> = enumerate_paths(model.num_labels, tokens.len())?
        .map(|p| pot.path_score(&p))
        .collect();
    Ok(log_sum_exp(&scores))
}

/// Central differences `(f(w + h e_i) - f(w - h e_i)) / 2h` for every
/// coordinate.
pub fn finite_difference_grad<F>(loss: F, weights: &[f64], step: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    assert!(step > 0.0);
    let mut w = weights.to_vec();
    (0..w.len())
        .map(|i| {
            let orig = w[i];
            w[i] = orig + step;
            let plus = loss(&w);
            w[i] = orig - step;
            let minus = loss(&w);
            w[i] = orig;
            (plus - minus) / (2.0 * step)
        })
        .collect()
}
