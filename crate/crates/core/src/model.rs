use crate::alphabet::Alphabet;
use crate::sparse::WeightView;

/// Per-example loss and the probability the model assigns to the gold
/// output, as returned by [`LinearModel::loss_and_gradient`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExampleLoss {
    pub loss: f64,
    pub gold_prob: f64,
}

/// A log-linear model over a flat weight vector, trainable by the SGD
/// trainer.
pub trait LinearModel: Sync {
    type Example: Sync;

    fn num_weights(&self) -> usize;

    /// Weight indices the example's loss depends on. The trainer brings
    /// these up to date before computing the gradient.
    fn active_indices(&self, example: &Self::Example, out: &mut Vec<usize>);

    /// Negative log-likelihood of the example. `grad` is cleared and filled
    /// with `(index, d loss / d w_index)` pairs with unique indices.
    fn loss_and_gradient<W: WeightView + ?Sized>(
        &self,
        weights: &W,
        example: &Self::Example,
        grad: &mut Vec<(usize, f64)>,
    ) -> ExampleLoss;

    /// Dev-set metric in [0, 1] used for per-epoch reports and grid search.
    fn dev_metric(&self, weights: &[f64], examples: &[Self::Example], labels: &Alphabet) -> f64;

    /// Name of the metric returned by `dev_metric`.
    fn metric_name(&self) -> &'static str;
}

/// `log(sum(exp(xs)))` with max subtraction.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
