//! Multinomial log-linear classifier.
//!
//! Weights are laid out feature-major: the weight of feature `f` for class
//! `c` lives at `f * C + c`, so the weights touched by one input form
//! contiguous blocks of `C`.

use crate::alphabet::Alphabet;
use crate::dataset::ClassifiedExample;
use crate::eval::accuracy;
use crate::model::{argmax, log_sum_exp, ExampleLoss, LinearModel};
use crate::sparse::{strided_dot, SparseVector, WeightView};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaxEntModel {
    pub num_classes: usize,
    pub num_features: usize,
}

impl MaxEntModel {
    pub fn new(num_features: usize, num_classes: usize) -> Self {
        MaxEntModel {
            num_classes,
            num_features,
        }
    }

    #[inline]
    pub fn index(&self, feature: usize, class: usize) -> usize {
        feature * self.num_classes + class
    }

    pub fn scores<W: WeightView + ?Sized>(&self, weights: &W, sv: &SparseVector) -> Vec<f64> {
        let c = self.num_classes;
        let mut scores = vec![0.0; c];
        for (f, x) in sv.iter() {
            let base = f * c;
            for (class, score) in scores.iter_mut().enumerate() {
                *score += weights.weight(base + class) * x;
            }
        }
        scores
    }

    /// Score of a single class.
    pub fn class_score<W: WeightView + ?Sized>(&self, weights: &W, sv: &SparseVector, class: usize) -> f64 {
        strided_dot(weights, sv, self.num_classes, class)
    }

    pub fn predict_proba<W: WeightView + ?Sized>(&self, weights: &W, sv: &SparseVector) -> Vec<f64> {
        softmax(&self.scores(weights, sv))
    }

    /// Highest-scoring class, lowest id on ties.
    pub fn predict<W: WeightView + ?Sized>(&self, weights: &W, sv: &SparseVector) -> usize {
        argmax(&self.scores(weights, sv))
    }

    /// Convenience wrapper returning the gradient as a fresh vector.
    pub fn nll_and_gradient<W: WeightView + ?Sized>(
        &self,
        weights: &W,
        example: &ClassifiedExample,
    ) -> (ExampleLoss, Vec<(usize, f64)>) {
        let mut grad = Vec::new();
        let loss = self.loss_and_gradient(weights, example, &mut grad);
        (loss, grad)
    }
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl LinearModel for MaxEntModel {
    type Example = ClassifiedExample;

    fn num_weights(&self) -> usize {
        self.num_features * self.num_classes
    }

    fn active_indices(&self, example: &ClassifiedExample, out: &mut Vec<usize>) {
        out.clear();
        for (f, _) in example.features.iter() {
            let base = f * self.num_classes;
            out.extend(base..base + self.num_classes);
        }
    }

    fn loss_and_gradient<W: WeightView + ?Sized>(
        &self,
        weights: &W,
        example: &ClassifiedExample,
        grad: &mut Vec<(usize, f64)>,
    ) -> ExampleLoss {
        let scores = self.scores(weights, &example.features);
        let probs = softmax(&scores);
        let loss = log_sum_exp(&scores) - scores[example.label];

        grad.clear();
        for (f, x) in example.features.iter() {
            let base = f * self.num_classes;
            for (class, p) in probs.iter().enumerate() {
                let indicator = if class == example.label { 1.0 } else { 0.0 };
                grad.push((base + class, (p - indicator) * x));
            }
        }
        ExampleLoss {
            loss,
            gold_prob: probs[example.label],
        }
    }

    fn dev_metric(&self, weights: &[f64], examples: &[ClassifiedExample], _labels: &Alphabet) -> f64 {
        let gold: Vec<usize> = examples.iter().map(|e| e.label).collect();
        let pred: Vec<usize> = examples
            .iter()
            .map(|e| self.predict(weights, &e.features))
            .collect();
        accuracy(&gold, &pred).map(|r| r.value).unwrap_or(0.0)
    }

    fn metric_name(&self) -> &'static str {
        "accuracy"
    }
}
