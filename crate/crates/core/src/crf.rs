//! Linear-chain conditional random field.
//!
//! Weight layout, with `F` features and `L` labels:
//!
//! ```text
//! [0, F*L)                  emission (f, y)       at f*L + y
//! [F*L, F*L + L*L)          transition (y', y)    at F*L + y'*L + y
//! [F*L + L*L, F*L + L*L+L)  begin -> y            (row L of the transition block)
//! [F*L + (L+1)*L, ... + L)  y -> end
//! ```
//!
//! Inference runs in log space. Transition, begin and end weights are
//! active for every sequence.

use crate::alphabet::Alphabet;
use crate::dataset::SequenceExample;
use crate::eval::span_f1;
use crate::model::{log_sum_exp, ExampleLoss, LinearModel};
use crate::sparse::{strided_dot, SparseVector, WeightView};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CrfModel {
    pub num_labels: usize,
    pub num_features: usize,
}

/// Dense per-sequence potentials gathered from the weight vector.
#[derive(Clone, Debug)]
pub struct Potentials {
    /// `emission[t * L + y]`
    pub emission: Vec<f64>,
    /// `transition[y' * L + y]`
    pub transition: Vec<f64>,
    pub begin: Vec<f64>,
    pub end: Vec<f64>,
    pub len: usize,
    pub num_labels: usize,
}

impl Potentials {
    #[inline]
    fn emit(&self, t: usize, y: usize) -> f64 {
        self.emission[t * self.num_labels + y]
    }

    #[inline]
    fn trans(&self, prev: usize, y: usize) -> f64 {
        self.transition[prev * self.num_labels + y]
    }

    /// Unnormalized log score of a label path.
    pub fn path_score(&self, labels: &[usize]) -> f64 {
        let mut score = self.begin[labels[0]] + self.end[labels[labels.len() - 1]];
        for (t, &y) in labels.iter().enumerate() {
            score += self.emit(t, y);
            if t > 0 {
                score += self.trans(labels[t - 1], y);
            }
        }
        score
    }
}

/// Forward-backward tables in log space.
#[derive(Clone, Debug)]
pub struct Marginals {
    pub log_z: f64,
    /// `node[t * L + y]` = p(y_t = y | x)
    pub node: Vec<f64>,
    /// `edge[y' * L + y]` = sum over t >= 1 of p(y_{t-1} = y', y_t = y | x)
    pub edge: Vec<f64>,
    pub num_labels: usize,
}

impl Marginals {
    pub fn at(&self, t: usize) -> &[f64] {
        &self.node[t * self.num_labels..(t + 1) * self.num_labels]
    }
}

impl CrfModel {
    pub fn new(num_features: usize, num_labels: usize) -> Self {
        CrfModel {
            num_labels,
            num_features,
        }
    }

    #[inline]
    pub fn emission_index(&self, feature: usize, label: usize) -> usize {
        feature * self.num_labels + label
    }

    #[inline]
    pub fn transition_index(&self, prev: usize, label: usize) -> usize {
        self.num_features * self.num_labels + prev * self.num_labels + label
    }

    #[inline]
    pub fn begin_index(&self, label: usize) -> usize {
        self.transition_index(self.num_labels, label)
    }

    #[inline]
    pub fn end_index(&self, label: usize) -> usize {
        self.num_features * self.num_labels + (self.num_labels + 1) * self.num_labels + label
    }

    fn structural_range(&self) -> std::ops::Range<usize> {
        self.transition_index(0, 0)..self.num_weights()
    }

    pub fn potentials<W: WeightView + ?Sized>(&self, weights: &W, tokens: &[SparseVector]) -> Potentials {
        let l = self.num_labels;
        let mut emission = Vec::with_capacity(tokens.len() * l);
        for sv in tokens {
            emission.extend((0..l).map(|y| strided_dot(weights, sv, l, y)));
        }
        let transition = (0..l * l)
            .map(|i| weights.weight(self.transition_index(i / l, i % l)))
            .collect();
        Potentials {
            emission,
            transition,
            begin: (0..l).map(|y| weights.weight(self.begin_index(y))).collect(),
            end: (0..l).map(|y| weights.weight(self.end_index(y))).collect(),
            len: tokens.len(),
            num_labels: l,
        }
    }

    /// Log partition function by the forward recursion.
    pub fn forward_log_z<W: WeightView + ?Sized>(&self, weights: &W, tokens: &[SparseVector]) -> f64 {
        let pot = self.potentials(weights, tokens);
        let alpha = forward(&pot);
        final_log_z(&pot, &alpha)
    }

    /// Posterior marginals by forward-backward.
    pub fn marginals<W: WeightView + ?Sized>(&self, weights: &W, tokens: &[SparseVector]) -> Marginals {
        marginals(&self.potentials(weights, tokens))
    }

    pub fn path_score<W: WeightView + ?Sized>(&self, weights: &W, tokens: &[SparseVector], labels: &[usize]) -> f64 {
        self.potentials(weights, tokens).path_score(labels)
    }

    /// Best label path. At every max decision the lowest label id wins ties.
    pub fn viterbi_decode<W: WeightView + ?Sized>(&self, weights: &W, tokens: &[SparseVector]) -> Vec<usize> {
        viterbi(&self.potentials(weights, tokens))
    }

    pub fn sequence_nll_and_gradient<W: WeightView + ?Sized>(
        &self,
        weights: &W,
        example: &SequenceExample,
    ) -> (ExampleLoss, Vec<(usize, f64)>) {
        let mut grad = Vec::new();
        let loss = self.loss_and_gradient(weights, example, &mut grad);
        (loss, grad)
    }
}

fn forward(pot: &Potentials) -> Vec<f64> {
    let l = pot.num_labels;
    let mut alpha = vec![0.0; pot.len * l];
    let mut buf = vec![0.0; l];
    for y in 0..l {
        alpha[y] = pot.begin[y] + pot.emit(0, y);
    }
    for t in 1..pot.len {
        for y in 0..l {
            for (prev, b) in buf.iter_mut().enumerate() {
                *b = alpha[(t - 1) * l + prev] + pot.trans(prev, y);
            }
            alpha[t * l + y] = pot.emit(t, y) + log_sum_exp(&buf);
        }
    }
    alpha
}

fn final_log_z(pot: &Potentials, alpha: &[f64]) -> f64 {
    let l = pot.num_labels;
    let last = (pot.len - 1) * l;
    let terms: Vec<f64> = (0..l).map(|y| alpha[last + y] + pot.end[y]).collect();
    log_sum_exp(&terms)
}

fn backward(pot: &Potentials) -> Vec<f64> {
    let l = pot.num_labels;
    let mut beta = vec![0.0; pot.len * l];
    let mut buf = vec![0.0; l];
    let last = (pot.len - 1) * l;
    beta[last..last + l].copy_from_slice(&pot.end);
    for t in (0..pot.len - 1).rev() {
        for y in 0..l {
            for (next, b) in buf.iter_mut().enumerate() {
                *b = pot.trans(y, next) + pot.emit(t + 1, next) + beta[(t + 1) * l + next];
            }
            beta[t * l + y] = log_sum_exp(&buf);
        }
    }
    beta
}

fn marginals(pot: &Potentials) -> Marginals {
    let l = pot.num_labels;
    let alpha = forward(pot);
    let beta = backward(pot);
    let log_z = final_log_z(pot, &alpha);
    let node = alpha
        .iter()
        .zip(&beta)
        .map(|(a, b)| (a + b - log_z).exp())
        .collect();
    let mut edge = vec![0.0; l * l];
    for t in 1..pot.len {
        for prev in 0..l {
            let a = alpha[(t - 1) * l + prev];
            for y in 0..l {
                edge[prev * l + y] +=
                    (a + pot.trans(prev, y) + pot.emit(t, y) + beta[t * l + y] - log_z).exp();
            }
        }
    }
    Marginals {
        log_z,
        node,
        edge,
        num_labels: l,
    }
}

fn viterbi(pot: &Potentials) -> Vec<usize> {
    let l = pot.num_labels;
    let mut delta: Vec<f64> = (0..l).map(|y| pot.begin[y] + pot.emit(0, y)).collect();
    let mut back = vec![0usize; pot.len * l];
    let mut next = vec![0.0; l];
    for t in 1..pot.len {
        for y in 0..l {
            let mut best = 0;
            let mut best_score = delta[0] + pot.trans(0, y);
            for prev in 1..l {
                let s = delta[prev] + pot.trans(prev, y);
                if s > best_score {
                    best = prev;
                    best_score = s;
                }
            }
            back[t * l + y] = best;
            next[y] = best_score + pot.emit(t, y);
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut last = 0;
    let mut last_score = delta[0] + pot.end[0];
    for y in 1..l {
        let s = delta[y] + pot.end[y];
        if s > last_score {
            last = y;
            last_score = s;
        }
    }
    let mut path = vec![0; pot.len];
    path[pot.len - 1] = last;
    for t in (1..pot.len).rev() {
        path[t - 1] = back[t * l + path[t]];
    }
    path
}

impl LinearModel for CrfModel {
    type Example = SequenceExample;

    fn num_weights(&self) -> usize {
        self.num_features * self.num_labels + (self.num_labels + 1) * self.num_labels + self.num_labels
    }

    fn active_indices(&self, example: &SequenceExample, out: &mut Vec<usize>) {
        out.clear();
        for sv in &example.token_features {
            for (f, _) in sv.iter() {
                let base = f * self.num_labels;
                out.extend(base..base + self.num_labels);
            }
        }
        out.sort_unstable();
        out.dedup();
        out.extend(self.structural_range());
    }

    fn loss_and_gradient<W: WeightView + ?Sized>(
        &self,
        weights: &W,
        example: &SequenceExample,
        grad: &mut Vec<(usize, f64)>,
    ) -> ExampleLoss {
        let l = self.num_labels;
        let pot = self.potentials(weights, &example.token_features);
        let m = marginals(&pot);
        let gold = &example.labels;
        let loss = m.log_z - pot.path_score(gold);

        grad.clear();
        for (t, sv) in example.token_features.iter().enumerate() {
            let p = m.at(t);
            for (f, x) in sv.iter() {
                for (y, &py) in p.iter().enumerate() {
                    let indicator = if y == gold[t] { 1.0 } else { 0.0 };
                    grad.push((self.emission_index(f, y), (py - indicator) * x));
                }
            }
        }
        // the same feature may fire at several positions
        grad.sort_unstable_by_key(|&(i, _)| i);
        grad.dedup_by(|next, kept| {
            if next.0 == kept.0 {
                kept.1 += next.1;
                true
            } else {
                false
            }
        });

        let mut empirical = vec![0.0; l * l];
        for pair in gold.windows(2) {
            empirical[pair[0] * l + pair[1]] += 1.0;
        }
        for prev in 0..l {
            for y in 0..l {
                let i = prev * l + y;
                grad.push((self.transition_index(prev, y), m.edge[i] - empirical[i]));
            }
        }
        let first = m.at(0);
        for (y, &p) in first.iter().enumerate() {
            grad.push((self.begin_index(y), p - if y == gold[0] { 1.0 } else { 0.0 }));
        }
        let last = m.at(gold.len() - 1);
        for (y, &p) in last.iter().enumerate() {
            let indicator = if y == gold[gold.len() - 1] { 1.0 } else { 0.0 };
            grad.push((self.end_index(y), p - indicator));
        }

        ExampleLoss {
            loss,
            gold_prob: (-loss).exp(),
        }
    }

    fn dev_metric(&self, weights: &[f64], examples: &[SequenceExample], labels: &Alphabet) -> f64 {
        let name = |id: usize| labels.string_of(id as u32).unwrap_or("O").to_owned();
        let gold: Vec<Vec<String>> = examples
            .iter()
            .map(|e| e.labels.iter().map(|&y| name(y)).collect())
            .collect();
        let pred: Vec<Vec<String>> = examples
            .iter()
            .map(|e| {
                self.viterbi_decode(weights, &e.token_features)
                    .into_iter()
                    .map(name)
                    .collect()
            })
            .collect();
        span_f1(&gold, &pred).map(|r| r.value).unwrap_or(0.0)
    }

    fn metric_name(&self) -> &'static str {
        "f1"
    }
}
