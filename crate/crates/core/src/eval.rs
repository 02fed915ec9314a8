//! Accuracy, conlleval-style span F1, and paired bootstrap significance.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// Per-class (or per-entity-type) counts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClassStats {
    pub name: String,
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl ClassStats {
    pub fn precision(&self) -> f64 {
        ratio(self.correct, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.correct, self.gold)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// `"accuracy"` or `"f1"`.
    pub metric: &'static str,
    /// In [0, 1].
    pub value: f64,
    /// Correct predictions (accuracy) or correct spans (F1).
    pub correct: usize,
    /// Predicted spans; equals `total` for accuracy.
    pub predicted: usize,
    /// Gold spans; equals `total` for accuracy.
    pub gold: usize,
    /// Instances (accuracy) or tokens (F1).
    pub total: usize,
    pub breakdown: Vec<ClassStats>,
}

impl EvalReport {
    pub fn precision(&self) -> f64 {
        ratio(self.correct, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.correct, self.gold)
    }

    /// The machine-readable summary line.
    pub fn summary_line(&self) -> String {
        format!("metric={} value={:.6}", self.metric, self.value)
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.metric {
            "f1" => {
                writeln!(
                    f,
                    "processed {} tokens with {} phrases; found: {} phrases; correct: {}.",
                    self.total, self.gold, self.predicted, self.correct
                )?;
                writeln!(
                    f,
                    "precision: {:6.2}%; recall: {:6.2}%; FB1: {:6.2}",
                    100.0 * self.precision(),
                    100.0 * self.recall(),
                    100.0 * self.value
                )?;
            }
            _ => {
                writeln!(
                    f,
                    "processed {} instances; correct: {}.",
                    self.total, self.correct
                )?;
                writeln!(f, "accuracy: {:6.2}%", 100.0 * self.value)?;
            }
        }
        for c in &self.breakdown {
            writeln!(
                f,
                "{:>17}: precision: {:6.2}%; recall: {:6.2}%; FB1: {:6.2}  {}",
                c.name,
                100.0 * c.precision(),
                100.0 * c.recall(),
                100.0 * c.f1(),
                c.predicted
            )?;
        }
        write!(f, "{}", self.summary_line())
    }
}

/// Fraction of positions where `pred` equals `gold`.
pub fn accuracy<T: PartialEq + ToString>(gold: &[T], pred: &[T]) -> Result<EvalReport> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch(gold.len(), pred.len()));
    }
    if gold.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut classes: BTreeMap<String, ClassStats> = BTreeMap::new();
    let mut correct = 0;
    for (g, p) in gold.iter().zip(pred) {
        let hit = g == p;
        correct += hit as usize;
        let gs = classes.entry(g.to_string()).or_default();
        gs.gold += 1;
        gs.correct += hit as usize;
        classes.entry(p.to_string()).or_default().predicted += 1;
    }
    Ok(EvalReport {
        metric: "accuracy",
        value: correct as f64 / gold.len() as f64,
        correct,
        predicted: gold.len(),
        gold: gold.len(),
        total: gold.len(),
        breakdown: classes
            .into_iter()
            .map(|(name, s)| ClassStats { name, ..s })
            .collect(),
    })
}

/// An entity span: `[start, end]` inclusive, plus its type.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub kind: String,
}

fn split_tag(tag: &str) -> (&str, &str) {
    match tag.split_once('-') {
        Some((prefix, kind)) => (prefix, kind),
        None if tag == "O" => ("O", ""),
        None => (tag, ""),
    }
}

fn end_of_chunk(prev_tag: &str, tag: &str, prev_type: &str, kind: &str) -> bool {
    matches!(
        (prev_tag, tag),
        ("E", _) | ("S", _) | ("B", "B") | ("B", "S") | ("B", "O") | ("I", "B") | ("I", "S") | ("I", "O")
    ) || (prev_tag != "O" && prev_tag != "." && prev_type != kind)
}

fn start_of_chunk(prev_tag: &str, tag: &str, prev_type: &str, kind: &str) -> bool {
    matches!(
        (prev_tag, tag),
        (_, "B") | (_, "S") | ("E", "E") | ("E", "I") | ("S", "E") | ("S", "I") | ("O", "E") | ("O", "I")
    ) || (tag != "O" && tag != "." && prev_type != kind)
}

/// Chunks of a tag sequence under conlleval rules. An `I-X` after `O` or
/// after a different type opens a new chunk.
pub fn extract_spans<S: AsRef<str>>(tags: &[S]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, String)> = None;
    let (mut prev_tag, mut prev_type) = ("O", "");
    for (i, tag) in tags.iter().enumerate() {
        let (t, kind) = split_tag(tag.as_ref());
        if end_of_chunk(prev_tag, t, prev_type, kind) {
            if let Some((start, k)) = open.take() {
                spans.push(Span { start, end: i - 1, kind: k });
            }
        }
        if start_of_chunk(prev_tag, t, prev_type, kind) {
            open = Some((i, kind.to_owned()));
        }
        prev_tag = t;
        prev_type = kind;
    }
    if let Some((start, kind)) = open {
        spans.push(Span {
            start,
            end: tags.len() - 1,
            kind,
        });
    }
    spans
}

/// Micro-averaged span precision, recall and F1 over sentences.
pub fn span_f1<S: AsRef<str>>(gold: &[Vec<S>], pred: &[Vec<S>]) -> Result<EvalReport> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch(gold.len(), pred.len()));
    }
    let mut types: BTreeMap<String, ClassStats> = BTreeMap::new();
    let (mut correct, mut n_pred, mut n_gold, mut tokens) = (0, 0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        if g.len() != p.len() {
            return Err(Error::LengthMismatch(g.len(), p.len()));
        }
        tokens += g.len();
        let gs = extract_spans(g);
        let ps = extract_spans(p);
        let gold_set: HashSet<&Span> = gs.iter().collect();
        for s in &ps {
            let e = types.entry(s.kind.clone()).or_default();
            e.predicted += 1;
            if gold_set.contains(s) {
                e.correct += 1;
                correct += 1;
            }
        }
        for s in &gs {
            types.entry(s.kind.clone()).or_default().gold += 1;
        }
        n_pred += ps.len();
        n_gold += gs.len();
    }
    let precision = ratio(correct, n_pred);
    let recall = ratio(correct, n_gold);
    Ok(EvalReport {
        metric: "f1",
        value: f1(precision, recall),
        correct,
        predicted: n_pred,
        gold: n_gold,
        total: tokens,
        breakdown: types
            .into_iter()
            .map(|(name, s)| ClassStats { name, ..s })
            .collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BootstrapResult {
    /// Two-sided p-value.
    pub p_value: f64,
    pub significant: bool,
    /// `metric(A) - metric(B)` on the full test set.
    pub observed_delta: f64,
}

/// Paired bootstrap test of whether systems A and B differ on `metric`.
///
/// Test instances are resampled with replacement `resamples` times. The
/// p-value is twice the fraction of resamples whose metric difference is
/// zero or has the opposite sign of the observed difference, capped at 1.
pub fn paired_bootstrap_test<G, P, F, R>(
    metric: F,
    gold: &[G],
    pred_a: &[P],
    pred_b: &[P],
    resamples: usize,
    p_threshold: f64,
    rng: &mut R,
) -> Result<BootstrapResult>
where
    G: Clone,
    P: Clone,
    F: Fn(&[G], &[P]) -> f64,
    R: Rng + ?Sized,
{
    if gold.len() != pred_a.len() || gold.len() != pred_b.len() {
        return Err(Error::LengthMismatch(gold.len(), pred_a.len().max(pred_b.len())));
    }
    if gold.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let observed = metric(gold, pred_a) - metric(gold, pred_b);
    let n = gold.len();
    let mut g = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut against = 0usize;
    for _ in 0..resamples {
        g.clear();
        a.clear();
        b.clear();
        for _ in 0..n {
            let i = rng.gen_range(0..n);
            g.push(gold[i].clone());
            a.push(pred_a[i].clone());
            b.push(pred_b[i].clone());
        }
        let delta = metric(&g, &a) - metric(&g, &b);
        if delta == 0.0 || observed == 0.0 || delta.signum() != observed.signum() {
            against += 1;
        }
    }
    let p_value = (2.0 * against as f64 / resamples as f64).min(1.0);
    Ok(BootstrapResult {
        p_value,
        significant: p_value < p_threshold,
        observed_delta: observed,
    })
}
