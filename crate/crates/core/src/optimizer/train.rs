use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::RwLock;
use std::thread;
use std::time::Instant;

use log::{info, warn};

use super::store::WeightStore;
use super::{epoch_order, epoch_rng, learning_rate, Hyperparams};
use crate::active_bias::{ConfidenceTracker, SamplingDistribution};
use crate::alphabet::Alphabet;
use crate::error::{Error, Result};
use crate::model::LinearModel;

/// Examples processed between checks of the scaler underflow guard.
const BLOCK: usize = 256;

/// Early stopping patience, in epochs.
const PATIENCE: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    /// Sum of per-example losses seen during the epoch.
    pub loss: f64,
    /// Nonzero weights after the end-of-epoch flush.
    pub nnz: usize,
    pub dev: Option<f64>,
    pub time_ms: u128,
    pub active_bias: bool,
}

impl fmt::Display for EpochReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "epoch={} loss={:.6} nnz={} dev=", self.epoch, self.loss, self.nnz)?;
        match self.dev {
            Some(d) => write!(f, "{d:.6}")?,
            None => write!(f, "NA")?,
        }
        write!(f, " time_ms={}", self.time_ms)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    /// Folded weights after the last epoch.
    pub weights: Vec<f64>,
    pub epochs: Vec<EpochReport>,
    /// Value of the global iteration counter at the end.
    pub iterations: u64,
    pub threads: usize,
}

impl TrainOutput {
    pub fn nonzero_count(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }
}

pub fn train<M: LinearModel>(
    model: &M,
    examples: &[M::Example],
    dev: Option<&[M::Example]>,
    labels: &Alphabet,
    hyper: &Hyperparams,
) -> Result<TrainOutput> {
    train_with(model, examples, dev, labels, hyper, |_| {})
}

/// Trains from zero weights, calling `on_epoch` after every epoch.
pub fn train_with<M: LinearModel>(
    model: &M,
    examples: &[M::Example],
    dev: Option<&[M::Example]>,
    labels: &Alphabet,
    hyper: &Hyperparams,
    mut on_epoch: impl FnMut(&EpochReport),
) -> Result<TrainOutput> {
    hyper.validate()?;
    let n = examples.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let threads = if hyper.threads > n {
        warn!("{} threads requested for {} examples; using {}", hyper.threads, n, n);
        n
    } else {
        hyper.threads
    };

    let mut store = WeightStore::new(
        model.num_weights(),
        hyper.lambda1 / n as f64,
        hyper.lambda2 / n as f64,
    );
    let tracker = ConfidenceTracker::new(n, hyper.history);
    let mut reports: Vec<EpochReport> = Vec::with_capacity(hyper.epochs);
    let mut best_dev = f64::NEG_INFINITY;
    let mut stale = 0;

    for epoch in 0..hyper.epochs {
        let start = Instant::now();
        let active_bias = epoch >= hyper.ab_start_epoch;
        let (order, importance) = if active_bias {
            let dist = SamplingDistribution::from_tracker(&tracker);
            let order = dist.sample(n, &mut epoch_rng(hyper.seed, epoch));
            (order, Some(dist.importance))
        } else {
            (epoch_order(hyper.seed, epoch, n), None)
        };

        let ctx = Worker {
            model,
            examples,
            store: &store,
            tracker: &tracker,
            importance: importance.as_deref(),
            hyper,
            n,
            epoch,
            gate: RwLock::new(()),
            abort: AtomicBool::new(false),
        };
        let results: Vec<Result<f64>> = if threads == 1 {
            vec![ctx.run(&order)]
        } else {
            thread::scope(|scope| {
                let handles: Vec<_> = (0..threads)
                    .map(|t| {
                        let shard = &order[t * n / threads..(t + 1) * n / threads];
                        let ctx = &ctx;
                        scope.spawn(move || ctx.run(shard))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training worker panicked"))
                    .collect()
            })
        };
        let mut loss = 0.0;
        for r in results {
            loss += r?;
        }

        store.epoch_flush();
        let weights = store.to_weights();
        let dev_metric = dev.map(|d| model.dev_metric(&weights, d, labels));
        let report = EpochReport {
            epoch,
            loss,
            nnz: store.nonzero_count(),
            dev: dev_metric,
            time_ms: start.elapsed().as_millis(),
            active_bias,
        };
        info!("{report}");
        on_epoch(&report);
        reports.push(report);

        if let (true, Some(d)) = (hyper.early_stop, dev_metric) {
            if d > best_dev {
                best_dev = d;
                stale = 0;
            } else {
                stale += 1;
                if stale >= PATIENCE {
                    info!("dev {} did not improve for {} epochs; stopping", model.metric_name(), PATIENCE);
                    break;
                }
            }
        }
    }

    Ok(TrainOutput {
        weights: store.to_weights(),
        iterations: store.iterations(),
        epochs: reports,
        threads,
    })
}

struct Worker<'a, M: LinearModel> {
    model: &'a M,
    examples: &'a [M::Example],
    store: &'a WeightStore,
    tracker: &'a ConfidenceTracker,
    importance: Option<&'a [f64]>,
    hyper: &'a Hyperparams,
    n: usize,
    epoch: usize,
    /// Held shared while updating; taken exclusively to fold the scaler.
    gate: RwLock<()>,
    abort: AtomicBool,
}

impl<M: LinearModel> Worker<'_, M> {
    fn run(&self, shard: &[usize]) -> Result<f64> {
        let mut active = Vec::new();
        let mut grad = Vec::new();
        let mut loss = 0.0;
        for block in shard.chunks(BLOCK) {
            {
                let _shared = self.gate.read().unwrap_or_else(|e| e.into_inner());
                for &j in block {
                    if self.abort.load(Ordering::Relaxed) {
                        return Ok(loss);
                    }
                    let example = &self.examples[j];
                    let k = self.store.next_iteration();
                    let mut alpha = learning_rate(k, self.n, self.hyper.epochs, self.hyper.alpha0);
                    if let Some(v) = self.importance {
                        alpha *= v[j];
                    }

                    self.model.active_indices(example, &mut active);
                    self.store.catch_up(&active);
                    let result = self
                        .model
                        .loss_and_gradient(&self.store.view(), example, &mut grad);
                    if !result.loss.is_finite() {
                        self.abort.store(true, Ordering::Relaxed);
                        return Err(Error::Diverged {
                            epoch: self.epoch,
                            example: j,
                        });
                    }
                    self.tracker.record(j, result.gold_prob)?;
                    self.store.update_weights(alpha, &grad);
                    loss += result.loss;
                }
            }
            if self.store.needs_fold() {
                let _exclusive = self.gate.write().unwrap_or_else(|e| e.into_inner());
                if self.store.needs_fold() {
                    self.store.fold();
                }
            }
        }
        Ok(loss)
    }
}

/// Dev metric per candidate learning rate.
#[derive(Clone, Debug, PartialEq)]
pub struct GridResult {
    pub best_alpha0: f64,
    /// `(alpha0, dev metric)` in candidate order; diverged runs score -inf.
    pub table: Vec<(f64, f64)>,
}

/// Picks the best-scoring candidate. NaN scores count as -inf; ties go to
/// the smaller `alpha0`.
pub fn select_alpha0(table: &[(f64, f64)]) -> Option<f64> {
    let score = |m: f64| if m.is_nan() { f64::NEG_INFINITY } else { m };
    table
        .iter()
        .copied()
        .reduce(|best, cand| {
            let (b, c) = (score(best.1), score(cand.1));
            if c > b || (c == b && cand.0 < best.0) {
                cand
            } else {
                best
            }
        })
        .map(|(alpha0, _)| alpha0)
}

/// Trains once per candidate `alpha0` with otherwise identical settings and
/// keeps the one with the best dev metric.
pub fn grid_search_alpha0<M: LinearModel>(
    model: &M,
    examples: &[M::Example],
    dev: &[M::Example],
    labels: &Alphabet,
    hyper: &Hyperparams,
    candidates: &[f64],
) -> Result<GridResult> {
    if candidates.is_empty() {
        return Err(Error::InvalidHyperparams("no alpha0 candidates".into()));
    }
    let mut table = Vec::with_capacity(candidates.len());
    for &alpha0 in candidates {
        let h = Hyperparams {
            alpha0,
            ..hyper.clone()
        };
        let metric = match train(model, examples, None, labels, &h) {
            Ok(out) => {
                let m = model.dev_metric(&out.weights, dev, labels);
                if out.weights.iter().all(|w| w.is_finite()) {
                    m
                } else {
                    f64::NEG_INFINITY
                }
            }
            Err(Error::Diverged { .. }) => f64::NEG_INFINITY,
            Err(e) => return Err(e),
        };
        info!("alpha0={alpha0} dev={metric}");
        table.push((alpha0, metric));
    }
    Ok(GridResult {
        best_alpha0: select_alpha0(&table).expect("non-empty table"),
        table,
    })
}
