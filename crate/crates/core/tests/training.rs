use f10sgd::active_bias::SamplingDistribution;
use f10sgd::optimizer::{epoch_order, grid_search_alpha0, learning_rate, select_alpha0, train_with};
use f10sgd::reference::dense_train;
use f10sgd::synthetic::{bio_alphabet, label_alphabet, sequence_feature_count, sequences, ClassificationSpec};
use f10sgd::{train, ClassifiedExample, CrfModel, Error, Hyperparams, LinearModel, MaxEntModel, SparseVector};

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn plain(alpha0: f64, lambda1: f64, lambda2: f64, epochs: usize) -> Hyperparams {
    Hyperparams {
        alpha0,
        lambda1,
        lambda2,
        epochs,
        ..Default::default()
    }
    .without_active_bias()
}

#[test]
fn lazy_maxent_matches_dense_oracle() {
    let data = ClassificationSpec::new(300, 40, 3, 11).generate();
    let model = MaxEntModel::new(40, 3);
    for (l1, l2) in [(0.0, 0.0), (0.0, 2.0), (1.0, 0.0), (1.0, 1.0), (5.0, 3.0)] {
        let hyper = plain(0.2, l1, l2, 3);
        let lazy = train(&model, &data, None, &label_alphabet(3), &hyper).unwrap();
        let (dense, clipped) = dense_train(&model, &data, &hyper);
        let diff = max_abs_diff(&lazy.weights, &dense);
        assert!(diff < 1e-8, "l1={l1} l2={l2}: max diff {diff} ({} clips)", clipped.clipped);
    }
}

#[test]
fn lazy_crf_matches_dense_oracle() {
    let vocab = 20;
    let data = sequences(120, 6, 2, vocab, 0.7, 3);
    let model = CrfModel::new(sequence_feature_count(vocab), 5);
    for (l1, l2) in [(0.0, 1.0), (1.0, 1.0), (4.0, 0.5)] {
        let hyper = plain(0.1, l1, l2, 2);
        let lazy = train(&model, &data, None, &bio_alphabet(2), &hyper).unwrap();
        let (dense, _) = dense_train(&model, &data, &hyper);
        let diff = max_abs_diff(&lazy.weights, &dense);
        assert!(diff < 1e-8, "l1={l1} l2={l2}: max diff {diff}");
    }
}

#[test]
fn separable_toy_reaches_full_accuracy() {
    // two classes with disjoint feature sets
    let data: Vec<ClassifiedExample> = (0..200)
        .map(|i| {
            let label = i % 2;
            let base = (label * 10) as u32;
            ClassifiedExample {
                features: SparseVector::from_indicators([base + (i as u32 % 10), base + ((i as u32 / 2) % 10)]),
                label,
            }
        })
        .collect();
    let model = MaxEntModel::new(20, 2);
    let out = train(&model, &data, Some(&data), &label_alphabet(2), &plain(0.5, 0.0, 0.0, 10)).unwrap();
    assert_eq!(out.epochs.last().unwrap().dev, Some(1.0));
}

#[test]
fn huge_l1_zeroes_everything() {
    let data = ClassificationSpec::new(200, 30, 3, 5).generate();
    let model = MaxEntModel::new(30, 3);
    let out = train(&model, &data, None, &label_alphabet(3), &plain(0.1, 1e6 * 200.0, 0.0, 3)).unwrap();
    assert_eq!(out.nonzero_count(), 0);
}

#[test]
fn single_thread_runs_are_bit_identical() {
    let data = ClassificationSpec::new(500, 60, 4, 8).generate();
    let model = MaxEntModel::new(60, 4);
    let hyper = Hyperparams {
        alpha0: 0.3,
        lambda1: 0.5,
        lambda2: 0.5,
        epochs: 5,
        ab_start_epoch: 3,
        ..Default::default()
    };
    let a = train(&model, &data, None, &label_alphabet(4), &hyper).unwrap();
    let b = train(&model, &data, None, &label_alphabet(4), &hyper).unwrap();
    let bits = |w: &[f64]| w.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.weights), bits(&b.weights));
}

#[test]
fn sparsity_is_monotone_in_l1() {
    let data = ClassificationSpec::new(1000, 200, 3, 21).generate();
    let model = MaxEntModel::new(200, 3);
    let counts: Vec<usize> = [0.0, 0.5, 2.0, 8.0, 32.0]
        .iter()
        .map(|&l1| {
            train(&model, &data, None, &label_alphabet(3), &plain(0.2, l1, 0.0, 4))
                .unwrap()
                .nonzero_count()
        })
        .collect();
    assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
    assert!(counts.last() < counts.first());
}

#[test]
fn iteration_counter_covers_every_example() {
    let data = ClassificationSpec::new(400, 50, 3, 2).generate();
    let model = MaxEntModel::new(50, 3);
    for threads in [1, 3, 4] {
        let hyper = Hyperparams {
            threads,
            ..plain(0.1, 0.1, 0.1, 3)
        };
        let out = train(&model, &data, None, &label_alphabet(3), &hyper).unwrap();
        assert_eq!(out.iterations, 3 * 400);
        // the schedule ends exactly at zero
        assert_eq!(learning_rate(out.iterations, 400, 3, 0.1), 0.0);
    }
}

#[test]
fn multithreaded_training_learns() {
    let data = ClassificationSpec::new(4000, 300, 4, 9).generate();
    let model = MaxEntModel::new(300, 4);
    let labels = label_alphabet(4);
    let single = train(&model, &data, Some(&data), &labels, &plain(0.2, 0.1, 0.1, 3)).unwrap();
    let hyper = Hyperparams {
        threads: 4,
        ..plain(0.2, 0.1, 0.1, 3)
    };
    let multi = train(&model, &data, Some(&data), &labels, &hyper).unwrap();
    assert_eq!(multi.threads, 4);
    let acc = |o: &f10sgd::TrainOutput| o.epochs.last().unwrap().dev.unwrap();
    assert!((acc(&single) - acc(&multi)).abs() < 0.02, "{} vs {}", acc(&single), acc(&multi));
}

#[test]
fn threads_capped_at_example_count() {
    let data = ClassificationSpec::new(3, 10, 2, 1).generate();
    let model = MaxEntModel::new(10, 2);
    let hyper = Hyperparams {
        threads: 8,
        ..plain(0.1, 0.0, 0.0, 2)
    };
    let out = train(&model, &data, None, &label_alphabet(2), &hyper).unwrap();
    assert_eq!(out.threads, 3);
}

#[test]
fn divergence_is_reported() {
    let data = ClassificationSpec::new(200, 20, 3, 4).generate();
    let model = MaxEntModel::new(20, 3);
    let err = train(&model, &data, None, &label_alphabet(3), &plain(1e308, 0.0, 0.0, 3)).unwrap_err();
    assert!(matches!(err, Error::Diverged { .. }), "{err}");
}

#[test]
fn extreme_l2_triggers_scaler_fold() {
    // alpha0 * lambda2 is large enough that s would underflow 1e-9 within
    // one epoch without folding
    let data = ClassificationSpec::new(2000, 30, 2, 6).generate();
    let model = MaxEntModel::new(30, 2);
    let hyper = plain(0.5, 0.0, 120.0, 1);
    let out = train(&model, &data, None, &label_alphabet(2), &hyper).unwrap();
    assert!(out.weights.iter().all(|w| w.is_finite()));
    let (dense, _) = dense_train(&model, &data, &hyper);
    assert!(max_abs_diff(&out.weights, &dense) < 1e-8);
}

#[test]
fn per_epoch_reports_and_early_stop() {
    let data = ClassificationSpec::new(300, 40, 3, 12).generate();
    let model = MaxEntModel::new(40, 3);
    let mut lines = Vec::new();
    let out = train_with(
        &model,
        &data,
        Some(&data[..50]),
        &label_alphabet(3),
        &plain(0.2, 0.0, 0.0, 4),
        |r| lines.push(r.to_string()),
    )
    .unwrap();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("epoch=0 loss="));
    assert!(lines[0].contains(" nnz=") && lines[0].contains(" dev=") && lines[0].contains(" time_ms="));
    assert!(out.epochs.iter().all(|e| !e.active_bias));

    // a dev set the model cannot improve on stops after the patience window
    let hyper = Hyperparams {
        early_stop: true,
        ..plain(1e-9, 0.0, 0.0, 10)
    };
    let flat = train(&model, &data, Some(&data[..50]), &label_alphabet(3), &hyper).unwrap();
    assert!(flat.epochs.len() < 10);
}

#[test]
fn active_bias_epochs_are_flagged() {
    let data = ClassificationSpec::new(300, 40, 3, 13).generate();
    let model = MaxEntModel::new(40, 3);
    let hyper = Hyperparams {
        epochs: 5,
        ab_start_epoch: 3,
        ..Default::default()
    };
    let out = train(&model, &data, Some(&data), &label_alphabet(3), &hyper).unwrap();
    let flags: Vec<bool> = out.epochs.iter().map(|e| e.active_bias).collect();
    assert_eq!(flags, vec![false, false, false, true, true]);
    assert!(out.epochs.last().unwrap().dev.unwrap() > 0.6);
}

#[test]
fn unit_importance_is_plain_sgd_over_a_resample() {
    // with every v_j = 1 an active-bias epoch is an ordinary SGD pass over
    // the sampled indices
    let data = ClassificationSpec::new(100, 20, 2, 14).generate();
    let dist = SamplingDistribution::uniform(data.len());
    let order = dist.sample(data.len(), &mut f10sgd::optimizer::epoch_rng(3, 0));
    assert_eq!(order.len(), data.len());
    assert!(dist.importance.iter().all(|&v| v == 1.0));
    let perm = epoch_order(3, 0, data.len());
    assert_eq!(perm.len(), data.len());
}

#[test]
fn grid_search_picks_best_and_breaks_ties_low() {
    let data = ClassificationSpec::new(400, 40, 3, 15).generate();
    let model = MaxEntModel::new(40, 3);
    let labels = label_alphabet(3);
    let hyper = plain(0.1, 0.0, 0.0, 3);
    let single = grid_search_alpha0(&model, &data, &data, &labels, &hyper, &[0.3]).unwrap();
    assert_eq!(single.best_alpha0, 0.3);

    let grid = grid_search_alpha0(&model, &data, &data, &labels, &hyper, &[1e308, 0.01, 0.5]).unwrap();
    assert_eq!(grid.table[0].1, f64::NEG_INFINITY);
    assert_ne!(grid.best_alpha0, 1e308);

    assert_eq!(select_alpha0(&[(0.5, 0.9), (0.1, 0.9), (1.0, 0.8)]), Some(0.1));
    assert_eq!(select_alpha0(&[(0.1, f64::NAN), (0.2, 0.1)]), Some(0.2));
    assert!(grid_search_alpha0(&model, &data, &data, &labels, &hyper, &[]).is_err());
}

#[test]
fn crf_training_learns_synthetic_tags() {
    let vocab = 60;
    let data = sequences(400, 8, 2, vocab, 0.8, 17);
    let model = CrfModel::new(sequence_feature_count(vocab), 5);
    let out = train(&model, &data, Some(&data), &bio_alphabet(2), &plain(0.1, 0.1, 0.1, 5)).unwrap();
    let f1 = out.epochs.last().unwrap().dev.unwrap();
    assert!(f1 > 0.6, "train F1 {f1}");
    assert_eq!(out.weights.len(), model.num_weights());
}
