//! Shared weight state with lazy L2 (global scaler) and lazy L1
//! (cumulative penalty) bookkeeping.
//!
//! The effective weight is `w_hat[i] * s`. L2 decay only touches `s`.
//! L1 accumulates a global budget `u` in unscaled units; `q[i]` is the
//! budget level weight `i` was last settled against, so `u - q[i]` is what
//! the weight still owes.
//!
//! Per-weight slots are read and written with relaxed atomic loads and
//! stores and no read-modify-write: concurrent updates to the same weight
//! may be lost, which is the Hogwild contract. `s`, `u` and the iteration
//! counter use atomic read-modify-write.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::sparse::WeightView;

/// Scaler value below which the trainer folds `s` into the weights.
pub const MIN_SCALE: f64 = 1e-9;

#[derive(Debug, Default)]
pub(crate) struct AtomicF64(AtomicU64);

impl AtomicF64 {
    pub(crate) fn new(v: f64) -> Self {
        AtomicF64(AtomicU64::new(v.to_bits()))
    }

    #[inline]
    pub(crate) fn load(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    #[inline]
    pub(crate) fn store(&self, v: f64) {
        self.0.store(v.to_bits(), Ordering::Relaxed)
    }

    /// Atomically replaces the value with `f(old)` and returns the new value.
    #[inline]
    pub(crate) fn update(&self, f: impl Fn(f64) -> f64) -> f64 {
        let old = self
            .0
            .fetch_update(Ordering::AcqRel, Ordering::Acquire, |bits| {
                Some(f(f64::from_bits(bits)).to_bits())
            })
            .expect("closure always returns Some");
        f(f64::from_bits(old))
    }
}

// keeps the contended globals on separate cache lines
#[repr(align(64))]
#[derive(Debug, Default)]
struct Padded<T>(T);

#[derive(Debug)]
pub struct WeightStore {
    w_hat: Vec<AtomicF64>,
    q: Vec<AtomicF64>,
    s: Padded<AtomicF64>,
    u: Padded<AtomicF64>,
    k: Padded<AtomicU64>,
    /// Per-example L1 strength, lambda1 / N.
    l1: f64,
    /// Per-example L2 strength, lambda2 / N.
    l2: f64,
}

impl WeightStore {
    /// Zero-initialized store. `l1` and `l2` are the per-example strengths.
    pub fn new(len: usize, l1: f64, l2: f64) -> Self {
        WeightStore {
            w_hat: (0..len).map(|_| AtomicF64::new(0.0)).collect(),
            q: (0..len).map(|_| AtomicF64::new(0.0)).collect(),
            s: Padded(AtomicF64::new(1.0)),
            u: Padded(AtomicF64::new(0.0)),
            k: Padded(AtomicU64::new(0)),
            l1,
            l2,
        }
    }

    /// Store with explicit state, for tests and diagnostics.
    pub fn with_state(w_hat: &[f64], q: &[f64], s: f64, u: f64, l1: f64, l2: f64) -> Self {
        assert_eq!(w_hat.len(), q.len());
        assert!(s > 0.0 && s <= 1.0);
        let store = WeightStore::new(w_hat.len(), l1, l2);
        for (i, (&w, &qi)) in w_hat.iter().zip(q).enumerate() {
            store.w_hat[i].store(w);
            store.q[i].store(qi);
        }
        store.s.0.store(s);
        store.u.0.store(u);
        store
    }

    pub fn len(&self) -> usize {
        self.w_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w_hat.is_empty()
    }

    pub fn scale(&self) -> f64 {
        self.s.0.load()
    }

    pub fn l1_budget(&self) -> f64 {
        self.u.0.load()
    }

    pub fn unscaled(&self, i: usize) -> f64 {
        self.w_hat[i].load()
    }

    pub fn applied_l1(&self, i: usize) -> f64 {
        self.q[i].load()
    }

    pub fn effective(&self, i: usize) -> f64 {
        self.w_hat[i].load() * self.scale()
    }

    pub fn iterations(&self) -> u64 {
        self.k.0.load(Ordering::Acquire)
    }

    /// Claims the next global iteration number.
    #[inline]
    pub fn next_iteration(&self) -> u64 {
        self.k.0.fetch_add(1, Ordering::AcqRel)
    }

    /// Read view with the scaler captured once.
    pub fn view(&self) -> ScaledView<'_> {
        ScaledView {
            w_hat: &self.w_hat,
            s: self.scale(),
        }
    }

    /// Applies the outstanding L1 penalty `u - q[i]` to each listed weight
    /// without advancing `u`. A weight sitting at zero owes nothing: its
    /// `q[i]` is reset to `u` so it is only charged for steps after it
    /// becomes nonzero again.
    #[inline]
    pub fn catch_up(&self, ids: &[usize]) {
        if self.l1 == 0.0 {
            return;
        }
        let u = self.u.0.load();
        for &i in ids {
            if self.w_hat[i].load() == 0.0 {
                self.q[i].store(u);
            } else {
                self.settle(i, u);
            }
        }
    }

    /// One lazy elastic-net step on the weights in `grad`: decays `s` by
    /// `1 - alpha l2`, takes the gradient step in unscaled space and then
    /// applies L1 to the same weights.
    #[inline]
    pub fn update_weights(&self, alpha: f64, grad: &[(usize, f64)]) {
        let s = if self.l2 == 0.0 {
            self.scale()
        } else {
            let decay = 1.0 - alpha * self.l2;
            self.s.0.update(|s| s * decay)
        };
        let step = alpha / s;
        for &(i, g) in grad {
            let slot = &self.w_hat[i];
            slot.store(slot.load() - step * g);
        }
        self.apply_l1(alpha, s, grad.iter().map(|&(i, _)| i));
    }

    /// Adds `alpha l1 / s` to the budget and settles the listed weights
    /// against it. `s` is the scaler after this step's decay.
    #[inline]
    pub fn apply_l1(&self, alpha: f64, s: f64, ids: impl Iterator<Item = usize>) {
        if self.l1 == 0.0 {
            return;
        }
        let increment = alpha * self.l1 / s;
        let u = self.u.0.update(|u| u + increment);
        for i in ids {
            self.settle(i, u);
        }
    }

    /// Moves weight `i` towards zero by its outstanding penalty, clipping at
    /// zero. Zero weights are left alone.
    ///
    /// Afterwards `q[i] = u` even when the weight was clipped: a weight at
    /// zero carries no leftover penalty into its next nonzero stretch.
    #[inline]
    fn settle(&self, i: usize, u: f64) {
        let w = self.w_hat[i].load();
        let owed = u - self.q[i].load();
        let new = if w > 0.0 {
            (w - owed).max(0.0)
        } else if w < 0.0 {
            (w + owed).min(0.0)
        } else {
            return;
        };
        self.w_hat[i].store(new);
        self.q[i].store(u);
    }

    pub fn needs_fold(&self) -> bool {
        self.scale() < MIN_SCALE
    }

    /// Settles every weight against the current budget, multiplies the
    /// scaler into the weights and resets `s = 1`, `u = 0`, `q = 0`.
    ///
    /// Callers must ensure no other thread updates the store meanwhile.
    pub fn fold(&self) {
        let u = self.u.0.load();
        if self.l1 != 0.0 {
            for i in 0..self.w_hat.len() {
                self.settle(i, u);
            }
        }
        let s = self.scale();
        for w in &self.w_hat {
            w.store(w.load() * s);
        }
        for q in &self.q {
            q.store(0.0);
        }
        self.s.0.store(1.0);
        self.u.0.store(0.0);
    }

    /// End-of-epoch flush; same as [`fold`](Self::fold) but takes the store
    /// exclusively.
    pub fn epoch_flush(&mut self) {
        self.fold();
    }

    /// Effective weights `w_hat * s`.
    pub fn to_weights(&self) -> Vec<f64> {
        let s = self.scale();
        self.w_hat.iter().map(|w| w.load() * s).collect()
    }

    pub fn nonzero_count(&self) -> usize {
        self.w_hat.iter().filter(|w| w.load() != 0.0).count()
    }
}

/// Effective-weight view over a store, with `s` captured at creation.
pub struct ScaledView<'a> {
    w_hat: &'a [AtomicF64],
    s: f64,
}

impl WeightView for ScaledView<'_> {
    #[inline]
    fn len(&self) -> usize {
        self.w_hat.len()
    }

    #[inline]
    fn weight(&self, index: usize) -> f64 {
        self.w_hat[index].load() * self.s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::dense_sgd_step;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn l2_step_example() {
        let store = WeightStore::with_state(&[1.0], &[0.0], 1.0, 0.0, 0.0, 0.5);
        store.update_weights(0.1, &[(0, 0.2)]);
        assert_relative_eq!(store.scale(), 0.95, epsilon = 1e-15);
        assert_relative_eq!(store.unscaled(0), 1.0 - 0.02 / 0.95, epsilon = 1e-15);
        assert_relative_eq!(store.unscaled(0), 0.978_947_368_421_052_6, epsilon = 1e-12);
        assert_relative_eq!(store.effective(0), 0.93, epsilon = 1e-15);
    }

    #[test]
    fn no_l2_is_plain_sgd() {
        let store = WeightStore::with_state(&[1.0], &[0.0], 1.0, 0.0, 0.0, 0.0);
        store.update_weights(0.1, &[(0, 0.2)]);
        assert_eq!(store.scale(), 1.0);
        assert_relative_eq!(store.effective(0), 0.98, epsilon = 1e-15);
    }

    #[test]
    fn zero_gradient_pure_decay() {
        let store = WeightStore::with_state(&[2.0], &[0.0], 1.0, 0.0, 0.0, 0.5);
        store.update_weights(0.1, &[(0, 0.0)]);
        assert_eq!(store.unscaled(0), 2.0);
        assert_relative_eq!(store.effective(0), 2.0 * 0.95, epsilon = 1e-15);
    }

    #[test]
    fn l1_clips_at_zero() {
        // pending penalty u - q = 0.05
        let store = WeightStore::with_state(&[0.01], &[0.0], 1.0, 0.05, 1.0, 0.0);
        store.apply_l1(0.0, 1.0, [0].into_iter());
        assert_eq!(store.unscaled(0), 0.0);
        // the unpaid 0.04 is forgiven, matching clipped dense SGD
        assert_relative_eq!(store.applied_l1(0), 0.05, epsilon = 1e-15);
    }

    #[test]
    fn l1_signed_shrink() {
        let store = WeightStore::with_state(&[-0.2], &[0.0], 1.0, 0.05, 1.0, 0.0);
        store.apply_l1(0.0, 1.0, [0].into_iter());
        assert_relative_eq!(store.unscaled(0), -0.15, epsilon = 1e-15);
        assert_relative_eq!(store.applied_l1(0), 0.05, epsilon = 1e-15);
    }

    #[test]
    fn zero_l1_is_noop() {
        let store = WeightStore::with_state(&[0.3], &[0.0], 1.0, 0.0, 0.0, 0.0);
        store.apply_l1(0.5, 1.0, [0].into_iter());
        assert_eq!(store.l1_budget(), 0.0);
        assert_eq!(store.unscaled(0), 0.3);
    }

    #[test]
    fn zero_weights_untouched_by_apply() {
        let store = WeightStore::with_state(&[0.0], &[0.0], 1.0, 0.0, 1.0, 0.0);
        store.apply_l1(0.1, 1.0, [0].into_iter());
        assert_eq!(store.unscaled(0), 0.0);
        assert_eq!(store.applied_l1(0), 0.0);
    }

    #[test]
    fn flush_folds_scaler() {
        let mut store = WeightStore::with_state(&[2.0], &[0.0], 0.9, 0.0, 0.0, 0.1);
        store.epoch_flush();
        assert_relative_eq!(store.unscaled(0), 1.8, epsilon = 1e-15);
        assert_eq!(store.scale(), 1.0);
    }

    #[test]
    fn flush_catches_up_untouched_weights() {
        let mut store = WeightStore::with_state(&[0.03, -0.5], &[0.0, 0.0], 1.0, 0.1, 1.0, 0.0);
        store.epoch_flush();
        assert_eq!(store.unscaled(0), 0.0);
        assert_relative_eq!(store.unscaled(1), -0.4, epsilon = 1e-15);
        assert_eq!((store.l1_budget(), store.applied_l1(0), store.applied_l1(1)), (0.0, 0.0, 0.0));
    }

    #[test]
    fn flush_of_fresh_state_is_identity() {
        let mut store = WeightStore::with_state(&[0.25, -1.5, 0.0], &[0.0; 3], 1.0, 0.0, 1.0, 1.0);
        store.epoch_flush();
        assert_eq!(store.to_weights(), vec![0.25, -1.5, 0.0]);
    }

    fn state() -> impl Strategy<Value = (Vec<f64>, f64, Vec<(usize, f64)>, f64, f64, f64)> {
        (1usize..12).prop_flat_map(|n| {
            (
                prop::collection::vec(prop_oneof![Just(0.0), -2.0f64..2.0], n),
                0.05f64..=1.0,
                prop::collection::btree_map(0..n, -3.0f64..3.0, 0..n)
                    .prop_map(|m| m.into_iter().collect::<Vec<_>>()),
                0.0f64..0.5,
                0.0f64..0.2,
                0.0f64..0.8,
            )
        })
    }

    proptest! {
        // lazy step + flush == one dense step, from an arbitrary effective state
        #[test]
        fn single_step_matches_dense((w, s, grad, alpha, l1, l2) in state()) {
            let w_hat: Vec<f64> = w.iter().map(|x| x / s).collect();
            let mut store = WeightStore::with_state(&w_hat, &vec![0.0; w.len()], s, 0.0, l1, l2);
            let ids: Vec<usize> = grad.iter().map(|g| g.0).collect();
            store.catch_up(&ids);
            store.update_weights(alpha, &grad);
            store.epoch_flush();

            let mut dense = w.clone();
            let mut g = vec![0.0; w.len()];
            for &(i, v) in &grad { g[i] = v; }
            dense_sgd_step(&mut dense, &g, alpha, l1, l2);
            for (a, b) in store.to_weights().iter().zip(&dense) {
                prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
            }
        }

        #[test]
        fn l1_never_flips_sign(w in -2.0f64..2.0, q in 0.0f64..0.5, u in 0.0f64..1.0) {
            let u = u.max(q);
            let store = WeightStore::with_state(&[w], &[q], 1.0, u, 1.0, 0.0);
            store.apply_l1(0.1, 1.0, [0].into_iter());
            let after = store.unscaled(0);
            prop_assert!(after == 0.0 || after.signum() == w.signum());
            prop_assert!(after.abs() <= w.abs());
        }
    }
}
