//! Sparse feature vectors and read access to weight vectors.

use crate::error::{Error, Result};

/// Feature activations of one input, stored as `(feature id, value)` pairs
/// with strictly increasing ids.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vector from pairs in any order. Repeated ids are merged by
    /// summing their values.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, f64)>,
    {
        let mut entries: Vec<(u32, f64)> = pairs.into_iter().collect();
        if let Some(&(id, value)) = entries.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                id: id as usize,
                value,
            });
        }
        entries.sort_by_key(|&(id, _)| id);
        entries.dedup_by(|next, kept| {
            if next.0 == kept.0 {
                kept.1 += next.1;
                true
            } else {
                false
            }
        });
        Ok(SparseVector { entries })
    }

    /// Indicator features with value 1.0 each.
    pub fn from_indicators<I>(ids: I) -> Self
    where
        I: IntoIterator<Item = u32>,
    {
        Self::from_pairs(ids.into_iter().map(|id| (id, 1.0))).expect("indicator values are finite")
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|&(id, v)| (id as usize, v))
    }

    /// Largest feature id, if any.
    pub fn max_id(&self) -> Option<usize> {
        self.entries.last().map(|&(id, _)| id as usize)
    }

    pub fn scaled(&self, factor: f64) -> SparseVector {
        SparseVector {
            entries: self.entries.iter().map(|&(id, v)| (id, v * factor)).collect(),
        }
    }
}

/// Read access to a weight vector. Implemented for plain slices and for the
/// scaled view the trainer hands to the models while weights are being
/// updated concurrently.
pub trait WeightView {
    fn len(&self) -> usize;

    fn weight(&self, index: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl WeightView for [f64] {
    #[inline]
    fn len(&self) -> usize {
        <[f64]>::len(self)
    }

    #[inline]
    fn weight(&self, index: usize) -> f64 {
        self[index]
    }
}

impl WeightView for Vec<f64> {
    #[inline]
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    #[inline]
    fn weight(&self, index: usize) -> f64 {
        self[index]
    }
}

/// Checked dot product of `weights` with `sv`.
pub fn dot(weights: &[f64], sv: &SparseVector) -> Result<f64> {
    if let Some(id) = sv.max_id() {
        if id >= weights.len() {
            return Err(Error::OutOfBounds {
                id,
                len: weights.len(),
            });
        }
    }
    Ok(sv.iter().map(|(id, v)| weights[id] * v).sum())
}

/// Dot product of the block of weights starting at `offset` with stride
/// `stride`: `sum_f w[offset + f * stride] * x_f`. This is the per-class
/// score of a feature-major weight layout.
#[inline]
pub(crate) fn strided_dot<W: WeightView + ?Sized>(
    weights: &W,
    sv: &SparseVector,
    stride: usize,
    offset: usize,
) -> f64 {
    sv.iter()
        .map(|(id, v)| weights.weight(id * stride + offset) * v)
        .sum()
}
