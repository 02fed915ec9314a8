//! Seeded synthetic datasets for benchmarks and tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::alphabet::Alphabet;
use crate::dataset::{ClassifiedExample, SequenceExample};
use crate::sparse::SparseVector;

/// Shape of a synthetic classification problem.
///
/// The first `informative` features are split round-robin among the
/// classes; the remaining features are noise. Each example draws
/// `active` features: with probability `signal` from its own class's
/// informative pool, otherwise uniformly from all features.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationSpec {
    pub examples: usize,
    pub features: usize,
    pub classes: usize,
    pub informative: usize,
    pub active: usize,
    pub signal: f64,
    pub seed: u64,
}

impl ClassificationSpec {
    pub fn new(examples: usize, features: usize, classes: usize, seed: u64) -> Self {
        ClassificationSpec {
            examples,
            features,
            classes,
            informative: (features / 3).max(classes),
            active: 10.min(features),
            signal: 0.5,
            seed,
        }
    }

    pub fn generate(&self) -> Vec<ClassifiedExample> {
        assert!(self.informative >= self.classes && self.informative <= self.features);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let per_class = self.informative / self.classes;
        (0..self.examples)
            .map(|_| {
                let label = rng.gen_range(0..self.classes);
                let ids: Vec<u32> = (0..self.active)
                    .map(|_| {
                        if rng.gen_bool(self.signal) {
                            (rng.gen_range(0..per_class) * self.classes + label) as u32
                        } else {
                            rng.gen_range(0..self.features) as u32
                        }
                    })
                    .collect();
                ClassifiedExample {
                    features: SparseVector::from_indicators(ids),
                    label,
                }
            })
            .collect()
    }
}

/// Label alphabet `c0, c1, ...`.
pub fn label_alphabet(n: usize) -> Alphabet {
    let mut a: Alphabet = (0..n).map(|i| format!("c{i}")).collect();
    a.freeze();
    a
}

/// BIO alphabet `O, B-T0, I-T0, B-T1, I-T1, ...` for `types` entity types.
pub fn bio_alphabet(types: usize) -> Alphabet {
    let mut names = vec!["O".to_string()];
    for t in 0..types {
        names.push(format!("B-T{t}"));
        names.push(format!("I-T{t}"));
    }
    let mut a: Alphabet = names.into_iter().collect();
    a.freeze();
    a
}

/// Random BIO-tagged sequences. Each token fires a word feature that is
/// indicative of its tag with probability `signal`, plus the previous
/// token's word feature.
pub fn sequences(
    count: usize,
    max_len: usize,
    types: usize,
    vocab: usize,
    signal: f64,
    seed: u64,
) -> Vec<SequenceExample> {
    let labels = 1 + 2 * types;
    assert!(vocab >= labels);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let len = rng.gen_range(1..=max_len);
            let mut tags = Vec::with_capacity(len);
            for t in 0..len {
                let prev = if t == 0 { 0 } else { tags[t - 1] };
                let tag = if prev != 0 && prev % 2 == 1 && rng.gen_bool(0.6) {
                    prev + 1
                } else if prev != 0 && prev % 2 == 0 && rng.gen_bool(0.3) {
                    prev
                } else if rng.gen_bool(0.3) {
                    1 + 2 * rng.gen_range(0..types)
                } else {
                    0
                };
                tags.push(tag);
            }
            let words: Vec<usize> = tags
                .iter()
                .map(|&tag| {
                    if rng.gen_bool(signal) {
                        tag + labels * rng.gen_range(0..vocab / labels)
                    } else {
                        rng.gen_range(0..vocab)
                    }
                })
                .collect();
            let token_features = (0..len)
                .map(|t| {
                    let mut ids = vec![words[t] as u32];
                    if t > 0 {
                        ids.push((vocab + words[t - 1]) as u32);
                    }
                    SparseVector::from_indicators(ids)
                })
                .collect();
            SequenceExample {
                token_features,
                labels: tags,
            }
        })
        .collect()
}

/// Feature count used by [`sequences`] for a vocabulary size.
pub fn sequence_feature_count(vocab: usize) -> usize {
    2 * vocab
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let spec = ClassificationSpec::new(200, 50, 3, 7);
        let a = spec.generate();
        assert_eq!(a, spec.generate());
        assert!(a.iter().all(|e| e.label < 3 && e.features.max_id().unwrap() < 50));

        let s = sequences(20, 6, 2, 30, 0.8, 1);
        assert!(s.iter().all(|e| !e.is_empty() && e.labels.iter().all(|&y| y < 5)));
        assert!(s
            .iter()
            .all(|e| e.token_features.iter().all(|f| f.max_id().unwrap() < sequence_feature_count(30))));
    }
}
