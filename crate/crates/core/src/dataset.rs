//! Raw (string) and encoded (id) training examples.

use crate::alphabet::Alphabet;
use crate::error::{Error, Result};
use crate::sparse::SparseVector;

/// A classification input before feature/label strings are mapped to ids.
#[derive(Clone, Debug, PartialEq)]
pub struct RawClassified {
    pub label: String,
    pub features: Vec<String>,
}

/// A token sequence before feature/label strings are mapped to ids.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSequence {
    pub token_features: Vec<Vec<String>>,
    pub labels: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifiedExample {
    pub features: SparseVector,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceExample {
    pub token_features: Vec<SparseVector>,
    pub labels: Vec<usize>,
}

impl SequenceExample {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Common access to the strings of a raw example.
pub trait RawExample {
    type Encoded;

    fn feature_strings(&self) -> Box<dyn Iterator<Item = &str> + '_>;

    fn label_strings(&self) -> Box<dyn Iterator<Item = &str> + '_>;

    /// Maps strings to ids. Unknown features are dropped; unknown labels are
    /// an error.
    fn encode(&self, features: &Alphabet, labels: &Alphabet) -> Result<Self::Encoded>;
}

fn encode_features(features: &Alphabet, strings: &[String]) -> SparseVector {
    SparseVector::from_indicators(strings.iter().filter_map(|s| features.id_of(s)))
}

fn encode_label(labels: &Alphabet, label: &str) -> Result<usize> {
    labels
        .id_of(label)
        .map(|id| id as usize)
        .ok_or_else(|| Error::UnknownLabel(label.to_owned()))
}

impl RawExample for RawClassified {
    type Encoded = ClassifiedExample;

    fn feature_strings(&self) -> Box<dyn Iterator<Item = &str> + '_> {
        Box::new(self.features.iter().map(String::as_str))
    }

    fn label_strings(&self) -> Box<dyn Iterator<Item = &str> + '_> {
        Box::new(std::iter::once(self.label.as_str()))
    }

    fn encode(&self, features: &Alphabet, labels: &Alphabet) -> Result<ClassifiedExample> {
        Ok(ClassifiedExample {
            features: encode_features(features, &self.features),
            label: encode_label(labels, &self.label)?,
        })
    }
}

impl RawExample for RawSequence {
    type Encoded = SequenceExample;

    fn feature_strings(&self) -> Box<dyn Iterator<Item = &str> + '_> {
        Box::new(self.token_features.iter().flatten().map(String::as_str))
    }

    fn label_strings(&self) -> Box<dyn Iterator<Item = &str> + '_> {
        Box::new(self.labels.iter().map(String::as_str))
    }

    fn encode(&self, features: &Alphabet, labels: &Alphabet) -> Result<SequenceExample> {
        if self.labels.is_empty() || self.labels.len() != self.token_features.len() {
            return Err(Error::LengthMismatch(
                self.token_features.len(),
                self.labels.len(),
            ));
        }
        Ok(SequenceExample {
            token_features: self
                .token_features
                .iter()
                .map(|f| encode_features(features, f))
                .collect(),
            labels: self
                .labels
                .iter()
                .map(|l| encode_label(labels, l))
                .collect::<Result<_>>()?,
        })
    }
}

/// Builds feature and label alphabets in first-seen order.
pub fn build_alphabets<R: RawExample>(raw: &[R]) -> Result<(Alphabet, Alphabet)> {
    if raw.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut features = Alphabet::new();
    let mut labels = Alphabet::new();
    for example in raw {
        for f in example.feature_strings() {
            features.intern(f);
        }
        for l in example.label_strings() {
            labels.intern(l);
        }
    }
    Ok((features, labels))
}

/// Encoded examples together with the alphabets used to encode them.
#[derive(Clone, Debug)]
pub struct Dataset<E> {
    pub examples: Vec<E>,
    pub features: Alphabet,
    pub labels: Alphabet,
}

impl<E> Dataset<E> {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

impl<E> Dataset<E> {
    /// Builds alphabets from `raw` and encodes it. Both alphabets come back
    /// frozen.
    pub fn from_raw<R: RawExample<Encoded = E>>(raw: &[R]) -> Result<Self> {
        let (mut features, mut labels) = build_alphabets(raw)?;
        features.freeze();
        labels.freeze();
        Self::encode_with(raw, &features, &labels)
    }

    /// Encodes `raw` against existing alphabets, e.g. a dev or test split.
    pub fn encode_with<R: RawExample<Encoded = E>>(
        raw: &[R],
        features: &Alphabet,
        labels: &Alphabet,
    ) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let examples = raw
            .iter()
            .map(|r| r.encode(features, labels))
            .collect::<Result<_>>()?;
        Ok(Dataset {
            examples,
            features: features.clone(),
            labels: labels.clone(),
        })
    }
}
