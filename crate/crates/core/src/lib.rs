//! Fast CPU training of elastic-net linear models: a maximum-entropy text
//! classifier and a linear-chain CRF tagger, trained with lock-free
//! parallel SGD using lazy L1/L2 updates and optional active-bias sampling.

pub mod active_bias;
pub mod alphabet;
pub mod crf;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod formats;
pub mod maxent;
pub mod model;
pub mod model_io;
pub mod optimizer;
pub mod reference;
pub mod sparse;
pub mod synthetic;

pub use alphabet::Alphabet;
pub use crf::CrfModel;
pub use dataset::{ClassifiedExample, Dataset, SequenceExample};
pub use error::{Error, Result};
pub use maxent::MaxEntModel;
pub use model::LinearModel;
pub use optimizer::{train, Hyperparams, TrainOutput};
pub use sparse::SparseVector;
