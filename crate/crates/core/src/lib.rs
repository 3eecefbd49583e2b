//! Mood classification of song lyrics: corpus preparation, tf-idf and
//! lexicon features, CBOW embeddings, an RBF SVM baseline and CNN/RNN/LSTM
//! classifiers, with evaluation reports.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the command-line tool uses.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod embeddings;
mod error;
pub mod eval;
pub mod features;
pub mod modelfile;
pub mod nn;
pub mod rng;
mod scalar;
pub mod svm;

pub use corpus::{LyricDocument, MoodLabel};
pub use error::{Error, Result};
pub use scalar::{format_exact, Scalar};

pub type Embeddings = embeddings::EmbeddingMatrix<f64>;
pub type Cnn = nn::CnnClassifier<f64>;
pub type Rnn = nn::RnnClassifier<f64>;
pub type Lstm = nn::LstmClassifier<f64>;
pub type Svm = svm::MulticlassSvm<f64>;
pub type FeatureVec = features::FeatureVector<f64>;
pub type Lexicon = features::CategoryLexicon<f64>;
