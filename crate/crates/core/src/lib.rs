//! Mixing native and comparability-induced similarity for bilingual document
//! collections.
//!
//! Two document sets in different languages each carry a native similarity
//! (tf-idf cosine). A comparability matrix, computed from a bilingual
//! dictionary, links them. Cosine similarity between rows (or columns) of that
//! matrix gives an induced similarity for each side, which is blended with the
//! native one:
//!
//! ```text
//! S'(i, j) = α · S_induced(i, j) + (1 − α) · S_native(i, j)
//! ```
//!
//! The crate also provides the learners and metrics used to measure the
//! effect of `α`: 1-NN classification, k-medoids clustering, AC, NMI and the
//! Davies–Bouldin index, plus a seeded synthetic benchmark generator.

pub mod comparability;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod learners;
pub mod matrix;
pub mod synthetic;
pub mod text;
pub mod toy;

pub use comparability::{BilingualDictionary, LexiconView, Measure};
pub use error::{Error, Result};
pub use learners::Partition;
pub use matrix::{ComparabilityMatrix, MixParameter, SimilarityMatrix};
