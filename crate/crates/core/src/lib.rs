//! Domain-specific word embeddings for odor descriptors.
//!
//! The crate covers the whole pipeline:
//!
//! * [`corpus`]: chunk catalog descriptions into a frequency-annotated
//!   descriptor [`Lexicon`](corpus::Lexicon), merge near-duplicate spellings,
//!   prune rare entries and report frequency / co-occurrence statistics.
//! * [`embedding`]: render descriptors into a [`Prompt`](embedding::Prompt)
//!   and embed them with one of several backends, including an HTTP client
//!   for an external embedding service.
//! * [`benchmark`]: the zero-shot task that predicts target-descriptor ratings
//!   from source-descriptor ratings through per-molecule linear regression.
//! * [`mining`]: frequency-weighted k-beam search for prompts that maximize
//!   the benchmark score.
//! * [`analysis`]: PCA projections and distance summaries of embedding spaces.

pub mod analysis;
pub mod benchmark;
pub mod corpus;
pub mod embedding;
pub mod error;
mod linalg;
pub mod mining;

pub use error::{Error, ErrorClass, Result};
/// Matrix types used in the public API.
pub use nalgebra;
