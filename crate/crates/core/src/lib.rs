//! Few-shot tweet classification: decide whether a short text belongs to an
//! event that is defined only by a handful of example tweets.
//!
//! The crate bundles everything needed to run that task end to end without
//! external ML dependencies: corpus ingestion and a synthetic-corpus
//! generator ([`corpus`]), episodic sampling for the event-vs-event and
//! event-vs-all regimes ([`sampler`]), a minimal tensor/autodiff kernel
//! ([`numeric`]), a convolutional sentence encoder ([`encoder`]), the
//! matching / prototypical / one-way prototypical heads ([`heads`]), and the
//! training, evaluation, checkpointing and triage-scoring harness
//! ([`harness`]).

pub mod corpus;
pub mod encoder;
pub mod harness;
pub mod heads;
pub mod numeric;
pub mod sampler;

pub use corpus::{Corpus, Tweet, Vocabulary};
