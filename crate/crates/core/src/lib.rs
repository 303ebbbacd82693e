//! Dietary-supplement safety-signal extraction from sentence-level clinical
//! text.
//!
//! The pipeline has three stages:
//!
//! 1. **Named entity recognition** ([`ner`]): BIO tagging of supplement (DS)
//!    and sign/symptom (Event) mentions with Bi-LSTM-CRF taggers (word-only,
//!    char-CNN, char-LSTM inputs) and a feature-based CRF baseline.
//! 2. **Relation extraction** ([`re`]): classifying each (DS, Event) pair in
//!    a sentence as positive (indication), negative (adverse event), or not
//!    related, with a position-embedding CNN, an attention Bi-LSTM, and a
//!    random-forest n-gram baseline.
//! 3. **Signal discovery** ([`discovery`]): running both models over
//!    unlabeled sentences, aggregating pair frequencies, applying a
//!    source-sentence frequency threshold, and flagging each signal as known
//!    or unknown against a knowledge-base file.
//!
//! All neural models run on the in-crate reverse-mode autodiff core
//! ([`tensor`]); there is no external ML runtime. Everything is `f64` and
//! deterministic under a fixed [`tensor::Rng`] seed.

pub mod artifact;
pub mod corpus;
pub mod discovery;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod ner;
pub mod pipeline;
pub mod re;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
