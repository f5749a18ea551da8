//! Normalization of dialectal Finland Swedish transcripts to standard
//! Swedish spelling with a character-level chunked encoder–decoder.
//!
//! The pipeline runs [`corpus`] (load, clean, tokenize, split) →
//! [`aligner`] (word alignment of dialect to standard tokens) →
//! [`chunker`] (character-symbol training examples of `k` words) →
//! [`model`] (training and beam decoding) → [`eval`] (WER and accuracy).

pub mod aligner;
pub mod chunker;
pub mod cli;
pub mod corpus;
pub mod eval;
pub mod model;
