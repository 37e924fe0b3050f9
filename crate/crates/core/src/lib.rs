//! Interpretable sentence representations built from a word-to-category
//! lexicon and a sentence-embedding source.
//!
//! The pipeline: parse a [`lexicon::Lexicon`], collect per-category texts
//! (the lexicon's own words, or reference-corpus sentences that contain
//! them), embed them through an [`embedding::EmbeddingProvider`], summarize
//! each category as one or more centroids ([`dictionary`]), and score new
//! sentences by cosine similarity to those centroids ([`representation`]).
//! Lexicon-only baselines, a linear probe, and the statistical analyses live
//! in [`baselines`], [`probe`] and [`analysis`].

pub mod analysis;
pub mod baselines;
pub mod codec;
pub mod dictionary;
pub mod embedding;
pub mod lexicon;
pub mod probe;
pub mod representation;
pub mod table;

pub use codec::DecodeError;
pub use dictionary::{CategoryDictionary, CategoryItems, ItemMode};
pub use embedding::{EmbeddingProvider, EmbeddingStore, PseudoProvider, StoreProvider};
pub use lexicon::{Lexicon, TokenSequence};
pub use representation::{Method, Representation};
