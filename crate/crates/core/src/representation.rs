//! Category-weight representations of sentences.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dictionary::CategoryDictionary;
use crate::embedding::{cosine_similarity, embed_texts, EmbedError, EmbeddingProvider, SimilarityError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sentecon,
    Bow,
    Softmatch,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Sentecon => "sentecon",
            Method::Bow => "bow",
            Method::Softmatch => "softmatch",
        }
    }
}

/// A d-vector of category weights, aligned with the category names of the
/// dictionary or lexicon that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Representation {
    method: Method,
    categories: Arc<[String]>,
    weights: Vec<f64>,
}

impl Representation {
    pub fn new(method: Method, categories: Arc<[String]>, weights: Vec<f64>) -> Self {
        assert_eq!(categories.len(), weights.len(), "one weight per category");
        Self {
            method,
            categories,
            weights,
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodeError {
    #[error("provider dimension {provider} does not match dictionary dimension {dictionary}")]
    DimMismatch { dictionary: usize, provider: usize },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("sentence embedding has zero norm")]
    ZeroNorm,
    #[error("category {category:?} has a zero-norm centroid")]
    ZeroNormCentroid { category: String },
    #[error("sentence {index}")]
    Batch {
        index: usize,
        #[source]
        source: Box<EncodeError>,
    },
}

/// Largest cosine similarity between `embedding` and any of the centroids.
/// With a single centroid this is exactly that centroid's cosine.
pub fn category_weight(embedding: &[f32], centroids: &[Vec<f32>]) -> Result<f64, SimilarityError> {
    let mut best = f64::NEG_INFINITY;
    for c in centroids {
        best = best.max(cosine_similarity(embedding, c)?);
    }
    Ok(best)
}

/// Scores an already-computed sentence embedding against the dictionary.
pub fn encode_embedding(dict: &CategoryDictionary, embedding: &[f32]) -> Result<Representation, EncodeError> {
    if embedding.len() != dict.dim() {
        return Err(EncodeError::DimMismatch {
            dictionary: dict.dim(),
            provider: embedding.len(),
        });
    }
    let weights = (0..dict.len())
        .map(|i| {
            category_weight(embedding, dict.centroids(i)).map_err(|e| match e {
                SimilarityError::ZeroNorm if embedding.iter().all(|&x| x == 0.0) => EncodeError::ZeroNorm,
                SimilarityError::ZeroNorm => EncodeError::ZeroNormCentroid {
                    category: dict.categories()[i].clone(),
                },
                SimilarityError::LengthMismatch { left, right } => EncodeError::DimMismatch {
                    dictionary: right,
                    provider: left,
                },
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Representation::new(Method::Sentecon, dict.categories_arc(), weights))
}

fn check_dim(dict: &CategoryDictionary, provider: &dyn EmbeddingProvider) -> Result<(), EncodeError> {
    if provider.dim() != dict.dim() {
        return Err(EncodeError::DimMismatch {
            dictionary: dict.dim(),
            provider: provider.dim(),
        });
    }
    Ok(())
}

/// Weight `i` is the similarity between the sentence embedding and
/// category `i`'s closest centroid.
pub fn encode(
    dict: &CategoryDictionary,
    sentence: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<Representation, EncodeError> {
    check_dim(dict, provider)?;
    let v = crate::embedding::embed_text(provider, sentence)?;
    encode_embedding(dict, &v)
}

/// Encodes sentences in parallel; output order matches input order. The
/// first failure (lowest index) aborts the batch.
pub fn encode_batch<S: AsRef<str> + Sync>(
    dict: &CategoryDictionary,
    sentences: &[S],
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<Representation>, EncodeError> {
    check_dim(dict, provider)?;
    let vectors = embed_texts(provider, sentences).map_err(|(index, e)| EncodeError::Batch {
        index,
        source: Box::new(EncodeError::Embed(e)),
    })?;
    let encoded: Vec<Result<Representation, EncodeError>> =
        vectors.par_iter().map(|v| encode_embedding(dict, v)).collect();
    encoded
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| EncodeError::Batch {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}
