//! Lexicon + word-embedding soft matching.
//!
//! Starts from bag-of-categories counts and additionally credits tokens the
//! lexicon does not cover when their word embedding is close enough to one
//! of a category's (exact, non-wildcard) words.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine_similarity, EmbeddingStore};
use crate::lexicon::{Lexicon, Pattern, Term, TokenSequence};
use crate::representation::{Method, Representation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Increment {
    /// Add 1 per qualifying token.
    Unit,
    /// Add the similarity value itself.
    Similarity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftMatchConfig {
    pub threshold: f64,
    pub increment: Increment,
}

impl Default for SoftMatchConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            increment: Increment::Unit,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SoftMatchError {
    #[error("threshold {0} outside (0, 1]")]
    Threshold(f64),
}

/// Soft matcher with the category anchor vectors resolved once.
#[derive(Debug)]
pub struct SoftMatcher<'a> {
    lex: &'a Lexicon,
    store: &'a EmbeddingStore,
    config: SoftMatchConfig,
    anchors: Vec<Vec<&'a [f32]>>,
    missing_anchors: usize,
}

impl<'a> SoftMatcher<'a> {
    pub fn new(lex: &'a Lexicon, store: &'a EmbeddingStore, config: SoftMatchConfig) -> Result<Self, SoftMatchError> {
        if !(config.threshold > 0.0 && config.threshold <= 1.0) {
            return Err(SoftMatchError::Threshold(config.threshold));
        }
        let mut missing = 0;
        let anchors = (0..lex.len())
            .map(|c| {
                lex.patterns(c)
                    .iter()
                    .filter_map(|p| match p {
                        Pattern::Word(Term::Exact(w)) => {
                            let v = store.get(w);
                            if v.is_none() {
                                missing += 1;
                            }
                            v
                        }
                        _ => None,
                    })
                    .collect()
            })
            .collect();
        if missing > 0 {
            log::warn!("{missing} lexicon words have no vector in the soft-match store");
        }
        Ok(Self {
            lex,
            store,
            config,
            anchors,
            missing_anchors: missing,
        })
    }

    /// Lexicon words skipped because the store has no vector for them.
    pub fn missing_anchors(&self) -> usize {
        self.missing_anchors
    }

    pub fn config(&self) -> &SoftMatchConfig {
        &self.config
    }

    pub fn encode(&self, sentence: &TokenSequence) -> Representation {
        let matches = self.lex.match_sentence(sentence.tokens());
        let mut weights: Vec<f64> = matches.counts.iter().map(|&c| c as f64).collect();
        for (token, &matched) in sentence.tokens().iter().zip(&matches.matched) {
            if matched {
                continue;
            }
            let Some(v) = self.store.get(token) else { continue };
            for (cat, anchors) in self.anchors.iter().enumerate() {
                // zero-norm vectors carry no direction and are skipped
                let best = anchors
                    .iter()
                    .filter_map(|a| cosine_similarity(v, a).ok())
                    .fold(f64::NEG_INFINITY, f64::max);
                if best > self.config.threshold {
                    weights[cat] += match self.config.increment {
                        Increment::Unit => 1.0,
                        Increment::Similarity => best,
                    };
                }
            }
        }
        Representation::new(Method::Softmatch, self.lex.categories_arc(), weights)
    }
}

/// One-shot soft-match encoding; see [`SoftMatcher`] for repeated use.
pub fn encode_soft_match(
    lex: &Lexicon,
    sentence: &TokenSequence,
    store: &EmbeddingStore,
    config: SoftMatchConfig,
) -> Result<Representation, SoftMatchError> {
    Ok(SoftMatcher::new(lex, store, config)?.encode(sentence))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{encode_bag_of_categories, parse_category_tsv, tokenize};

    fn toy() -> Lexicon {
        parse_category_tsv("posemo\thappy\tgood*\nnegemo\tsad\n".as_bytes()).unwrap()
    }

    /// Unit vectors at chosen angles so cos(joyful, happy) = 0.8 and
    /// cos(joyful, sad) = 0.1.
    fn toy_store() -> EmbeddingStore {
        let mut s = EmbeddingStore::new(3).unwrap();
        s.insert("joyful", vec![1.0, 0.0, 0.0]).unwrap();
        s.insert("happy", vec![0.8, 0.6, 0.0]).unwrap();
        s.insert("sad", vec![0.1, 0.0, (0.99f32).sqrt()]).unwrap();
        s
    }

    #[test]
    fn unit_increment_above_threshold() {
        let r = encode_soft_match(&toy(), &tokenize("so joyful"), &toy_store(), SoftMatchConfig::default()).unwrap();
        assert_eq!(r.weights(), [1.0, 0.0]);
        assert_eq!(r.method(), Method::Softmatch);
    }

    #[test]
    fn similarity_increment() {
        let cfg = SoftMatchConfig {
            threshold: 0.05,
            increment: Increment::Similarity,
        };
        let r = encode_soft_match(&toy(), &tokenize("joyful"), &toy_store(), cfg).unwrap();
        assert!((r.weights()[0] - 0.8).abs() < 1e-6);
        assert!((r.weights()[1] - 0.1).abs() < 1e-6);
    }

    #[test]
    fn covered_sentence_equals_bag() {
        let lex = toy();
        let toks = tokenize("happy goodness sad");
        let bow = encode_bag_of_categories(&lex, &toks, false).unwrap();
        let soft = encode_soft_match(&lex, &toks, &toy_store(), SoftMatchConfig::default()).unwrap();
        assert_eq!(soft.weights(), bow.weights());
    }

    #[test]
    fn threshold_one_never_fires() {
        let lex = toy();
        let mut store = toy_store();
        store.insert("glad", vec![0.8, 0.6, 0.0]).unwrap();
        let toks = tokenize("glad joyful");
        let cfg = SoftMatchConfig {
            threshold: 1.0,
            increment: Increment::Unit,
        };
        let soft = encode_soft_match(&lex, &toks, &store, cfg).unwrap();
        assert_eq!(
            soft.weights(),
            encode_bag_of_categories(&lex, &toks, false).unwrap().weights()
        );
    }

    #[test]
    fn invalid_threshold() {
        for t in [0.0, -0.1, 1.5, f64::NAN] {
            let cfg = SoftMatchConfig {
                threshold: t,
                increment: Increment::Unit,
            };
            assert!(SoftMatcher::new(&toy(), &toy_store(), cfg).is_err());
        }
    }

    #[test]
    fn counts_missing_anchor_words() {
        let mut s = EmbeddingStore::new(3).unwrap();
        s.insert("happy", vec![1.0, 0.0, 0.0]).unwrap();
        let lex = toy();
        let m = SoftMatcher::new(&lex, &s, SoftMatchConfig::default()).unwrap();
        // "sad" missing; the wildcard good* never anchors
        assert_eq!(m.missing_anchors(), 1);
    }
}
