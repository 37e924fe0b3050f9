//! Embedding sources and the vector primitives built on them.
//!
//! Vectors are stored as `f32`; every reduction (dot products, norms, means)
//! accumulates in `f64` in fixed index order so results do not depend on
//! thread scheduling.

use std::path::Path;
use std::time::Duration;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{bounded_capacity, put_str, put_u32, put_u64, ByteReader, DecodeError};

pub const EMBS_MAGIC: &str = "EMBS";
pub const EMBS_VERSION: u32 = 1;
/// Magic (4) + version (4) + dim (4) + count (8).
pub const EMBS_HEADER_LEN: usize = 20;
/// Keys with this prefix carry exporter metadata rather than text embeddings.
pub const META_PREFIX: &str = "__meta/";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimilarityError {
    #[error("vector lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("cosine similarity of a zero-norm vector")]
    ZeroNorm,
}

/// Cosine similarity accumulated in f64 and clamped to [-1, 1].
/// Zero-norm inputs are an error rather than a silent 0.
pub fn cosine_similarity(u: &[f32], v: &[f32]) -> Result<f64, SimilarityError> {
    if u.len() != v.len() {
        return Err(SimilarityError::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a as f64, b as f64);
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(SimilarityError::ZeroNorm);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Cosine similarity for f64 vectors (used on category-weight vectors).
pub fn cosine_similarity_f64(u: &[f64], v: &[f64]) -> Result<f64, SimilarityError> {
    if u.len() != v.len() {
        return Err(SimilarityError::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum();
    let nv: f64 = v.iter().map(|a| a * a).sum();
    if nu == 0.0 || nv == 0.0 {
        return Err(SimilarityError::ZeroNorm);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoolError {
    #[error("cannot pool an empty list of vectors")]
    Empty,
    #[error("row {row} has length {got}, expected {expected}")]
    Ragged { row: usize, expected: usize, got: usize },
}

/// Component-wise mean of the rows.
pub fn mean_pool<R: AsRef<[f32]>>(rows: &[R]) -> Result<Vec<f32>, PoolError> {
    let first = rows.first().ok_or(PoolError::Empty)?.as_ref();
    let n = first.len();
    let mut acc = vec![0.0f64; n];
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != n {
            return Err(PoolError::Ragged {
                row: i,
                expected: n,
                got: row.len(),
            });
        }
        for (a, &x) in acc.iter_mut().zip(row) {
            *a += x as f64;
        }
    }
    let m = rows.len() as f64;
    Ok(acc.into_iter().map(|s| (s / m) as f32).collect())
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("embedding dimension must be positive")]
    ZeroDim,
    #[error("vector for {key:?} has length {got}, store dimension is {expected}")]
    DimMismatch { key: String, expected: usize, got: usize },
    #[error("duplicate key {0:?}")]
    DuplicateKey(String),
    #[error("non-finite component in vector for {0:?}")]
    NonFinite(String),
    #[error("invalid EMBS data: {0}")]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Exact-text keyed vectors of a single dimension, in insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    entries: IndexMap<String, Vec<f32>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Result<Self, StoreError> {
        if dim == 0 || dim > u32::MAX as usize {
            return Err(StoreError::ZeroDim);
        }
        Ok(Self {
            dim,
            entries: IndexMap::new(),
        })
    }

    pub fn insert(&mut self, key: impl Into<String>, vector: Vec<f32>) -> Result<(), StoreError> {
        let key = key.into();
        if vector.len() != self.dim {
            return Err(StoreError::DimMismatch {
                key,
                expected: self.dim,
                got: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(StoreError::NonFinite(key));
        }
        if self.entries.contains_key(&key) {
            return Err(StoreError::DuplicateKey(key));
        }
        self.entries.insert(key, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[f32]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Metadata records written by the exporter, with the reserved prefix
    /// stripped from their keys.
    pub fn metadata(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().filter_map(|k| k.strip_prefix(META_PREFIX))
    }

    /// Records a `name=value` metadata entry (a zero vector under a
    /// reserved key).
    pub fn insert_metadata(&mut self, name: &str, value: &str) -> Result<(), StoreError> {
        self.insert(format!("{META_PREFIX}{name}={value}"), vec![0.0; self.dim])
    }

    /// Data records only, skipping metadata.
    pub fn vectors(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.iter().filter(|(k, _)| !k.starts_with(META_PREFIX))
    }

    pub fn encoded_len(&self) -> usize {
        EMBS_HEADER_LEN + self.entries.keys().map(|k| 4 + k.len() + 4 * self.dim).sum::<usize>()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(EMBS_MAGIC.as_bytes());
        put_u32(&mut out, EMBS_VERSION);
        put_u32(&mut out, self.dim as u32);
        put_u64(&mut out, self.entries.len() as u64);
        for (k, v) in &self.entries {
            put_str(&mut out, k);
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = ByteReader::new(bytes);
        r.magic(EMBS_MAGIC)?;
        let version_at = r.offset();
        let version = r.u32()?;
        if version != EMBS_VERSION {
            return Err(DecodeError::UnsupportedVersion {
                version,
                offset: version_at,
            });
        }
        let dim_at = r.offset();
        let dim = r.u32()? as usize;
        if dim == 0 {
            return Err(DecodeError::Invalid {
                offset: dim_at,
                message: "dimension must be positive".into(),
            });
        }
        let count = r.u64()?;
        let mut entries = IndexMap::with_capacity(bounded_capacity(count, r.remaining(), 4 + 4 * dim));
        for _ in 0..count {
            let key_at = r.offset();
            let key = r.string()?;
            let mut v = Vec::with_capacity(dim.min(r.remaining() / 4));
            for _ in 0..dim {
                v.push(r.finite_f32()?);
            }
            if entries.contains_key(key) {
                return Err(DecodeError::DuplicateKey {
                    key: key.to_string(),
                    offset: key_at,
                });
            }
            entries.insert(key.to_string(), v);
        }
        r.finish()?;
        Ok(Self { dim, entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let bytes = std::fs::read(path)?;
        Ok(Self::from_bytes(&bytes)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("no embedding stored for key {key:?}")]
    KeyNotFound { key: String },
    #[error("embedding service request failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("embedding service protocol error: {0}")]
    Protocol(String),
    #[error("provider returned a vector of length {got}, expected {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("provider returned a non-finite vector for {text:?}")]
    NonFinite { text: String },
}

impl EmbedError {
    /// The text the error is about, when known.
    pub fn key(&self) -> Option<&str> {
        match self {
            EmbedError::KeyNotFound { key } => Some(key),
            EmbedError::NonFinite { text } => Some(text),
            _ => None,
        }
    }
}

/// A deterministic source of fixed-dimension text vectors.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    /// Identifier recorded in output provenance.
    fn id(&self) -> String;

    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

fn check_vector(provider: &dyn EmbeddingProvider, text: &str, v: &[f32]) -> Result<(), EmbedError> {
    if v.len() != provider.dim() {
        return Err(EmbedError::DimMismatch {
            expected: provider.dim(),
            got: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(EmbedError::NonFinite { text: text.to_string() });
    }
    Ok(())
}

/// Embeds one text, checking the provider's output dimension and finiteness.
pub fn embed_text(provider: &dyn EmbeddingProvider, text: &str) -> Result<Vec<f32>, EmbedError> {
    let v = provider.embed(text)?;
    check_vector(provider, text, &v)?;
    Ok(v)
}

const BATCH_CHUNK: usize = 64;

/// Embeds many texts, in parallel chunks, returning vectors in input order.
/// On failure the index of the offending text (or of the first text in the
/// failing chunk, when the provider cannot tell) is returned.
pub fn embed_texts<S: AsRef<str> + Sync>(
    provider: &dyn EmbeddingProvider,
    texts: &[S],
) -> Result<Vec<Vec<f32>>, (usize, EmbedError)> {
    let chunks: Vec<Result<Vec<Vec<f32>>, (usize, EmbedError)>> = texts
        .par_chunks(BATCH_CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let start = c * BATCH_CHUNK;
            let refs: Vec<&str> = chunk.iter().map(AsRef::as_ref).collect();
            let locate = |e: &EmbedError| {
                e.key()
                    .and_then(|k| refs.iter().position(|t| *t == k))
                    .map_or(start, |p| start + p)
            };
            let vectors = provider.embed_batch(&refs).map_err(|e| (locate(&e), e))?;
            if vectors.len() != refs.len() {
                return Err((
                    start,
                    EmbedError::Protocol(format!("asked for {} vectors, got {}", refs.len(), vectors.len())),
                ));
            }
            for (i, (t, v)) in refs.iter().zip(&vectors).enumerate() {
                check_vector(provider, t, v).map_err(|e| (start + i, e))?;
            }
            Ok(vectors)
        })
        .collect();
    let mut out = Vec::with_capacity(texts.len());
    for chunk in chunks {
        out.extend(chunk?);
    }
    Ok(out)
}

/// Looks texts up by exact key in an [`EmbeddingStore`].
#[derive(Clone, Debug)]
pub struct StoreProvider {
    store: std::sync::Arc<EmbeddingStore>,
    id: String,
}

impl StoreProvider {
    pub fn new(store: EmbeddingStore, id: impl Into<String>) -> Self {
        Self {
            store: std::sync::Arc::new(store),
            id: id.into(),
        }
    }

    /// Loads an EMBS file; the provider id embeds the file's SHA-256.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let bytes = std::fs::read(path)?;
        let digest = hex::encode(Sha256::digest(&bytes));
        let store = EmbeddingStore::from_bytes(&bytes)?;
        Ok(Self::new(store, format!("store:sha256:{digest}")))
    }

    pub fn store(&self) -> &EmbeddingStore {
        &self.store
    }
}

impl EmbeddingProvider for StoreProvider {
    fn dim(&self) -> usize {
        self.store.dim()
    }

    fn id(&self) -> String {
        self.id.clone()
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        self.store
            .get(text)
            .map(<[f32]>::to_vec)
            .ok_or_else(|| EmbedError::KeyNotFound { key: text.to_string() })
    }
}

/// Seeded, non-semantic unit vectors for tests and pipeline dry runs: a hash
/// of (seed, text) seeds a ChaCha stream that fills `dim` uniform components,
/// which are then scaled to unit length.
#[derive(Clone, Debug)]
pub struct PseudoProvider {
    seed: u64,
    dim: usize,
}

impl PseudoProvider {
    pub fn new(seed: u64, dim: usize) -> Self {
        assert!(dim > 0, "pseudo-provider dimension must be positive");
        Self { seed, dim }
    }
}

impl EmbeddingProvider for PseudoProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn id(&self) -> String {
        format!("pseudo:{}:{}", self.seed, self.dim)
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(text.as_bytes());
        let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
        loop {
            let raw: Vec<f64> = (0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                return Ok(raw.into_iter().map(|x| (x / norm) as f32).collect());
            }
        }
    }
}

#[derive(Serialize)]
struct ServiceRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct ServiceResponse {
    dim: usize,
    vectors: Vec<Vec<f32>>,
}

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Retries after the first attempt.
    pub retries: u32,
    /// Delay before the first retry; doubles on each subsequent retry.
    pub backoff: Duration,
    pub timeout: Duration,
    pub batch_size: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            retries: 3,
            backoff: Duration::from_millis(200),
            timeout: Duration::from_secs(60),
            batch_size: 64,
        }
    }
}

/// Embeds texts through an HTTP service speaking
/// `{"texts": [...]}` -> `{"dim": n, "vectors": [[...], ...]}`.
pub struct ServiceProvider {
    url: String,
    agent: ureq::Agent,
    config: ServiceConfig,
    dim: usize,
}

impl std::fmt::Debug for ServiceProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ServiceProvider")
            .field("url", &self.url)
            .field("dim", &self.dim)
            .finish()
    }
}

impl ServiceProvider {
    /// Connects and discovers the dimension with an empty-batch request.
    pub fn connect(url: impl Into<String>, config: ServiceConfig) -> Result<Self, EmbedError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        let mut provider = Self {
            url: url.into(),
            agent,
            config,
            dim: 0,
        };
        let resp = provider.request(&[])?;
        if resp.dim == 0 {
            return Err(EmbedError::Protocol("service reported dimension 0".into()));
        }
        provider.dim = resp.dim;
        Ok(provider)
    }

    fn request(&self, texts: &[&str]) -> Result<ServiceResponse, EmbedError> {
        let body = ServiceRequest { texts };
        let mut delay = self.config.backoff;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = self
                .agent
                .post(&self.url)
                .send_json(&body)
                .and_then(|mut r| r.body_mut().read_json::<ServiceResponse>());
            match result {
                Ok(resp) => return Ok(resp),
                Err(e) if attempt > self.config.retries => {
                    return Err(EmbedError::Transport {
                        attempts: attempt,
                        message: e.to_string(),
                    })
                }
                Err(e) => {
                    log::warn!("embedding request attempt {attempt} failed: {e}; retrying");
                    std::thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
    }
}

impl EmbeddingProvider for ServiceProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn id(&self) -> String {
        format!("service:{}", self.url)
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        let mut v = self.embed_batch(&[text])?;
        Ok(v.pop().expect("one vector per text"))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.config.batch_size.max(1)) {
            let resp = self.request(chunk)?;
            if resp.dim != self.dim {
                return Err(EmbedError::DimMismatch {
                    expected: self.dim,
                    got: resp.dim,
                });
            }
            if resp.vectors.len() != chunk.len() {
                return Err(EmbedError::Protocol(format!(
                    "asked for {} vectors, got {}",
                    chunk.len(),
                    resp.vectors.len()
                )));
            }
            out.extend(resp.vectors);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine_similarity(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap();
        assert!((c - 8.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(SimilarityError::ZeroNorm)
        );
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(SimilarityError::LengthMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn mean_pool_examples() {
        assert_eq!(mean_pool(&[vec![0.5, -1.0]]).unwrap(), [0.5, -1.0]);
        assert_eq!(mean_pool(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap(), [1.0, 1.0]);
        let v = vec![0.1f32, 0.7, -3.3];
        assert_eq!(mean_pool(&vec![v.clone(); 7]).unwrap(), v);
        assert_eq!(mean_pool::<Vec<f32>>(&[]), Err(PoolError::Empty));
        assert!(matches!(
            mean_pool(&[vec![1.0], vec![1.0, 2.0]]),
            Err(PoolError::Ragged { row: 1, .. })
        ));
    }

    fn sample_store() -> EmbeddingStore {
        let mut s = EmbeddingStore::new(4).unwrap();
        s.insert("a", vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        s.insert("bb", vec![-0.0, f32::MIN_POSITIVE, 1e-30, 5.5]).unwrap();
        s.insert("ccc", vec![0.25; 4]).unwrap();
        s
    }

    #[test]
    fn store_file_size() {
        let s = sample_store();
        let expected = EMBS_HEADER_LEN + (4 + 1 + 16) + (4 + 2 + 16) + (4 + 3 + 16);
        assert_eq!(s.to_bytes().len(), expected);
        assert_eq!(s.encoded_len(), expected);
    }

    #[test]
    fn store_round_trip_is_bit_exact() {
        let s = sample_store();
        let bytes = s.to_bytes();
        let back = EmbeddingStore::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.get("bb").unwrap()), bits(s.get("bb").unwrap()));
    }

    #[test]
    fn store_decode_errors() {
        let mut bytes = sample_store().to_bytes();
        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            EmbeddingStore::from_bytes(&bad),
            Err(DecodeError::BadMagic { .. })
        ));

        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(
            EmbeddingStore::from_bytes(truncated),
            Err(DecodeError::Truncated { .. })
        ));

        // NaN in the first record's first component
        let first = EMBS_HEADER_LEN + 4 + 1;
        let mut nan = bytes.clone();
        nan[first..first + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(
            EmbeddingStore::from_bytes(&nan),
            Err(DecodeError::NonFinite { offset: first })
        );

        // two records with the same key; the second starts at byte 29
        let mut dup = Vec::new();
        dup.extend_from_slice(b"EMBS");
        put_u32(&mut dup, 1);
        put_u32(&mut dup, 1);
        put_u64(&mut dup, 2);
        for _ in 0..2 {
            put_str(&mut dup, "k");
            dup.extend_from_slice(&1.0f32.to_le_bytes());
        }
        assert_eq!(
            EmbeddingStore::from_bytes(&dup),
            Err(DecodeError::DuplicateKey {
                key: "k".into(),
                offset: 29
            })
        );

        bytes.push(0);
        assert!(matches!(
            EmbeddingStore::from_bytes(&bytes),
            Err(DecodeError::TrailingBytes { count: 1, .. })
        ));
    }

    #[test]
    fn huge_claimed_count_does_not_allocate() {
        let mut b = Vec::new();
        b.extend_from_slice(b"EMBS");
        put_u32(&mut b, 1);
        put_u32(&mut b, u32::MAX);
        put_u64(&mut b, u64::MAX);
        assert!(EmbeddingStore::from_bytes(&b).is_err());
    }

    #[test]
    fn metadata_records_are_separate() {
        let mut s = sample_store();
        s.insert_metadata("pooling", "mean").unwrap();
        assert_eq!(s.metadata().collect::<Vec<_>>(), ["pooling=mean"]);
        assert_eq!(s.vectors().count(), 3);
        assert_eq!(s.len(), 4);
        let back = EmbeddingStore::from_bytes(&s.to_bytes()).unwrap();
        assert_eq!(back.metadata().collect::<Vec<_>>(), ["pooling=mean"]);
    }

    #[test]
    fn store_provider_lookup() {
        let mut s = EmbeddingStore::new(2).unwrap();
        s.insert("happy", vec![1.0, 0.0]).unwrap();
        let p = StoreProvider::new(s, "test");
        assert_eq!(embed_text(&p, "happy").unwrap(), [1.0, 0.0]);
        assert_eq!(
            embed_text(&p, "joy"),
            Err(EmbedError::KeyNotFound { key: "joy".into() })
        );
    }

    #[test]
    fn pseudo_provider_is_deterministic_unit() {
        let p = PseudoProvider::new(7, 16);
        let a = embed_text(&p, "a").unwrap();
        assert_eq!(a, embed_text(&p, "a").unwrap());
        let norm: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
        assert_ne!(a, embed_text(&p, "b").unwrap());
        assert_ne!(a, embed_text(&PseudoProvider::new(8, 16), "a").unwrap());
    }

    #[test]
    fn embed_texts_reports_failing_index() {
        let mut s = EmbeddingStore::new(1).unwrap();
        for i in 0..100 {
            s.insert(format!("w{i}"), vec![i as f32]).unwrap();
        }
        let p = StoreProvider::new(s, "t");
        let mut texts: Vec<String> = (0..100).map(|i| format!("w{i}")).collect();
        let ok = embed_texts(&p, &texts).unwrap();
        assert_eq!(ok[73], [73.0]);
        texts[70] = "missing".into();
        let (idx, err) = embed_texts(&p, &texts).unwrap_err();
        assert_eq!(idx, 70);
        assert_eq!(err, EmbedError::KeyNotFound { key: "missing".into() });
    }

    fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f32>> {
        prop::collection::vec(-10.0f32..10.0, n)
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(
            (u, v) in (1usize..8).prop_flat_map(|n| (vec_strategy(n), vec_strategy(n))),
            a in 0.01f32..100.0, b in 0.01f32..100.0,
        ) {
            let Ok(c) = cosine_similarity(&u, &v) else { return Ok(()) };
            prop_assert!((-1.0..=1.0).contains(&c));
            prop_assert_eq!(c, cosine_similarity(&v, &u).unwrap());
            let su: Vec<f32> = u.iter().map(|x| x * a).collect();
            let sv: Vec<f32> = v.iter().map(|x| x * b).collect();
            if let Ok(s) = cosine_similarity(&su, &sv) {
                prop_assert!((s - c).abs() < 1e-6);
            }
            if u.iter().any(|&x| x != 0.0) {
                prop_assert!((cosine_similarity(&u, &u).unwrap() - 1.0).abs() < 1e-6);
            }
        }

        #[test]
        fn mean_pool_permutation_invariant(rows in prop::collection::vec(vec_strategy(3), 1..10)) {
            let mut rev = rows.clone();
            rev.reverse();
            let a = mean_pool(&rows).unwrap();
            let b = mean_pool(&rev).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }

        #[test]
        fn store_rewrite_is_byte_identical(
            keys in prop::collection::btree_set("[a-z ]{0,6}", 0..6),
            dim in 1usize..5,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = EmbeddingStore::new(dim).unwrap();
            for k in keys {
                s.insert(k, (0..dim).map(|_| rng.random_range(-1e3f32..1e3)).collect()).unwrap();
            }
            let bytes = s.to_bytes();
            let back = EmbeddingStore::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
