//! Category sentence-embedding dictionaries.
//!
//! Each lexicon category is represented by the texts associated with it
//! (the lexicon's own words, or reference-corpus sentences containing them),
//! which are embedded and summarized as one centroid (their column-wise
//! mean) or as several k-means centroids.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{bounded_capacity, put_str, put_u32, ByteReader, DecodeError};
use crate::embedding::{embed_texts, mean_pool, EmbedError, EmbeddingProvider};
use crate::lexicon::{tokenize, Lexicon, Pattern, Term};

pub const SCDI_MAGIC: &str = "SCDI";
pub const SCDI_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("category {0:?} has no items to build a centroid from")]
    EmptyCategory(String),
    #[error("embedding item {item:?} of category {category:?} failed")]
    Embed {
        category: String,
        item: String,
        #[source]
        source: EmbedError,
    },
    #[error("number of centroids must be at least 1")]
    ZeroCentroids,
    #[error("invalid dictionary: {0}")]
    Invalid(String),
    #[error("invalid SCDI data: {0}")]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemMode {
    /// Items are the lexicon's own words.
    Word,
    /// Items are reference-corpus sentences that contain a category word.
    Reference,
}

/// Per-category texts to embed, deduplicated, in first-seen order.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoryItems {
    mode: ItemMode,
    categories: Arc<[String]>,
    items: Vec<Vec<String>>,
    /// Word-mode items; reference mode falls back to these for categories
    /// no corpus sentence matched.
    word_items: Option<Vec<Vec<String>>>,
    lexicon_hash: Option<String>,
}

fn dedup(items: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut seen = HashSet::new();
    items.into_iter().filter(|s| seen.insert(s.clone())).collect()
}

impl CategoryItems {
    /// Assembles items directly (e.g. from precomputed lists). Duplicates
    /// within a category are removed.
    pub fn from_parts(
        mode: ItemMode,
        categories: Vec<String>,
        items: Vec<Vec<String>>,
    ) -> Result<Self, DictionaryError> {
        if categories.is_empty() || categories.len() != items.len() {
            return Err(DictionaryError::Invalid(format!(
                "{} categories but {} item lists",
                categories.len(),
                items.len()
            )));
        }
        Ok(Self {
            mode,
            categories: categories.into(),
            items: items.into_iter().map(dedup).collect(),
            word_items: None,
            lexicon_hash: None,
        })
    }

    pub fn mode(&self) -> ItemMode {
        self.mode
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn items(&self, category: usize) -> &[String] {
        &self.items[category]
    }

    pub fn counts(&self) -> Vec<usize> {
        self.items.iter().map(Vec::len).collect()
    }
}

/// Renders each category's patterns as plain words: exact words verbatim,
/// phrases joined by spaces, and wildcard stems via [`render_stem`].
fn word_items_lenient(lex: &Lexicon) -> Vec<Vec<String>> {
    let exact_words: BTreeSet<&str> = (0..lex.len())
        .flat_map(|c| lex.patterns(c))
        .filter_map(|p| match p {
            Pattern::Word(Term::Exact(w)) => Some(w.as_str()),
            _ => None,
        })
        .collect();
    let render = |t: &Term| match t {
        Term::Exact(w) => w.clone(),
        Term::Prefix(stem) => render_stem(stem, &exact_words),
    };
    (0..lex.len())
        .map(|c| {
            dedup(lex.patterns(c).iter().map(|p| match p {
                Pattern::Word(t) => render(t),
                Pattern::Phrase(terms) => terms.iter().map(render).collect::<Vec<_>>().join(" "),
            }))
        })
        .collect()
}

/// A wildcard stem becomes the stem itself when the lexicon lists it as a
/// word, otherwise the shortest listed word it expands to (ties broken
/// lexicographically), otherwise the raw stem.
pub fn render_stem(stem: &str, exact_words: &BTreeSet<&str>) -> String {
    if exact_words.contains(stem) {
        return stem.to_string();
    }
    exact_words
        .range(stem..)
        .take_while(|w| w.starts_with(stem))
        .min_by_key(|w| (w.chars().count(), **w))
        .map_or_else(|| stem.to_string(), |w| w.to_string())
}

/// Word mode: each category's items are its lexicon words.
pub fn collect_word_items(lex: &Lexicon) -> Result<CategoryItems, DictionaryError> {
    let items = word_items_lenient(lex);
    if let Some(i) = items.iter().position(Vec::is_empty) {
        return Err(DictionaryError::EmptyCategory(lex.categories()[i].clone()));
    }
    Ok(CategoryItems {
        mode: ItemMode::Word,
        categories: lex.categories().to_vec().into(),
        items,
        word_items: None,
        lexicon_hash: Some(lex.content_hash()),
    })
}

/// Reference mode: a corpus sentence belongs to every category for which
/// at least one of its tokens (or one of the category's phrases) matches.
/// Categories may end up empty; [`build_dictionary`] then falls back to the
/// category's words.
pub fn collect_reference_items<S: AsRef<str> + Sync>(lex: &Lexicon, corpus: &[S]) -> CategoryItems {
    let per_sentence: Vec<Vec<u32>> = corpus
        .par_iter()
        .map(|s| lex.match_sentence(tokenize(s.as_ref()).tokens()).counts)
        .collect();
    let mut items = vec![Vec::new(); lex.len()];
    let mut seen: Vec<HashSet<&str>> = vec![HashSet::new(); lex.len()];
    for (sentence, counts) in corpus.iter().zip(&per_sentence) {
        let s = sentence.as_ref();
        for (cat, &c) in counts.iter().enumerate() {
            if c > 0 && seen[cat].insert(s) {
                items[cat].push(s.to_string());
            }
        }
    }
    CategoryItems {
        mode: ItemMode::Reference,
        categories: lex.categories().to_vec().into(),
        items,
        word_items: Some(word_items_lenient(lex)),
        lexicon_hash: Some(lex.content_hash()),
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KMeansError {
    #[error("number of clusters must be at least 1")]
    ZeroClusters,
    #[error("no points to cluster")]
    NoPoints,
    #[error("point {row} has length {got}, expected {expected}")]
    Ragged { row: usize, expected: usize, got: usize },
}

#[derive(Clone, Debug)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iterations: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iterations: 100,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KMeansResult {
    /// Centers of the non-empty clusters, in cluster order.
    pub centroids: Vec<Vec<f32>>,
    /// Cluster index per point, into `centroids`.
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squared distances, in f64 against unrounded centers.
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// SSE after each assignment step of the winning restart.
    pub sse_history: Vec<f64>,
    pub restart: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let m = points.len();
    let mut centers = vec![points[rng.random_range(0..m)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave target just above the final sum
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap_or(0))
        } else {
            rng.random_range(0..m)
        };
        let c = points[pick].clone();
        for (p, d) in points.iter().zip(d2.iter_mut()) {
            *d = d.min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    centers
}

struct Run {
    centers: Vec<Vec<f64>>,
    assignments: Vec<usize>,
    sse: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>, max_iterations: usize) -> Run {
    let m = points.len();
    let n = points[0].len();
    let k = centers.len();
    let mut assignments = vec![usize::MAX; m];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let step: Vec<(usize, f64)> = points.iter().map(|p| nearest(p, &centers)).collect();
        history.push(step.iter().map(|(_, d)| d).sum());
        let next: Vec<usize> = step.iter().map(|(j, _)| *j).collect();
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;

        let mut sums = vec![vec![0.0f64; n]; k];
        let mut counts = vec![0usize; k];
        for (p, &j) in points.iter().zip(&assignments) {
            counts[j] += 1;
            for (s, x) in sums[j].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut empty = Vec::new();
        for j in 0..k {
            if counts[j] == 0 {
                empty.push(j);
            } else {
                let c = counts[j] as f64;
                centers[j] = sums[j].iter().map(|s| s / c).collect();
            }
        }
        if !empty.is_empty() {
            // reseed each empty cluster at the point farthest from its center
            let mut dist: Vec<f64> = points
                .iter()
                .zip(&assignments)
                .map(|(p, &j)| sq_dist(p, &centers[j]))
                .collect();
            for j in empty {
                let far = dist
                    .iter()
                    .enumerate()
                    .fold(0, |best, (i, &d)| if d > dist[best] { i } else { best });
                centers[j] = points[far].clone();
                dist[far] = 0.0;
            }
        }
    }
    let (assignments, sse) = if converged {
        (assignments, *history.last().expect("at least one step"))
    } else {
        let step: Vec<(usize, f64)> = points.iter().map(|p| nearest(p, &centers)).collect();
        (step.iter().map(|s| s.0).collect(), step.iter().map(|s| s.1).sum())
    };
    Run {
        centers,
        assignments,
        sse,
        iterations,
        converged,
        history,
    }
}

/// Seeded k-means: k-means++ initialization, Lloyd iterations until the
/// assignment stops changing, best of several restarts by SSE. With no more
/// points than clusters the points themselves are returned.
pub fn kmeans<R: AsRef<[f32]>>(points: &[R], clusters: usize, seed: u64) -> Result<KMeansResult, KMeansError> {
    kmeans_with(points, clusters, seed, &KMeansConfig::default())
}

pub fn kmeans_with<R: AsRef<[f32]>>(
    points: &[R],
    clusters: usize,
    seed: u64,
    config: &KMeansConfig,
) -> Result<KMeansResult, KMeansError> {
    if clusters == 0 {
        return Err(KMeansError::ZeroClusters);
    }
    let n = points.first().ok_or(KMeansError::NoPoints)?.as_ref().len();
    let mut pts = Vec::with_capacity(points.len());
    for (row, p) in points.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != n {
            return Err(KMeansError::Ragged {
                row,
                expected: n,
                got: p.len(),
            });
        }
        pts.push(p.iter().map(|&x| x as f64).collect::<Vec<f64>>());
    }
    let m = pts.len();
    if m <= clusters {
        return Ok(KMeansResult {
            centroids: points.iter().map(|p| p.as_ref().to_vec()).collect(),
            assignments: (0..m).collect(),
            sse: 0.0,
            iterations: 0,
            converged: true,
            sse_history: vec![0.0],
            restart: 0,
        });
    }

    let mut best: Option<(usize, Run)> = None;
    for restart in 0..config.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let init = plus_plus_init(&pts, clusters, &mut rng);
        let run = lloyd(&pts, init, config.max_iterations.max(1));
        if best.as_ref().is_none_or(|(_, b)| run.sse < b.sse) {
            best = Some((restart, run));
        }
    }
    let (restart, run) = best.expect("at least one restart");

    // drop clusters that ended up empty and renumber the assignments
    let mut remap = vec![usize::MAX; run.centers.len()];
    let mut centroids = Vec::new();
    for &j in &run.assignments {
        if remap[j] == usize::MAX {
            remap[j] = 0;
        }
    }
    for (j, c) in run.centers.iter().enumerate() {
        if remap[j] != usize::MAX {
            remap[j] = centroids.len();
            centroids.push(c.iter().map(|&x| x as f32).collect());
        }
    }
    Ok(KMeansResult {
        centroids,
        assignments: run.assignments.iter().map(|&j| remap[j]).collect(),
        sse: run.sse,
        iterations: run.iterations,
        converged: run.converged,
        sse_history: run.history,
        restart,
    })
}

/// Build metadata stored alongside the centroids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub mode: ItemMode,
    pub lexicon_hash: Option<String>,
    pub provider_id: String,
    pub seed: u64,
    pub centroids_requested: u32,
    pub deduplicated: bool,
    pub items_per_category: Vec<usize>,
    /// Reference-mode categories that fell back to word items.
    pub fallback_categories: Vec<String>,
    /// Hash of the settings that produced the dictionary, when recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoryDictionary {
    dim: usize,
    categories: Arc<[String]>,
    centroids: Vec<Vec<Vec<f32>>>,
    provenance: Provenance,
}

impl CategoryDictionary {
    pub fn new(
        dim: usize,
        categories: Vec<String>,
        centroids: Vec<Vec<Vec<f32>>>,
        provenance: Provenance,
    ) -> Result<Self, DictionaryError> {
        let invalid = |m: String| Err(DictionaryError::Invalid(m));
        if dim == 0 {
            return invalid("dimension must be positive".into());
        }
        if categories.is_empty() || categories.len() != centroids.len() {
            return invalid(format!(
                "{} categories but {} centroid sets",
                categories.len(),
                centroids.len()
            ));
        }
        let mut seen = HashSet::new();
        for (name, cs) in categories.iter().zip(&centroids) {
            if name.is_empty() || !seen.insert(name.as_str()) {
                return invalid(format!("empty or duplicate category name {name:?}"));
            }
            if cs.is_empty() || cs.len() > provenance.centroids_requested as usize {
                return invalid(format!(
                    "category {name:?} has {} centroids, allowed 1..={}",
                    cs.len(),
                    provenance.centroids_requested
                ));
            }
            for c in cs {
                if c.len() != dim || c.iter().any(|x| !x.is_finite()) {
                    return invalid(format!("category {name:?} has a malformed centroid"));
                }
            }
        }
        Ok(Self {
            dim,
            categories: categories.into(),
            centroids,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub(crate) fn categories_arc(&self) -> Arc<[String]> {
        Arc::clone(&self.categories)
    }

    pub fn centroids(&self, category: usize) -> &[Vec<f32>] {
        &self.centroids[category]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn with_config_hash(mut self, hash: impl Into<String>) -> Self {
        self.provenance.config_hash = Some(hash.into());
        self
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SCDI_MAGIC.as_bytes());
        put_u32(&mut out, SCDI_VERSION);
        put_u32(&mut out, self.dim as u32);
        put_u32(&mut out, self.categories.len() as u32);
        for (name, cs) in self.categories.iter().zip(&self.centroids) {
            put_str(&mut out, name);
            put_u32(&mut out, cs.len() as u32);
            for c in cs {
                for x in c {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        let json = serde_json::to_string(&self.provenance).expect("provenance serializes");
        put_str(&mut out, &json);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let invalid = |offset, message: String| DecodeError::Invalid { offset, message };
        let mut r = ByteReader::new(bytes);
        r.magic(SCDI_MAGIC)?;
        let at = r.offset();
        let version = r.u32()?;
        if version != SCDI_VERSION {
            return Err(DecodeError::UnsupportedVersion { version, offset: at });
        }
        let at = r.offset();
        let dim = r.u32()? as usize;
        if dim == 0 {
            return Err(invalid(at, "dimension must be positive".into()));
        }
        let at = r.offset();
        let count = r.u32()?;
        if count == 0 {
            return Err(invalid(at, "dictionary has no categories".into()));
        }
        let cap = bounded_capacity(count as u64, r.remaining(), 8 + 4 * dim);
        let mut names = Vec::with_capacity(cap);
        let mut centroids = Vec::with_capacity(cap);
        let mut count_offsets = Vec::with_capacity(cap);
        let mut seen = HashSet::new();
        for _ in 0..count {
            let at = r.offset();
            let name = r.string()?;
            if name.is_empty() || !seen.insert(name.to_string()) {
                return Err(invalid(at, format!("empty or duplicate category name {name:?}")));
            }
            let at = r.offset();
            let p = r.u32()? as usize;
            if p == 0 {
                return Err(invalid(at, format!("category {name:?} has no centroids")));
            }
            count_offsets.push(at);
            let mut cs = Vec::with_capacity(bounded_capacity(p as u64, r.remaining(), 4 * dim));
            for _ in 0..p {
                let mut c = Vec::with_capacity(dim.min(r.remaining() / 4));
                for _ in 0..dim {
                    c.push(r.finite_f32()?);
                }
                cs.push(c);
            }
            names.push(name.to_string());
            centroids.push(cs);
        }
        let at = r.offset();
        let json = r.string()?;
        let provenance: Provenance =
            serde_json::from_str(json).map_err(|e| invalid(at, format!("bad provenance JSON: {e}")))?;
        r.finish()?;
        for (cs, &off) in centroids.iter().zip(&count_offsets) {
            if cs.len() > provenance.centroids_requested as usize {
                return Err(invalid(
                    off,
                    format!(
                        "{} centroids exceed the {} requested",
                        cs.len(),
                        provenance.centroids_requested
                    ),
                ));
            }
        }
        Ok(Self {
            dim,
            categories: names.into(),
            centroids,
            provenance,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DictionaryError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DictionaryError> {
        Ok(Self::from_bytes(&std::fs::read(path)?)?)
    }
}

/// Seed for one category's clustering, independent of build order.
fn category_seed(seed: u64, category: usize) -> u64 {
    // splitmix64 finalizer over (seed, index)
    let mut z = seed ^ (category as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Embeds every category's items and summarizes them as up to `centroids`
/// vectors: the column-wise mean when `centroids == 1`, k-means centers
/// otherwise. Identical texts shared by several categories are embedded once.
pub fn build_dictionary(
    items: &CategoryItems,
    provider: &dyn EmbeddingProvider,
    centroids: usize,
    seed: u64,
) -> Result<CategoryDictionary, DictionaryError> {
    if centroids == 0 {
        return Err(DictionaryError::ZeroCentroids);
    }
    let mut fallbacks = Vec::new();
    let mut effective: Vec<&[String]> = Vec::with_capacity(items.items.len());
    for (i, list) in items.items.iter().enumerate() {
        let name = &items.categories[i];
        if !list.is_empty() {
            effective.push(list);
            continue;
        }
        match (&items.mode, &items.word_items) {
            (ItemMode::Reference, Some(words)) if !words[i].is_empty() => {
                log::warn!("category {name:?} matched no reference sentences; using its words");
                fallbacks.push(name.clone());
                effective.push(&words[i]);
            }
            _ => return Err(DictionaryError::EmptyCategory(name.clone())),
        }
    }

    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut unique: Vec<&str> = Vec::new();
    let mut owner: Vec<usize> = Vec::new();
    for (cat, list) in effective.iter().enumerate() {
        for t in list.iter() {
            index.entry(t.as_str()).or_insert_with(|| {
                unique.push(t);
                owner.push(cat);
                unique.len() - 1
            });
        }
    }
    let vectors = embed_texts(provider, &unique).map_err(|(i, source)| DictionaryError::Embed {
        category: items.categories[owner[i]].clone(),
        item: unique[i].to_string(),
        source,
    })?;

    let sets: Vec<Vec<Vec<f32>>> = effective
        .par_iter()
        .enumerate()
        .map(|(cat, list)| {
            let rows: Vec<&[f32]> = list.iter().map(|t| vectors[index[t.as_str()]].as_slice()).collect();
            if centroids == 1 {
                vec![mean_pool(&rows).expect("non-empty rows of provider dimension")]
            } else {
                kmeans(&rows, centroids, category_seed(seed, cat))
                    .expect("non-empty rows of provider dimension")
                    .centroids
            }
        })
        .collect();

    let provenance = Provenance {
        mode: items.mode,
        lexicon_hash: items.lexicon_hash.clone(),
        provider_id: provider.id(),
        seed,
        centroids_requested: centroids as u32,
        deduplicated: true,
        items_per_category: effective.iter().map(|l| l.len()).collect(),
        fallback_categories: fallbacks,
        config_hash: None,
    };
    CategoryDictionary::new(provider.dim(), items.categories.to_vec(), sets, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{EmbeddingStore, StoreProvider};
    use crate::lexicon::{parse_category_tsv, parse_liwc_dic};

    fn toy() -> Lexicon {
        parse_liwc_dic("%\n1\tposemo\n2\tnegemo\n%\nhappy\t1\ngood*\t1\nsad\t2\n".as_bytes()).unwrap()
    }

    fn store(entries: &[(&str, &[f32])]) -> StoreProvider {
        let mut s = EmbeddingStore::new(entries[0].1.len()).unwrap();
        for (k, v) in entries {
            s.insert(*k, v.to_vec()).unwrap();
        }
        StoreProvider::new(s, "test")
    }

    #[test]
    fn word_items_strip_wildcards() {
        let items = collect_word_items(&toy()).unwrap();
        assert_eq!(items.items(0), ["happy", "good"]);
        assert_eq!(items.items(1), ["sad"]);
    }

    #[test]
    fn stem_rendering_rule() {
        let lex = parse_category_tsv("a\thapp*\tcheer*\tcheer\nb\thappiness\thappy\tkind of*\n".as_bytes()).unwrap();
        let items = collect_word_items(&lex).unwrap();
        // happ* -> shortest listed expansion; cheer* -> listed stem
        assert_eq!(items.items(0), ["happy", "cheer"]);
        // phrase with a wildcard term keeps the raw stem when nothing expands it
        assert_eq!(items.items(1), ["happiness", "happy", "kind of"]);
    }

    #[test]
    fn empty_category_rejected_in_word_mode() {
        let lex = parse_liwc_dic("%\n1\ta\n2\tb\n%\nx\t1\n".as_bytes()).unwrap();
        assert!(matches!(collect_word_items(&lex), Err(DictionaryError::EmptyCategory(c)) if c == "b"));
    }

    #[test]
    fn reference_items() {
        let lex = parse_liwc_dic("%\n1\tposemo\n2\tnegemo\n%\nhapp*\t1\ngood\t1\nsad\t2\n".as_bytes()).unwrap();
        let items = collect_reference_items(&lex, &["i am happy", "it is sad", "fine day"]);
        assert_eq!(items.items(0), ["i am happy"]);
        assert_eq!(items.items(1), ["it is sad"]);

        let none = collect_reference_items(&lex, &["nothing here"]);
        assert_eq!(none.counts(), [0, 0]);

        let both = collect_reference_items(&lex, &["happy but sad", "happy but sad"]);
        assert_eq!(both.items(0), ["happy but sad"]);
        assert_eq!(both.items(1), ["happy but sad"]);
    }

    #[test]
    fn kmeans_two_clusters() {
        let pts = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![10.0, 10.0], vec![10.0, 11.0]];
        let r = kmeans(&pts, 2, 1).unwrap();
        let mut cs = r.centroids.clone();
        cs.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert_eq!(cs, [vec![0.0, 0.5], vec![10.0, 10.5]]);
        assert!((r.sse - 1.0).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn kmeans_single_cluster_is_mean() {
        let pts = vec![vec![1.0, 2.0], vec![3.0, -2.0], vec![5.0, 3.0]];
        let r = kmeans(&pts, 1, 0).unwrap();
        assert_eq!(r.centroids, [vec![3.0, 1.0]]);
    }

    #[test]
    fn kmeans_few_points_returned_as_is() {
        let pts = vec![vec![1.0f32], vec![4.0]];
        assert_eq!(kmeans(&pts, 5, 0).unwrap().centroids, pts);
        assert_eq!(kmeans(&pts, 0, 0).unwrap_err(), KMeansError::ZeroClusters);
        assert_eq!(kmeans::<Vec<f32>>(&[], 2, 0).unwrap_err(), KMeansError::NoPoints);
    }

    #[test]
    fn kmeans_identical_points() {
        let pts = vec![vec![2.0f32, 2.0]; 6];
        let r = kmeans(&pts, 3, 9).unwrap();
        assert!(!r.centroids.is_empty() && r.centroids.len() <= 3);
        assert_eq!(r.sse, 0.0);
    }

    #[test]
    fn kmeans_sse_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let pts: Vec<Vec<f32>> = (0..40)
                .map(|_| (0..3).map(|_| rng.random_range(-5.0f32..5.0)).collect())
                .collect();
            let r = kmeans(&pts, 4, rng.random()).unwrap();
            assert!(
                r.sse_history.windows(2).all(|w| w[1] <= w[0] + 1e-9),
                "{:?}",
                r.sse_history
            );
            assert!(r.converged);
            // fixpoint: reassigning to the final centers changes nothing
            for (p, &a) in pts.iter().zip(&r.assignments) {
                let p64: Vec<f64> = p.iter().map(|&x| x as f64).collect();
                let cs: Vec<Vec<f64>> = r
                    .centroids
                    .iter()
                    .map(|c| c.iter().map(|&x| x as f64).collect())
                    .collect();
                let d = sq_dist(&p64, &cs[a]);
                assert!(cs.iter().all(|c| sq_dist(&p64, c) >= d - 1e-4));
            }
        }
    }

    #[test]
    fn kmeans_is_seed_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f32>> = (0..30).map(|_| vec![rng.random(), rng.random()]).collect();
        let a = kmeans(&pts, 3, 42).unwrap();
        let b = kmeans(&pts, 3, 42).unwrap();
        assert_eq!(a.centroids, b.centroids);
        assert_eq!(a.assignments, b.assignments);
    }

    #[test]
    fn build_single_centroid_means() {
        let items = CategoryItems::from_parts(
            ItemMode::Word,
            vec!["c".into(), "solo".into()],
            vec![vec!["w1".into(), "w2".into()], vec!["w3".into()]],
        )
        .unwrap();
        let p = store(&[("w1", &[0.0, 2.0]), ("w2", &[2.0, 0.0]), ("w3", &[0.3, -0.7])]);
        let d = build_dictionary(&items, &p, 1, 0).unwrap();
        assert_eq!(d.centroids(0), [vec![1.0, 1.0]]);
        assert_eq!(d.centroids(1), [vec![0.3, -0.7]]);
        assert_eq!(d.provenance().items_per_category, [2, 1]);
    }

    #[test]
    fn build_multi_centroid() {
        let items = CategoryItems::from_parts(
            ItemMode::Word,
            vec!["c".into()],
            vec![vec!["a".into(), "b".into(), "c".into(), "d".into()]],
        )
        .unwrap();
        let p = store(&[
            ("a", &[0.0, 0.0]),
            ("b", &[0.0, 1.0]),
            ("c", &[10.0, 10.0]),
            ("d", &[10.0, 11.0]),
        ]);
        let d = build_dictionary(&items, &p, 2, 5).unwrap();
        let mut cs = d.centroids(0).to_vec();
        cs.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert_eq!(cs, [vec![0.0, 0.5], vec![10.0, 10.5]]);
    }

    #[test]
    fn reference_fallback_and_provider_errors() {
        let lex = toy();
        let items = collect_reference_items(&lex, &["so happy"]);
        let p = store(&[("so happy", &[1.0, 0.0]), ("sad", &[0.0, 1.0])]);
        let d = build_dictionary(&items, &p, 1, 0).unwrap();
        assert_eq!(d.provenance().fallback_categories, ["negemo"]);
        assert_eq!(d.centroids(1), [vec![0.0, 1.0]]);

        let words = collect_word_items(&lex).unwrap();
        match build_dictionary(&words, &p, 1, 0) {
            Err(DictionaryError::Embed { category, item, .. }) => {
                assert_eq!((category.as_str(), item.as_str()), ("posemo", "happy"))
            }
            other => panic!("{other:?}"),
        }
    }

    fn mixed_dictionary() -> CategoryDictionary {
        let prov = Provenance {
            mode: ItemMode::Reference,
            lexicon_hash: Some("abc".into()),
            provider_id: "pseudo:1:2".into(),
            seed: 7,
            centroids_requested: 3,
            deduplicated: true,
            items_per_category: vec![9, 1],
            fallback_categories: vec!["b".into()],
            config_hash: None,
        };
        CategoryDictionary::new(
            2,
            vec!["a".into(), "b".into()],
            vec![
                vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.0, 1e-7]],
                vec![vec![3.0, 4.0]],
            ],
            prov,
        )
        .unwrap()
    }

    #[test]
    fn scdi_round_trip() {
        let d = mixed_dictionary();
        let bytes = d.to_bytes();
        let back = CategoryDictionary::from_bytes(&bytes).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn scdi_rejects_truncation_and_garbage() {
        let bytes = mixed_dictionary().to_bytes();
        for cut in [0, 3, 10, 20, bytes.len() - 1] {
            assert!(CategoryDictionary::from_bytes(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut extra = bytes.clone();
        extra.push(b'x');
        assert!(matches!(
            CategoryDictionary::from_bytes(&extra),
            Err(DecodeError::TrailingBytes { .. })
        ));
    }
}
