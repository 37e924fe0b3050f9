//! Agreement with human category ratings and word-sense separation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dictionary::CategoryDictionary;
use crate::embedding::{cosine_similarity_f64, EmbeddingProvider, SimilarityError};
use crate::representation::{encode_batch, EncodeError, Representation};
use crate::table::{read_delimited, TableError};

/// Sentences required per sense before a homonym is analysed.
pub const MIN_SENTENCES_PER_SENSE: usize = 5;
pub const KEYWORDS_PER_SENSE: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("inputs have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooShort(usize),
    #[error("input has zero variance")]
    ZeroVariance,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooShort(x.len()));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Lanczos approximation (g = 7, 9 terms), accurate to ~1e-15 for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub mean_difference: f64,
}

/// Paired two-sided t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(StatsError::TooShort(n));
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = mean(&diff);
    let var = diff.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let t = m / (var.sqrt() / (n as f64).sqrt());
    let df = (n - 1) as f64;
    Ok(TTest {
        t,
        df,
        p: t_two_sided_p(t, df),
        mean_difference: m,
    })
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("duplicate sentence id {0:?}")]
    DuplicateId(String),
    #[error("annotated sentence {0:?} has no representation")]
    MissingId(String),
    #[error("{ids} ids but {features} representations")]
    IdCount { ids: usize, features: usize },
    #[error("category order differs: representation has {features:?}, annotations have {annotations:?}")]
    CategoryOrder {
        features: Vec<String>,
        annotations: Vec<String>,
    },
    #[error("every sentence has a constant vector; no correlations to average")]
    AllExcluded,
    #[error("homonym {homonym:?}: {message}")]
    SenseData { homonym: String, message: String },
    #[error("homonym {homonym:?}, sense {sense:?}: {count} sentences, need at least {MIN_SENTENCES_PER_SENSE}")]
    TooFewSentences {
        homonym: String,
        sense: String,
        count: usize,
    },
    #[error("homonym {homonym:?}: opposing-sense similarity is zero, ratio undefined")]
    ZeroOpposing { homonym: String },
    #[error("homonym {homonym:?}")]
    Encode {
        homonym: String,
        #[source]
        source: EncodeError,
    },
    #[error("homonym {homonym:?}")]
    Similarity {
        homonym: String,
        #[source]
        source: SimilarityError,
    },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mean human ratings (0 to 2) per sentence and category.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationSet {
    pub categories: Vec<String>,
    pub ids: Vec<String>,
    pub scores: Vec<Vec<f64>>,
}

/// Reads an annotation table: the first column is the sentence id, every
/// other column a category.
pub fn parse_annotations<R: BufRead>(source: R) -> Result<AnnotationSet, AnalysisError> {
    let table = read_delimited(source)?;
    if table.header.len() < 2 {
        return Err(AnalysisError::Parse {
            line: 1,
            message: "need an id column and at least one category column".into(),
        });
    }
    let mut seen = HashSet::new();
    let mut ids = Vec::with_capacity(table.rows.len());
    let mut scores = Vec::with_capacity(table.rows.len());
    for (r, row) in table.rows.iter().enumerate() {
        let id = row[0].trim().to_string();
        if !seen.insert(id.clone()) {
            return Err(AnalysisError::DuplicateId(id));
        }
        let mut v = Vec::with_capacity(row.len() - 1);
        for c in 1..row.len() {
            let x = table.float(r, c)?;
            if !(0.0..=2.0).contains(&x) {
                return Err(AnalysisError::Parse {
                    line: table.row_lines[r],
                    message: format!("score {x} for {:?} outside [0, 2]", table.header[c]),
                });
            }
            v.push(x);
        }
        ids.push(id);
        scores.push(v);
    }
    Ok(AnnotationSet {
        categories: table.header[1..].to_vec(),
        ids,
        scores,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    /// (sentence id, r) for every sentence that was scored.
    pub per_sentence: Vec<(String, f64)>,
    pub mean_r: f64,
    /// Sentences skipped because one of the two vectors was constant.
    pub excluded: Vec<String>,
}

/// Per-sentence Pearson r between representation weights and human
/// ratings across categories, averaged over sentences.
pub fn human_agreement(
    ids: &[String],
    features: &[Representation],
    annotations: &AnnotationSet,
) -> Result<AgreementReport, AnalysisError> {
    if ids.len() != features.len() {
        return Err(AnalysisError::IdCount {
            ids: ids.len(),
            features: features.len(),
        });
    }
    let mut by_id = HashMap::with_capacity(ids.len());
    for (id, rep) in ids.iter().zip(features) {
        if rep.categories() != annotations.categories.as_slice() {
            return Err(AnalysisError::CategoryOrder {
                features: rep.categories().to_vec(),
                annotations: annotations.categories.clone(),
            });
        }
        if by_id.insert(id.as_str(), rep).is_some() {
            return Err(AnalysisError::DuplicateId(id.clone()));
        }
    }
    let mut per_sentence = Vec::new();
    let mut excluded = Vec::new();
    for (id, human) in annotations.ids.iter().zip(&annotations.scores) {
        let rep = by_id
            .get(id.as_str())
            .ok_or_else(|| AnalysisError::MissingId(id.clone()))?;
        match pearson(rep.weights(), human) {
            Ok(r) => per_sentence.push((id.clone(), r)),
            Err(StatsError::ZeroVariance) => excluded.push(id.clone()),
            Err(e) => return Err(e.into()),
        }
    }
    if per_sentence.is_empty() {
        return Err(AnalysisError::AllExcluded);
    }
    let mean_r = per_sentence.iter().map(|(_, r)| r).sum::<f64>() / per_sentence.len() as f64;
    Ok(AgreementReport {
        per_sentence,
        mean_r,
        excluded,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SenseSentence {
    pub sense: String,
    pub text: String,
}

/// One homonym with two senses, their keywords, and example sentences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SenseLabeledSentences {
    homonym: String,
    senses: [String; 2],
    keywords: [[String; KEYWORDS_PER_SENSE]; 2],
    sentences: Vec<SenseSentence>,
}

impl SenseLabeledSentences {
    /// Validates the retention rule and keyword constraints. `keywords`
    /// must name exactly two senses.
    pub fn new(
        homonym: impl Into<String>,
        keywords: BTreeMap<String, [String; KEYWORDS_PER_SENSE]>,
        sentences: Vec<SenseSentence>,
    ) -> Result<Self, AnalysisError> {
        let homonym = homonym.into();
        let bad = |message: String| AnalysisError::SenseData {
            homonym: homonym.clone(),
            message,
        };
        if keywords.len() != 2 {
            return Err(bad(format!("expected keywords for 2 senses, found {}", keywords.len())));
        }
        let folded = homonym.to_lowercase();
        for (sense, kws) in &keywords {
            if let Some(k) = kws.iter().find(|k| k.trim().to_lowercase() == folded) {
                return Err(bad(format!("sense {sense:?} keyword {k:?} repeats the homonym")));
            }
            if kws.iter().any(|k| k.trim().is_empty()) {
                return Err(bad(format!("sense {sense:?} has an empty keyword")));
            }
        }
        let mut it = keywords.into_iter();
        let (s0, k0) = it.next().expect("two senses");
        let (s1, k1) = it.next().expect("two senses");
        let senses = [s0, s1];
        if let Some(s) = sentences.iter().find(|s| !senses.contains(&s.sense)) {
            return Err(bad(format!("sentence labelled with unknown sense {:?}", s.sense)));
        }
        for sense in &senses {
            let count = sentences.iter().filter(|s| &s.sense == sense).count();
            if count < MIN_SENTENCES_PER_SENSE {
                return Err(AnalysisError::TooFewSentences {
                    homonym: homonym.clone(),
                    sense: sense.clone(),
                    count,
                });
            }
        }
        Ok(Self {
            homonym,
            senses,
            keywords: [k0, k1],
            sentences,
        })
    }

    pub fn homonym(&self) -> &str {
        &self.homonym
    }

    pub fn senses(&self) -> &[String; 2] {
        &self.senses
    }

    pub fn keywords(&self, sense: usize) -> &[String; KEYWORDS_PER_SENSE] {
        &self.keywords[sense]
    }

    pub fn sentences(&self) -> &[SenseSentence] {
        &self.sentences
    }
}

fn data_lines<R: BufRead>(source: R) -> impl Iterator<Item = Result<(usize, String), std::io::Error>> {
    source.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(e)),
        Ok(l) => {
            let l = if i == 0 {
                l.trim_start_matches('\u{feff}').to_string()
            } else {
                l
            };
            let l = l.trim_end_matches('\r').to_string();
            if l.trim().is_empty() || l.starts_with('#') {
                None
            } else {
                Some(Ok((i + 1, l)))
            }
        }
    })
}

/// Sense data rows: `homonym<TAB>sense<TAB>sentence`. Returns rows grouped
/// by homonym in first-appearance order.
pub fn parse_sense_sentences<R: BufRead>(source: R) -> Result<Vec<(String, Vec<SenseSentence>)>, AnalysisError> {
    let mut groups: Vec<(String, Vec<SenseSentence>)> = Vec::new();
    for item in data_lines(source) {
        let (line, text) = item?;
        let mut parts = text.splitn(3, '\t');
        let (Some(h), Some(s), Some(t)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(AnalysisError::Parse {
                line,
                message: "expected homonym, sense and sentence separated by tabs".into(),
            });
        };
        let (h, s, t) = (h.trim(), s.trim(), t.trim());
        if h.is_empty() || s.is_empty() || t.is_empty() {
            return Err(AnalysisError::Parse {
                line,
                message: "empty field".into(),
            });
        }
        let entry = SenseSentence {
            sense: s.to_string(),
            text: t.to_string(),
        };
        match groups.iter_mut().find(|(name, _)| name == h) {
            Some((_, v)) => v.push(entry),
            None => groups.push((h.to_string(), vec![entry])),
        }
    }
    Ok(groups)
}

/// Keyword rows: `homonym<TAB>sense<TAB>kw1<TAB>kw2<TAB>kw3`, or
/// `sense<TAB>kw1<TAB>kw2<TAB>kw3` for a row that applies to every homonym
/// without its own entry for that sense. The empty string keys the shared
/// rows.
pub type KeywordTable = BTreeMap<String, BTreeMap<String, [String; KEYWORDS_PER_SENSE]>>;

pub fn parse_sense_keywords<R: BufRead>(source: R) -> Result<KeywordTable, AnalysisError> {
    let mut table = KeywordTable::new();
    for item in data_lines(source) {
        let (line, text) = item?;
        let fields: Vec<&str> = text.split('\t').map(str::trim).collect();
        let (homonym, rest) = match fields.len() {
            5 => (fields[0], &fields[1..]),
            4 => ("", &fields[..]),
            n => {
                return Err(AnalysisError::Parse {
                    line,
                    message: format!("expected 4 or 5 tab-separated fields, found {n}"),
                })
            }
        };
        if rest.iter().any(|f| f.is_empty()) {
            return Err(AnalysisError::Parse {
                line,
                message: "empty field".into(),
            });
        }
        let kws = [rest[1].to_string(), rest[2].to_string(), rest[3].to_string()];
        let senses = table.entry(homonym.to_string()).or_default();
        if senses.insert(rest[0].to_string(), kws).is_some() {
            return Err(AnalysisError::Parse {
                line,
                message: format!("duplicate keywords for sense {:?}", rest[0]),
            });
        }
    }
    Ok(table)
}

/// Joins parsed sentences with their keywords and validates every homonym.
pub fn assemble_sense_data(
    sentences: Vec<(String, Vec<SenseSentence>)>,
    keywords: &KeywordTable,
) -> Result<Vec<SenseLabeledSentences>, AnalysisError> {
    let shared = keywords.get("");
    sentences
        .into_iter()
        .map(|(homonym, rows)| {
            let mut kw = keywords.get(&homonym).cloned().unwrap_or_default();
            // shared rows only fill senses the sentences use
            if let Some(shared) = shared {
                for r in &rows {
                    if let Some(k) = shared.get(&r.sense) {
                        kw.entry(r.sense.clone()).or_insert_with(|| k.clone());
                    }
                }
            }
            SenseLabeledSentences::new(homonym, kw, rows)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioMode {
    /// mean matching / mean opposing
    #[default]
    MeanOfSimilarities,
    /// mean over sentences of matching_i / opposing_i
    MeanOfRatios,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceSimilarity {
    pub sense: String,
    pub matching: f64,
    pub opposing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordSenseReport {
    pub homonym: String,
    pub n_sentences: usize,
    pub mean_matching: f64,
    pub mean_opposing: f64,
    pub ratio: f64,
    pub ratio_mode: RatioMode,
    /// Paired test of matching against opposing; absent when every
    /// sentence has the same difference.
    pub t_test: Option<TTest>,
    pub sentences: Vec<SentenceSimilarity>,
}

/// Matching / opposing ratio under the chosen definition.
pub fn similarity_ratio(matching: &[f64], opposing: &[f64], mode: RatioMode) -> Option<f64> {
    match mode {
        RatioMode::MeanOfSimilarities => {
            let o = mean(opposing);
            (o != 0.0).then(|| mean(matching) / o)
        }
        RatioMode::MeanOfRatios => {
            if opposing.contains(&0.0) {
                return None;
            }
            Some(mean(
                &matching.iter().zip(opposing).map(|(m, o)| m / o).collect::<Vec<_>>(),
            ))
        }
    }
}

/// Compares each sentence's representation with the keyword
/// representations of its own sense and of the other sense.
pub fn word_sense_eval(
    dict: &CategoryDictionary,
    provider: &dyn EmbeddingProvider,
    data: &SenseLabeledSentences,
    mode: RatioMode,
) -> Result<WordSenseReport, AnalysisError> {
    let homonym = data.homonym().to_string();
    let mut texts: Vec<&str> = data.keywords.iter().flatten().map(String::as_str).collect();
    texts.extend(data.sentences.iter().map(|s| s.text.as_str()));
    let reps = encode_batch(dict, &texts, provider).map_err(|source| AnalysisError::Encode {
        homonym: homonym.clone(),
        source,
    })?;
    let (kw_reps, sent_reps) = reps.split_at(2 * KEYWORDS_PER_SENSE);
    let similarity = |rep: &Representation, sense: usize| -> Result<f64, AnalysisError> {
        let kws = &kw_reps[sense * KEYWORDS_PER_SENSE..(sense + 1) * KEYWORDS_PER_SENSE];
        let mut total = 0.0;
        for k in kws {
            total += cosine_similarity_f64(rep.weights(), k.weights()).map_err(|source| AnalysisError::Similarity {
                homonym: homonym.clone(),
                source,
            })?;
        }
        Ok(total / KEYWORDS_PER_SENSE as f64)
    };
    let mut sentences = Vec::with_capacity(sent_reps.len());
    for (s, rep) in data.sentences.iter().zip(sent_reps) {
        let own = usize::from(s.sense != data.senses[0]);
        sentences.push(SentenceSimilarity {
            sense: s.sense.clone(),
            matching: similarity(rep, own)?,
            opposing: similarity(rep, 1 - own)?,
        });
    }
    let matching: Vec<f64> = sentences.iter().map(|s| s.matching).collect();
    let opposing: Vec<f64> = sentences.iter().map(|s| s.opposing).collect();
    let ratio = similarity_ratio(&matching, &opposing, mode).ok_or_else(|| AnalysisError::ZeroOpposing {
        homonym: homonym.clone(),
    })?;
    let t_test = match paired_t_test(&matching, &opposing) {
        Ok(t) => Some(t),
        Err(StatsError::ZeroVariance) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(WordSenseReport {
        homonym,
        n_sentences: sentences.len(),
        mean_matching: mean(&matching),
        mean_opposing: mean(&opposing),
        ratio,
        ratio_mode: mode,
        t_test,
        sentences,
    })
}
