//! Word-to-category lexicons: parsing, token normalization, pattern matching,
//! and the bag-of-categories encoding.
//!
//! Two on-disk layouts are supported. The `%`-delimited `.dic` layout:
//!
//! ```text
//! %
//! 1	posemo
//! 2	negemo
//! %
//! happ*	1
//! good	1
//! sad	2
//! ```
//!
//! and a tab-separated layout with one category per line
//! (`name<TAB>word<TAB>word...`). A pattern ending in `*` matches any token
//! starting with the stem; a pattern containing spaces is a phrase matched
//! against consecutive tokens.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::BufRead;
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::representation::{Method, Representation};

const LIWC_TOPICAL_KEEP: &str = include_str!("../data/liwc2015_topical.keep");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate category name {0:?}")]
    DuplicateCategory(String),
    #[error("invalid category name {0:?}")]
    InvalidName(String),
    #[error("lexicon has no categories")]
    NoCategories,
    #[error("unknown categories: {}", .0.join(", "))]
    UnknownCategories(Vec<String>),
    #[error("invalid pattern {pattern:?}: {reason}")]
    InvalidPattern { pattern: String, reason: &'static str },
    #[error("cannot normalize counts for an empty sentence")]
    EmptySentence,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> LexiconError {
    LexiconError::Parse {
        line,
        message: message.into(),
    }
}

/// One element of a pattern: a whole token, or a stem that matches any token
/// it prefixes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Exact(String),
    Prefix(String),
}

impl Term {
    fn parse(raw: &str) -> Result<Self, &'static str> {
        match raw.strip_suffix('*') {
            Some(stem) => {
                if stem.is_empty() {
                    Err("empty wildcard stem")
                } else if stem.contains('*') {
                    Err("wildcard allowed only at the end")
                } else {
                    Ok(Term::Prefix(stem.to_string()))
                }
            }
            None if raw.contains('*') => Err("wildcard allowed only at the end"),
            None => Ok(Term::Exact(raw.to_string())),
        }
    }

    pub fn matches(&self, token: &str) -> bool {
        match self {
            Term::Exact(w) => w == token,
            Term::Prefix(stem) => token.starts_with(stem.as_str()),
        }
    }

    /// The literal text: the word itself, or the stem without its wildcard.
    pub fn text(&self) -> &str {
        match self {
            Term::Exact(w) | Term::Prefix(w) => w,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Exact(w) => f.write_str(w),
            Term::Prefix(s) => write!(f, "{s}*"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Pattern {
    Word(Term),
    /// Two or more terms matched against consecutive tokens.
    Phrase(Vec<Term>),
}

impl Pattern {
    /// Parses a pattern as written in a lexicon file. The text is normalized
    /// (NFC, lowercase) and split on whitespace.
    pub fn parse(raw: &str) -> Result<Self, LexiconError> {
        let norm = normalize_text(raw);
        let parts: Vec<&str> = norm.split_whitespace().collect();
        let invalid = |reason| LexiconError::InvalidPattern {
            pattern: raw.to_string(),
            reason,
        };
        match parts.len() {
            0 => Err(invalid("empty pattern")),
            1 => Term::parse(parts[0]).map(Pattern::Word).map_err(invalid),
            _ => parts
                .iter()
                .map(|p| Term::parse(p))
                .collect::<Result<Vec<_>, _>>()
                .map(Pattern::Phrase)
                .map_err(invalid),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Word(t) => t.fmt(f),
            Pattern::Phrase(terms) => {
                for (i, t) in terms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    t.fmt(f)?;
                }
                Ok(())
            }
        }
    }
}

/// Normalized tokens of one sentence.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

/// NFC, lowercase, then NFC again (lowercasing can produce decomposed text).
pub fn normalize_text(text: &str) -> String {
    let lowered = text.nfc().collect::<String>().to_lowercase();
    lowered.nfc().collect()
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

fn is_joiner(c: char) -> bool {
    c == '\'' || c == '-'
}

/// Splits text into lowercase tokens. Whitespace and punctuation separate
/// tokens, except a single apostrophe or hyphen sitting between two word
/// characters, which stays inside the token (`it's`, `well-known`).
pub fn tokenize(text: &str) -> TokenSequence {
    let norm = normalize_text(text);
    let chars: Vec<char> = norm.chars().collect();
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let joins = is_joiner(c) && !cur.is_empty() && chars.get(i + 1).copied().is_some_and(is_word_char);
        if is_word_char(c) || joins {
            cur.push(c);
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    TokenSequence(tokens)
}

/// Per-sentence matching result shared by the encoders.
#[derive(Debug, Clone)]
pub(crate) struct SentenceMatches {
    pub counts: Vec<u32>,
    /// Whether each token matched some single-token pattern or was consumed
    /// by a phrase in any category.
    pub matched: Vec<bool>,
}

/// An immutable lexicon. Category order defines the output dimension order
/// of every encoding built from it.
#[derive(Clone, Debug)]
pub struct Lexicon {
    categories: Arc<[String]>,
    patterns: Vec<Vec<Pattern>>,
    exact: HashMap<String, Vec<usize>>,
    prefixes: HashMap<String, Vec<usize>>,
    // (category, phrases sorted longest first)
    phrases: Vec<(usize, Vec<Vec<Term>>)>,
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.categories == other.categories && self.patterns == other.patterns
    }
}

impl Lexicon {
    /// Builds a lexicon from category names and their patterns. Duplicate
    /// patterns within a category are dropped, first occurrence wins.
    pub fn new(categories: Vec<String>, patterns: Vec<Vec<Pattern>>) -> Result<Self, LexiconError> {
        if categories.is_empty() {
            return Err(LexiconError::NoCategories);
        }
        assert_eq!(categories.len(), patterns.len());
        let mut seen = HashSet::new();
        for name in &categories {
            validate_name(name)?;
            if !seen.insert(name.as_str()) {
                return Err(LexiconError::DuplicateCategory(name.clone()));
            }
        }

        let mut deduped = Vec::with_capacity(patterns.len());
        let mut exact: HashMap<String, Vec<usize>> = HashMap::new();
        let mut prefixes: HashMap<String, Vec<usize>> = HashMap::new();
        let mut phrases = Vec::new();
        for (cat, pats) in patterns.into_iter().enumerate() {
            let mut seen = HashSet::new();
            let pats: Vec<Pattern> = pats.into_iter().filter(|p| seen.insert(p.clone())).collect();
            let mut cat_phrases = Vec::new();
            for p in &pats {
                match p {
                    Pattern::Word(Term::Exact(w)) => exact.entry(w.clone()).or_default().push(cat),
                    Pattern::Word(Term::Prefix(s)) => prefixes.entry(s.clone()).or_default().push(cat),
                    Pattern::Phrase(terms) => cat_phrases.push(terms.clone()),
                }
            }
            if !cat_phrases.is_empty() {
                // stable sort keeps file order among equal lengths
                cat_phrases.sort_by_key(|t| std::cmp::Reverse(t.len()));
                phrases.push((cat, cat_phrases));
            }
            deduped.push(pats);
        }
        Ok(Self {
            categories: categories.into(),
            patterns: deduped,
            exact,
            prefixes,
            phrases,
        })
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

    pub fn patterns(&self, category: usize) -> &[Pattern] {
        &self.patterns[category]
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == name)
    }

    pub fn has_phrases(&self) -> bool {
        !self.phrases.is_empty()
    }

    /// Categories whose single-token patterns match `token`.
    pub fn match_word(&self, token: &str) -> BTreeSet<usize> {
        let mut out = Vec::new();
        self.match_into(token, &mut out);
        out.into_iter().collect()
    }

    fn match_into(&self, token: &str, out: &mut Vec<usize>) {
        out.clear();
        if let Some(cats) = self.exact.get(token) {
            out.extend_from_slice(cats);
        }
        if !self.prefixes.is_empty() {
            for (i, c) in token.char_indices() {
                let end = i + c.len_utf8();
                if let Some(cats) = self.prefixes.get(&token[..end]) {
                    out.extend_from_slice(cats);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
    }

    /// Counts matches per category. Phrases are matched first, longest
    /// first and left to right; a token consumed by a phrase of a category
    /// does not match that category again as a single token.
    pub(crate) fn match_sentence(&self, tokens: &[String]) -> SentenceMatches {
        let n = tokens.len();
        let mut counts = vec![0u32; self.len()];
        let mut matched = vec![false; n];
        let mut single: Vec<Vec<usize>> = Vec::with_capacity(n);
        let mut buf = Vec::new();
        for (t, tok) in tokens.iter().enumerate() {
            self.match_into(tok, &mut buf);
            matched[t] = !buf.is_empty();
            single.push(buf.clone());
        }

        let mut phrase_cat = vec![false; self.len()];
        let mut used = vec![false; n];
        for (cat, cat_phrases) in &self.phrases {
            phrase_cat[*cat] = true;
            used.iter_mut().for_each(|u| *u = false);
            for terms in cat_phrases {
                let len = terms.len();
                let mut p = 0;
                while p + len <= n {
                    let hit = (p..p + len).all(|j| !used[j])
                        && terms.iter().zip(&tokens[p..p + len]).all(|(t, tok)| t.matches(tok));
                    if hit {
                        counts[*cat] += 1;
                        for j in p..p + len {
                            used[j] = true;
                            matched[j] = true;
                        }
                        p += len;
                    } else {
                        p += 1;
                    }
                }
            }
            for (t, cats) in single.iter().enumerate() {
                if !used[t] && cats.binary_search(cat).is_ok() {
                    counts[*cat] += 1;
                }
            }
        }
        for cats in &single {
            for &c in cats {
                if !phrase_cat[c] {
                    counts[c] += 1;
                }
            }
        }
        SentenceMatches { counts, matched }
    }

    /// Keeps only the named categories, in their original relative order.
    pub fn filter_categories<S: AsRef<str>>(&self, keep: &[S]) -> Result<Lexicon, LexiconError> {
        let keep_set: HashSet<&str> = keep.iter().map(|s| s.as_ref()).collect();
        let mut unknown: Vec<String> = keep_set
            .iter()
            .filter(|k| self.category_index(k).is_none())
            .map(|k| k.to_string())
            .collect();
        if !unknown.is_empty() {
            unknown.sort();
            return Err(LexiconError::UnknownCategories(unknown));
        }
        let (names, pats): (Vec<_>, Vec<_>) = self
            .categories
            .iter()
            .zip(&self.patterns)
            .filter(|(name, _)| keep_set.contains(name.as_str()))
            .map(|(n, p)| (n.clone(), p.clone()))
            .unzip();
        Lexicon::new(names, pats)
    }

    /// Serializes to the `.dic` layout. Category IDs are assigned 1..=d in
    /// category order, and each (pattern, category) pair gets its own line so
    /// that re-parsing restores per-category pattern order exactly.
    pub fn to_dic(&self) -> String {
        let mut out = String::from("%\n");
        for (i, name) in self.categories.iter().enumerate() {
            out.push_str(&format!("{}\t{}\n", i + 1, name));
        }
        out.push_str("%\n");
        for (i, pats) in self.patterns.iter().enumerate() {
            for p in pats {
                out.push_str(&format!("{}\t{}\n", p, i + 1));
            }
        }
        out
    }

    /// Serializes to the tab-separated layout. Categories with no patterns
    /// cannot be represented there and are written as a bare name.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (name, pats) in self.categories.iter().zip(&self.patterns) {
            out.push_str(name);
            for p in pats {
                out.push('\t');
                out.push_str(&p.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// SHA-256 (hex) of the canonical `.dic` serialization.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_dic().as_bytes()))
    }
}

fn validate_name(name: &str) -> Result<(), LexiconError> {
    if name.is_empty() || name.trim() != name || name.contains(['\t', '\n', '\r']) {
        return Err(LexiconError::InvalidName(name.to_string()));
    }
    Ok(())
}

/// Parses the `%`-delimited `.dic` layout. Categories are ordered by their
/// numeric IDs.
pub fn parse_liwc_dic<R: BufRead>(source: R) -> Result<Lexicon, LexiconError> {
    enum State {
        Preamble,
        Header,
        Body,
    }
    let mut state = State::Preamble;
    let mut header: Vec<(u64, String)> = Vec::new();
    let mut id_to_cat: HashMap<u64, usize> = HashMap::new();
    let mut patterns: Vec<Vec<Pattern>> = Vec::new();
    let mut last_line = 0;

    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = line?;
        let line = if lineno == 1 {
            line.trim_start_matches('\u{feff}')
        } else {
            &line
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match state {
            State::Preamble => {
                if trimmed != "%" {
                    return Err(parse_err(lineno, "expected '%' to open the category header"));
                }
                state = State::Header;
            }
            State::Header => {
                if trimmed == "%" {
                    if header.is_empty() {
                        return Err(parse_err(lineno, "header defines no categories"));
                    }
                    header.sort_by_key(|(id, _)| *id);
                    let mut names = HashSet::new();
                    for (pos, (id, name)) in header.iter().enumerate() {
                        if !names.insert(name.as_str()) {
                            return Err(parse_err(lineno, format!("duplicate category name {name:?}")));
                        }
                        id_to_cat.insert(*id, pos);
                    }
                    patterns = vec![Vec::new(); header.len()];
                    state = State::Body;
                    continue;
                }
                let mut fields = trimmed.split_whitespace();
                let (Some(id), Some(name), None) = (fields.next(), fields.next(), fields.next()) else {
                    return Err(parse_err(lineno, "malformed header line, expected 'ID<TAB>name'"));
                };
                let id: u64 = id
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("invalid category ID {id:?}")))?;
                if header.iter().any(|(existing, _)| *existing == id) {
                    return Err(parse_err(lineno, format!("duplicate category ID {id}")));
                }
                validate_name(name).map_err(|e| parse_err(lineno, e.to_string()))?;
                header.push((id, name.to_string()));
            }
            State::Body => {
                let (pattern, ids) = match line.split_once('\t') {
                    Some((p, rest)) => (p.trim(), rest),
                    None => match trimmed.split_once(char::is_whitespace) {
                        Some((p, rest)) => (p, rest),
                        None => (trimmed, ""),
                    },
                };
                let pattern = Pattern::parse(pattern).map_err(|e| parse_err(lineno, e.to_string()))?;
                let mut any = false;
                for id in ids.split_whitespace() {
                    any = true;
                    let cat = id
                        .parse::<u64>()
                        .ok()
                        .and_then(|id| id_to_cat.get(&id))
                        .ok_or_else(|| parse_err(lineno, format!("unknown category ID {id:?}")))?;
                    patterns[*cat].push(pattern.clone());
                }
                if !any {
                    return Err(parse_err(lineno, "word line has no category IDs"));
                }
            }
        }
    }
    match state {
        State::Body => {}
        State::Preamble => return Err(parse_err(last_line.max(1), "missing category header")),
        State::Header => return Err(parse_err(last_line, "unterminated category header")),
    }
    let names = header.into_iter().map(|(_, n)| n).collect();
    Lexicon::new(names, patterns)
}

/// Parses one category per line: `name<TAB>word<TAB>word...`.
pub fn parse_category_tsv<R: BufRead>(source: R) -> Result<Lexicon, LexiconError> {
    let mut names: Vec<String> = Vec::new();
    let mut patterns = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = if lineno == 1 {
            line.trim_start_matches('\u{feff}')
        } else {
            &line
        };
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let name = fields.next().unwrap_or("").trim();
        if name.is_empty() {
            return Err(parse_err(lineno, "blank category name"));
        }
        validate_name(name).map_err(|e| parse_err(lineno, e.to_string()))?;
        if !seen.insert(name.to_string()) {
            return Err(parse_err(lineno, format!("duplicate category name {name:?}")));
        }
        let pats = fields
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .map(|w| Pattern::parse(w).map_err(|e| parse_err(lineno, e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        if pats.is_empty() {
            return Err(parse_err(lineno, format!("category {name:?} lists no words")));
        }
        names.push(name.to_string());
        patterns.push(pats);
    }
    Lexicon::new(names, patterns)
}

/// Parses a keep-list: one category name per line, `#` starts a comment.
pub fn parse_keep_list<R: BufRead>(source: R) -> Result<Vec<String>, LexiconError> {
    let mut out = Vec::new();
    for line in source.lines() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if !content.is_empty() {
            out.push(content.to_string());
        }
    }
    Ok(out)
}

/// The 52 topical LIWC 2015 categories (grammatical categories excluded).
pub fn liwc_topical_keep_list() -> Vec<String> {
    parse_keep_list(LIWC_TOPICAL_KEEP.as_bytes()).expect("bundled keep list parses")
}

/// Bag-of-categories: element `i` counts the matches for category `i`,
/// divided by the token count when `normalize` is set.
pub fn encode_bag_of_categories(
    lex: &Lexicon,
    sentence: &TokenSequence,
    normalize: bool,
) -> Result<Representation, LexiconError> {
    if normalize && sentence.is_empty() {
        return Err(LexiconError::EmptySentence);
    }
    let counts = lex.match_sentence(sentence.tokens()).counts;
    let denom = if normalize { sentence.len() as f64 } else { 1.0 };
    let weights = counts.iter().map(|&c| c as f64 / denom).collect();
    Ok(Representation::new(Method::Bow, lex.categories_arc(), weights))
}
