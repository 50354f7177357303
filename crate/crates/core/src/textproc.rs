//! Tokenization and TF-IDF features for the native classifiers.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Default minimum document frequency for vocabulary terms.
pub const DEFAULT_MIN_DF: usize = 2;
/// Default vocabulary size cap.
pub const DEFAULT_MAX_SIZE: usize = 50_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TextError {
    #[error("corpus contains no documents")]
    EmptyCorpus,
    #[error("vocabulary contains duplicate or unsorted terms")]
    InvalidVocabulary,
    #[error("idf table does not match the vocabulary")]
    IdfMismatch,
}

/// Lowercased token text. Never empty, never contains whitespace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token(String);

impl Token {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl From<Token> for String {
    fn from(t: Token) -> String {
        t.0
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_sigil(c: char) -> bool {
    matches!(c, '@' | '#' | '$')
}

fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF
        | 0x2600..=0x27BF
        | 0x2300..=0x23FF
        | 0x2B00..=0x2BFF)
}

/// Characters that extend a preceding emoji: variation selectors, skin tones,
/// and the zero-width joiner (which also pulls in the next emoji).
fn is_emoji_modifier(c: char) -> bool {
    matches!(c as u32, 0xFE0E | 0xFE0F | 0x1F3FB..=0x1F3FF | 0x20E3)
}

const ZWJ: char = '\u{200D}';

fn push_lower(buf: &mut String, c: char) {
    buf.extend(c.to_lowercase());
}

/// Splits text into lowercase tokens.
///
/// Whitespace and punctuation separate tokens. `@mention`, `#hashtag` and
/// `$amount` keep their sigil. Each emoji (with its modifiers and joined
/// sequence) is its own token.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if is_word_char(c) || (is_sigil(c) && chars.get(i + 1).is_some_and(|&n| is_word_char(n))) {
            let mut buf = String::new();
            push_lower(&mut buf, c);
            i += 1;
            while i < chars.len() && is_word_char(chars[i]) {
                push_lower(&mut buf, chars[i]);
                i += 1;
            }
            tokens.push(Token(buf));
        } else if is_emoji(c) {
            let mut buf = String::new();
            buf.push(c);
            i += 1;
            loop {
                match chars.get(i) {
                    Some(&m) if is_emoji_modifier(m) => {
                        buf.push(m);
                        i += 1;
                    }
                    Some(&ZWJ) if chars.get(i + 1).is_some_and(|&n| is_emoji(n)) => {
                        buf.push(ZWJ);
                        buf.push(chars[i + 1]);
                        i += 2;
                    }
                    _ => break,
                }
            }
            tokens.push(Token(buf));
        } else {
            i += 1;
        }
    }
    tokens
}

/// Sorted list of distinct terms with an inverse index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Builds from terms that must already be strictly increasing.
    pub fn from_sorted_terms(terms: Vec<String>) -> Result<Self, TextError> {
        if terms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TextError::InvalidVocabulary);
        }
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocabulary { terms, index })
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn position(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.terms.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let terms = Vec::<String>::deserialize(d)?;
        Vocabulary::from_sorted_terms(terms).map_err(serde::de::Error::custom)
    }
}

fn document_frequencies<T: AsRef<str>>(docs: &[Vec<T>]) -> BTreeMap<&str, usize> {
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        let mut seen: Vec<&str> = doc.iter().map(AsRef::as_ref).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    df
}

/// Keeps terms with document frequency at least `min_df`; above `max_size`,
/// keeps the most frequent (ties broken lexicographically).
pub fn build_vocabulary<T: AsRef<str>>(
    docs: &[Vec<T>],
    min_df: usize,
    max_size: usize,
) -> Result<Vocabulary, TextError> {
    if docs.is_empty() {
        return Err(TextError::EmptyCorpus);
    }
    let min_df = min_df.max(1);
    let mut qualifying: Vec<(&str, usize)> = document_frequencies(docs)
        .into_iter()
        .filter(|&(_, df)| df >= min_df)
        .collect();
    if qualifying.len() > max_size {
        qualifying.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        qualifying.truncate(max_size);
    }
    let mut terms: Vec<String> = qualifying
        .into_iter()
        .map(|(t, _)| String::from(t))
        .collect();
    terms.sort_unstable();
    Vocabulary::from_sorted_terms(terms)
}

/// Smoothed inverse document frequencies, one per vocabulary position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    pub idf: Vec<f64>,
    pub doc_count: usize,
}

impl IdfTable {
    pub fn get(&self, position: usize) -> f64 {
        self.idf[position]
    }

    pub fn check(&self, vocab: &Vocabulary) -> Result<(), TextError> {
        if self.idf.len() != vocab.len() || self.doc_count == 0 {
            return Err(TextError::IdfMismatch);
        }
        Ok(())
    }
}

/// `idf(t) = ln((1 + N) / (1 + df(t))) + 1`.
pub fn smoothed_idf(doc_count: usize, df: usize) -> f64 {
    libm::log((1.0 + doc_count as f64) / (1.0 + df as f64)) + 1.0
}

pub fn fit_idf<T: AsRef<str>>(docs: &[Vec<T>], vocab: &Vocabulary) -> Result<IdfTable, TextError> {
    if docs.is_empty() {
        return Err(TextError::EmptyCorpus);
    }
    let df = document_frequencies(docs);
    let idf = vocab
        .terms()
        .iter()
        .map(|t| smoothed_idf(docs.len(), df.get(t.as_str()).copied().unwrap_or(0)))
        .collect();
    Ok(IdfTable {
        idf,
        doc_count: docs.len(),
    })
}

/// Sparse feature vector: strictly increasing indices, no stored zeros.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Sorts by index, sums duplicates and drops zeros.
    pub fn from_entries(mut entries: Vec<(usize, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (i, w) in entries {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += w,
                _ => out.push((i, w)),
            }
        }
        out.retain(|e| e.1 != 0.0);
        SparseVector { entries: out }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.entries.binary_search_by_key(&index, |e| e.0) {
            Ok(p) => self.entries[p].1,
            Err(_) => 0.0,
        }
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.entries.iter().map(|e| e.1 * e.1).sum())
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, w)| w * dense[i]).sum()
    }
}

/// Raw in-vocabulary term counts (naive Bayes input).
pub fn count_vectorize<T: AsRef<str>>(doc: &[T], vocab: &Vocabulary) -> SparseVector {
    SparseVector::from_entries(
        doc.iter()
            .filter_map(|t| vocab.position(t.as_ref()))
            .map(|i| (i, 1.0))
            .collect(),
    )
}

/// Count times idf, L2-normalized. Out-of-vocabulary tokens are ignored.
pub fn tfidf_vectorize<T: AsRef<str>>(
    doc: &[T],
    vocab: &Vocabulary,
    idf: &IdfTable,
) -> SparseVector {
    let counts = count_vectorize(doc, vocab);
    let weighted: Vec<(usize, f64)> = counts
        .entries
        .iter()
        .map(|&(i, c)| (i, c * idf.get(i)))
        .collect();
    let mut v = SparseVector { entries: weighted };
    let norm = v.norm();
    if norm > 0.0 {
        for e in &mut v.entries {
            e.1 /= norm;
        }
    }
    v
}
