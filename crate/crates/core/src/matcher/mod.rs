//! tf-idf keyword similarity between ads/services and interest categories.
//!
//! `idf_t = log10(N / df_t)` with raw term counts for `tf`; a term absent
//! from every document contributes zero.

mod format;

use std::collections::{BTreeMap, BTreeSet};

pub use format::{parse_catalog, parse_corpus, write_catalog, write_corpus};

use crate::ids::ServiceId;
use crate::profile::InterestProfile;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatchError {
    #[error("no interest scores above zero")]
    NoPositiveMatch,
    #[error("service catalog is empty")]
    EmptyCatalog,
    #[error("interest corpus is empty")]
    EmptyCorpus,
    #[error("ad {0} has no keywords")]
    NoKeywords(u32),
    #[error("duplicate id {0}")]
    Duplicate(String),
}

/// Lowercases and splits on anything that is not alphanumeric, dropping
/// tokens shorter than two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

pub fn detokenize(tokens: &[String]) -> String {
    tokens.join(" ")
}

/// An advertisement characterised by its keywords.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdRecord {
    pub ad_id: u32,
    pub keywords: BTreeSet<String>,
    pub landing_url: String,
}

impl AdRecord {
    pub fn new(ad_id: u32, keywords: BTreeSet<String>, landing_url: impl Into<String>) -> Result<Self, MatchError> {
        if keywords.is_empty() {
            return Err(MatchError::NoKeywords(ad_id));
        }
        Ok(AdRecord {
            ad_id,
            keywords,
            landing_url: landing_url.into(),
        })
    }
}

/// Keyword documents of the interest categories, with document frequencies
/// precomputed. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct InterestCorpus {
    docs: BTreeMap<String, Vec<String>>,
    df: BTreeMap<String, usize>,
}

impl InterestCorpus {
    pub fn new(docs: BTreeMap<String, Vec<String>>) -> Result<Self, MatchError> {
        if docs.is_empty() {
            return Err(MatchError::EmptyCorpus);
        }
        let mut df = BTreeMap::new();
        for tokens in docs.values() {
            for t in tokens.iter().collect::<BTreeSet<_>>() {
                *df.entry(t.clone()).or_insert(0) += 1;
            }
        }
        Ok(InterestCorpus { docs, df })
    }

    pub fn from_pairs<I, S>(pairs: I) -> Result<Self, MatchError>
    where
        I: IntoIterator<Item = (S, Vec<String>)>,
        S: Into<String>,
    {
        let mut docs = BTreeMap::new();
        for (id, tokens) in pairs {
            let id = id.into();
            if docs.insert(id.clone(), tokens).is_some() {
                return Err(MatchError::Duplicate(id));
            }
        }
        Self::new(docs)
    }

    /// Number of interest documents, `N`.
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn doc(&self, id: &str) -> Option<&[String]> {
        self.docs.get(id).map(Vec::as_slice)
    }

    pub fn docs(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.docs.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn document_frequency(&self, token: &str) -> usize {
        self.df.get(token).copied().unwrap_or(0)
    }
}

/// Raw occurrence count of `token` in `doc`.
pub fn tf(token: &str, doc: &[String]) -> usize {
    doc.iter().filter(|t| *t == token).count()
}

pub fn idf(token: &str, corpus: &InterestCorpus) -> f64 {
    match corpus.document_frequency(token) {
        0 => 0.0,
        df => (corpus.len() as f64 / df as f64).log10(),
    }
}

/// `sum over t in keywords of tf(t, doc) * idf(t)`.
pub fn score(keywords: &BTreeSet<String>, doc: &[String], corpus: &InterestCorpus) -> f64 {
    keywords
        .iter()
        .map(|t| tf(t, doc) as f64 * idf(t, corpus))
        .sum()
}

/// Relative gap below which two scores count as tied. Sums of logarithms
/// that are equal in exact arithmetic can differ in the last bit.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Best-scoring interest for a keyword set, ties to the smallest id.
pub fn map_keywords(keywords: &BTreeSet<String>, corpus: &InterestCorpus) -> Result<SimilarityScore, MatchError> {
    let mut best: Option<SimilarityScore> = None;
    for (id, doc) in corpus.docs() {
        let value = score(keywords, doc, corpus);
        if best.as_ref().is_none_or(|b| value > b.value + TIE_TOLERANCE * b.value.abs().max(1.0)) {
            best = Some(SimilarityScore {
                value,
                interest_id: id.to_owned(),
            });
        }
    }
    best.filter(|b| b.value > 0.0).ok_or(MatchError::NoPositiveMatch)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityScore {
    pub value: f64,
    pub interest_id: String,
}

/// One marketplace service offered through the PIR database; `index` is its
/// record index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    pub index: usize,
    pub service_id: ServiceId,
    pub keywords: BTreeSet<String>,
}

/// Top-`k` catalog indices ranked by the profile-weighted similarity
/// `sum over categories of weight * score(service keywords, category doc)`.
/// Ties go to the lower index.
pub fn select_services(
    profile: &InterestProfile,
    catalog: &[CatalogEntry],
    corpus: &InterestCorpus,
    k: usize,
) -> Result<Vec<usize>, MatchError> {
    if catalog.is_empty() {
        return Err(MatchError::EmptyCatalog);
    }
    let mut ranked: Vec<(f64, usize)> = catalog
        .iter()
        .map(|entry| {
            let total = profile
                .weights()
                .iter()
                .filter_map(|(cat, &w)| {
                    corpus
                        .doc(cat.as_str())
                        .map(|doc| w * score(&entry.keywords, doc, corpus))
                })
                .sum::<f64>();
            (total, entry.index)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(ranked.into_iter().take(k.max(1)).map(|(_, i)| i).collect())
}
