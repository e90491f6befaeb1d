//! Served-ad classification.
//!
//! Each impression's URL is mapped into a category taxonomy, then filtered
//! in a fixed order: random (served to every profile of the experiment within
//! a shared window), targeted (matches the profile's categories), contextual
//! (matches the app category), generic (everything else).

mod format;
mod frequency;
mod timing;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub use format::{
    parse_impressions, parse_precategorized, parse_taxonomy, write_class_report, write_dp_effect,
    write_frequency_report, write_impressions, write_precategorized, write_taxonomy, write_timing_report,
    IMPRESSION_HEADER,
};
pub use frequency::{frequency_report, FrequencyBins, FrequencyReport};
pub use timing::{timing_stats, Burst, TimingError, TimingStats};

use crate::ids::CategoryId;
use crate::matcher::{map_keywords, tokenize, InterestCorpus};
use crate::profile::InterestProfile;

/// Six hours; the one-hour variant is also common.
pub const DEFAULT_OVERLAP_S: i64 = 6 * 3600;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifyError {
    #[error("no impressions")]
    EmptyInput,
    #[error("empty taxonomy")]
    EmptyTaxonomy,
    #[error("url {0:?} maps to no category")]
    Unmappable(String),
    #[error("invalid category path {0:?}")]
    InvalidPath(String),
}

/// A taxonomy node, stored as its path segments from the root.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CategoryNode {
    segments: Vec<String>,
}

impl CategoryNode {
    /// Parses a slash-separated path such as `Business/Accounting`.
    pub fn parse(path: &str) -> Result<Self, ClassifyError> {
        let segments: Vec<String> = path.split('/').map(str::to_owned).collect();
        if segments
            .iter()
            .any(|s| s.is_empty() || s.chars().any(|c| c.is_control()))
        {
            return Err(ClassifyError::InvalidPath(path.to_owned()));
        }
        Ok(CategoryNode { segments })
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn root(&self) -> &str {
        &self.segments[0]
    }

    pub fn path(&self) -> String {
        self.segments.join("/")
    }

    /// True if `self` is `other` or lies beneath it.
    pub fn is_within(&self, other: &CategoryNode) -> bool {
        self.segments.starts_with(&other.segments)
    }
}

impl fmt::Display for CategoryNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.path())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Network {
    AdMob,
    ThirdParty(String),
}

impl Network {
    pub fn parse(s: &str) -> Self {
        match s {
            "AdMob" => Network::AdMob,
            other => Network::ThirdParty(other.to_owned()),
        }
    }
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Network::AdMob => f.write_str("AdMob"),
            Network::ThirdParty(n) => f.write_str(n),
        }
    }
}

/// One served ad.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdImpression {
    pub experiment_id: String,
    pub profile: String,
    pub app_category: CategoryId,
    pub arrival: i64,
    pub network: Network,
    pub ad_url: String,
}

/// The category taxonomy, with a keyword document per node built from its
/// path segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    nodes: BTreeSet<CategoryNode>,
    corpus: InterestCorpus,
}

impl Taxonomy {
    pub fn new(nodes: impl IntoIterator<Item = CategoryNode>) -> Result<Self, ClassifyError> {
        let nodes: BTreeSet<CategoryNode> = nodes.into_iter().collect();
        let docs: BTreeMap<String, Vec<String>> = nodes
            .iter()
            .map(|n| (n.path(), tokenize(&n.segments.join(" "))))
            .collect();
        let corpus = InterestCorpus::new(docs).map_err(|_| ClassifyError::EmptyTaxonomy)?;
        Ok(Taxonomy { nodes, corpus })
    }

    pub fn nodes(&self) -> impl Iterator<Item = &CategoryNode> {
        self.nodes.iter()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn corpus(&self) -> &InterestCorpus {
        &self.corpus
    }

    pub fn contains(&self, node: &CategoryNode) -> bool {
        self.nodes.contains(node)
    }
}

/// Keywords of a URL: host and path tokens, scheme and query dropped.
pub fn url_keywords(url: &str) -> BTreeSet<String> {
    let rest = url.split_once("://").map_or(url, |(_, r)| r);
    let rest = rest.split(['?', '#']).next().unwrap_or("");
    tokenize(rest).into_iter().collect()
}

/// Direct lookup in `precategorized`, else the taxonomy node whose path
/// tokens score highest against the URL tokens (ties to the smaller path).
pub fn map_url(
    url: &str,
    taxonomy: &Taxonomy,
    precategorized: &BTreeMap<String, CategoryNode>,
) -> Result<CategoryNode, ClassifyError> {
    if let Some(node) = precategorized.get(url) {
        return Ok(node.clone());
    }
    let best = map_keywords(&url_keywords(url), taxonomy.corpus())
        .map_err(|_| ClassifyError::Unmappable(url.to_owned()))?;
    CategoryNode::parse(&best.interest_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AdClass {
    Random,
    Targeted,
    Contextual,
    Generic,
}

impl AdClass {
    pub const ALL: [AdClass; 4] = [AdClass::Random, AdClass::Targeted, AdClass::Contextual, AdClass::Generic];

    pub fn as_str(&self) -> &'static str {
        match self {
            AdClass::Random => "random",
            AdClass::Targeted => "targeted",
            AdClass::Contextual => "contextual",
            AdClass::Generic => "generic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassifyConfig {
    /// Profile categories `C_r`, per profile id.
    pub profile_categories: BTreeMap<String, Vec<CategoryNode>>,
    /// App categories `C_s`, per app category id.
    pub app_categories: BTreeMap<CategoryId, Vec<CategoryNode>>,
    pub overlap_s: i64,
    /// Match whole paths (node within a listed category) instead of roots.
    pub full_path: bool,
}

impl ClassifyConfig {
    pub fn new(overlap_s: i64) -> Self {
        ClassifyConfig {
            overlap_s,
            ..Default::default()
        }
    }

    fn matches(&self, node: &CategoryNode, against: Option<&Vec<CategoryNode>>) -> bool {
        against.is_some_and(|cs| {
            cs.iter().any(|c| {
                if self.full_path {
                    node.is_within(c)
                } else {
                    node.root() == c.root()
                }
            })
        })
    }
}

/// Categories of a profile usable for targeting: every category weighted
/// strictly above `floor`.
pub fn profile_categories(p: &InterestProfile, floor: f64) -> Vec<CategoryNode> {
    p.weights()
        .iter()
        .filter(|(_, &w)| w > floor)
        .filter_map(|(k, _)| CategoryNode::parse(k.as_str()).ok())
        .collect()
}

/// Classes per impression, indexed like the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedAds {
    pub mapping: BTreeMap<String, CategoryNode>,
    pub classes: Vec<AdClass>,
}

impl ClassifiedAds {
    pub fn members(&self, class: AdClass) -> Vec<usize> {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == class)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn counts(&self) -> BTreeMap<AdClass, usize> {
        let mut out: BTreeMap<AdClass, usize> = AdClass::ALL.iter().map(|c| (*c, 0)).collect();
        for c in &self.classes {
            *out.get_mut(c).unwrap() += 1;
        }
        out
    }

    /// Percentage of impressions in each class.
    pub fn proportions(&self) -> BTreeMap<AdClass, f64> {
        let n = self.classes.len().max(1) as f64;
        self.counts()
            .into_iter()
            .map(|(c, k)| (c, 100.0 * k as f64 / n))
            .collect()
    }
}

/// URLs served to every profile of an experiment inside one window of
/// `overlap_s` seconds. Needs at least two profiles.
pub fn random_urls(impressions: &[AdImpression], overlap_s: i64) -> BTreeSet<(String, String)> {
    let mut profiles: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut by_url: BTreeMap<(&str, &str), Vec<(i64, &str)>> = BTreeMap::new();
    for imp in impressions {
        profiles
            .entry(&imp.experiment_id)
            .or_default()
            .insert(&imp.profile);
        by_url
            .entry((&imp.experiment_id, &imp.ad_url))
            .or_default()
            .push((imp.arrival, &imp.profile));
    }
    let mut out = BTreeSet::new();
    for ((exp, url), mut hits) in by_url {
        let all = &profiles[exp];
        if all.len() < 2 {
            continue;
        }
        hits.sort();
        // sliding window [hits[lo].0, hits[lo].0 + overlap_s]
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        let mut hi = 0;
        let mut found = false;
        for lo in 0..hits.len() {
            while hi < hits.len() && hits[hi].0 - hits[lo].0 <= overlap_s {
                *seen.entry(hits[hi].1).or_insert(0) += 1;
                hi += 1;
            }
            if seen.len() == all.len() {
                found = true;
                break;
            }
            let p = hits[lo].1;
            let c = seen.get_mut(p).unwrap();
            *c -= 1;
            if *c == 0 {
                seen.remove(p);
            }
        }
        if found {
            out.insert((exp.to_owned(), url.to_owned()));
        }
    }
    out
}

pub fn classify(
    impressions: &[AdImpression],
    taxonomy: &Taxonomy,
    precategorized: &BTreeMap<String, CategoryNode>,
    config: &ClassifyConfig,
) -> Result<ClassifiedAds, ClassifyError> {
    if impressions.is_empty() {
        return Err(ClassifyError::EmptyInput);
    }
    let mut mapping = BTreeMap::new();
    for imp in impressions {
        if !mapping.contains_key(&imp.ad_url) {
            if let Ok(node) = map_url(&imp.ad_url, taxonomy, precategorized) {
                mapping.insert(imp.ad_url.clone(), node);
            }
        }
    }
    let random = random_urls(impressions, config.overlap_s);
    let classes = impressions
        .iter()
        .map(|imp| {
            if random.contains(&(imp.experiment_id.clone(), imp.ad_url.clone())) {
                return AdClass::Random;
            }
            match mapping.get(&imp.ad_url) {
                Some(node) if config.matches(node, config.profile_categories.get(&imp.profile)) => {
                    AdClass::Targeted
                }
                Some(node) if config.matches(node, config.app_categories.get(&imp.app_category)) => {
                    AdClass::Contextual
                }
                _ => AdClass::Generic,
            }
        })
        .collect();
    Ok(ClassifiedAds { mapping, classes })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpEffect {
    pub before: BTreeMap<AdClass, f64>,
    pub after: BTreeMap<AdClass, f64>,
}

impl DpEffect {
    /// `after - before`, in percentage points.
    pub fn difference(&self) -> BTreeMap<AdClass, f64> {
        AdClass::ALL
            .iter()
            .map(|c| (*c, self.after[c] - self.before[c]))
            .collect()
    }
}

/// Classifies the log twice: once with `C_r` taken from each profile's
/// original weights and once from its privatized weights.
pub fn dp_effect_report(
    impressions: &[AdImpression],
    taxonomy: &Taxonomy,
    precategorized: &BTreeMap<String, CategoryNode>,
    base: &ClassifyConfig,
    profiles: &BTreeMap<String, (InterestProfile, InterestProfile)>,
    floor: f64,
) -> Result<DpEffect, ClassifyError> {
    let run = |pick: fn(&(InterestProfile, InterestProfile)) -> &InterestProfile| {
        let mut config = base.clone();
        for (id, pair) in profiles {
            config
                .profile_categories
                .insert(id.clone(), profile_categories(pick(pair), floor));
        }
        classify(impressions, taxonomy, precategorized, &config).map(|c| c.proportions())
    };
    Ok(DpEffect {
        before: run(|p| &p.0)?,
        after: run(|p| &p.1)?,
    })
}
