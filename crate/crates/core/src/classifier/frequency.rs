//! How often each unique ad URL was served.

use std::collections::BTreeMap;

use super::AdImpression;

/// Bins `[1, width], [width+1, 2*width], ...` up to `max`, plus an overflow
/// bin for counts above `max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrequencyBins {
    pub width: usize,
    pub max: usize,
}

impl Default for FrequencyBins {
    fn default() -> Self {
        FrequencyBins { width: 100, max: 3100 }
    }
}

impl FrequencyBins {
    pub fn count(&self) -> usize {
        self.max.div_ceil(self.width.max(1))
    }

    /// Inclusive bounds of bin `i`.
    pub fn bounds(&self, i: usize) -> (usize, usize) {
        let w = self.width.max(1);
        (i * w + 1, ((i + 1) * w).min(self.max))
    }

    fn index(&self, serves: usize) -> Option<usize> {
        (serves >= 1 && serves <= self.max).then(|| (serves - 1) / self.width.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyReport {
    /// Serve count per unique URL.
    pub counts: BTreeMap<String, usize>,
    /// Empirical CDF over unique ads: `(serve count, fraction of ads served at
    /// most that often)` at each distinct count.
    pub cdf: Vec<(usize, f64)>,
    pub bins: FrequencyBins,
    /// Unique ads per bin.
    pub histogram: Vec<usize>,
    pub overflow: usize,
}

impl FrequencyReport {
    pub fn total_serves(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn max_count(&self) -> usize {
        self.counts.values().copied().max().unwrap_or(0)
    }
}

pub fn frequency_report(impressions: &[AdImpression], bins: FrequencyBins) -> FrequencyReport {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for imp in impressions {
        *counts.entry(imp.ad_url.clone()).or_insert(0) += 1;
    }
    let mut by_count: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in counts.values() {
        *by_count.entry(c).or_insert(0) += 1;
    }
    let unique = counts.len() as f64;
    let mut acc = 0;
    let cdf = by_count
        .iter()
        .map(|(&c, &n)| {
            acc += n;
            (c, acc as f64 / unique)
        })
        .collect();
    let mut histogram = vec![0; bins.count()];
    let mut overflow = 0;
    for &c in counts.values() {
        match bins.index(c) {
            Some(i) => histogram[i] += 1,
            None => overflow += 1,
        }
    }
    FrequencyReport {
        counts,
        cdf,
        bins,
        histogram,
        overflow,
    }
}
