//! Context and interest profiles: establishment from opted-in services,
//! activity and usage updates, slot-wise evolution and stable-state detection.
//!
//! Every operation is a pure function returning a new profile. Weights are
//! clamped saturating at `zeta_max` (excess is discarded, nothing is
//! renormalised); category weights are also held at or above `zeta_min`.

mod format;
mod input;

use std::collections::{BTreeMap, BTreeSet};

pub use format::{parse_profile, parse_profiles, write_profile, ProfileDocument, PROFILE_HEADER};
pub use input::{
    parse_category_map, parse_deltas, parse_services, parse_usage, write_category_map, write_deltas, write_services,
    write_usage,
};

use crate::ids::{CategoryId, ServiceId};
use crate::matcher::{map_keywords, InterestCorpus};

/// Default slot length: one day.
pub const DEFAULT_SLOT_SECS: i64 = 24 * 3600;
/// Default tolerance and window for [`detect_state`].
pub const DEFAULT_STABLE_TOL: f64 = 1e-6;
pub const DEFAULT_STABLE_WINDOW: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("context profile has no services")]
    EmptyContext,
    #[error("service {service} in category {category} maps to no interest")]
    UnmappableCategory { service: ServiceId, category: CategoryId },
    #[error("unknown service {0}")]
    UnknownService(ServiceId),
    #[error("service {0} has no keywords")]
    NoKeywords(ServiceId),
    #[error("weight {value} for {key} outside ({lo}, {hi}]")]
    WeightOutOfBounds {
        key: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("invalid bounds: need 0 <= zeta_min < zeta_max <= 1, got {0} and {1}")]
    InvalidBounds(f64, f64),
    #[error("delta for slot {delta} is not after profile slot {current}")]
    StaleDelta { delta: u64, current: u64 },
    #[error("usage fraction {value} for {service} outside [0, 1]")]
    InvalidUsage { service: ServiceId, value: f64 },
    #[error("invalid category id {0:?}")]
    InvalidCategory(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightBounds {
    zeta_min: f64,
    zeta_max: f64,
}

impl WeightBounds {
    pub fn new(zeta_min: f64, zeta_max: f64) -> Result<Self, ProfileError> {
        if !(0.0..zeta_max).contains(&zeta_min) || zeta_max > 1.0 || zeta_min.is_nan() {
            return Err(ProfileError::InvalidBounds(zeta_min, zeta_max));
        }
        Ok(WeightBounds { zeta_min, zeta_max })
    }

    pub fn zeta_min(&self) -> f64 {
        self.zeta_min
    }

    pub fn zeta_max(&self) -> f64 {
        self.zeta_max
    }

    fn clamp_category(&self, w: f64) -> f64 {
        w.clamp(self.zeta_min, self.zeta_max)
    }

    fn clamp_component(&self, w: f64) -> f64 {
        w.min(self.zeta_max)
    }
}

impl Default for WeightBounds {
    fn default() -> Self {
        WeightBounds {
            zeta_min: 0.05,
            zeta_max: 0.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProfileState {
    Initiation,
    Stable,
    Evolution,
}

impl ProfileState {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProfileState::Initiation => "Initiation",
            ProfileState::Stable => "Stable",
            ProfileState::Evolution => "Evolution",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Initiation" => Some(ProfileState::Initiation),
            "Stable" => Some(ProfileState::Stable),
            "Evolution" => Some(ProfileState::Evolution),
            _ => None,
        }
    }
}

/// A marketplace service a user can opt into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Service {
    pub id: ServiceId,
    pub category: CategoryId,
    pub keywords: BTreeSet<String>,
}

/// An interest category with its keyword document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interest {
    pub id: (u32, u32),
    pub category: CategoryId,
    pub keywords: BTreeSet<String>,
}

/// The set of services a user has opted into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextProfile {
    services: BTreeMap<ServiceId, Service>,
}

impl ContextProfile {
    pub fn new(services: impl IntoIterator<Item = Service>) -> Result<Self, ProfileError> {
        let mut map = BTreeMap::new();
        for s in services {
            if s.keywords.is_empty() {
                return Err(ProfileError::NoKeywords(s.id));
            }
            if !s.category.is_valid() {
                return Err(ProfileError::InvalidCategory(s.category.to_string()));
            }
            map.insert(s.id, s);
        }
        if map.is_empty() {
            return Err(ProfileError::EmptyContext);
        }
        Ok(ContextProfile { services: map })
    }

    pub fn services(&self) -> impl Iterator<Item = &Service> {
        self.services.values()
    }

    pub fn get(&self, id: ServiceId) -> Option<&Service> {
        self.services.get(&id)
    }

    pub fn len(&self) -> usize {
        self.services.len()
    }

    pub fn is_empty(&self) -> bool {
        self.services.is_empty()
    }

    /// Services whose mapped interest is not in `removed`.
    pub fn without_interests(
        &self,
        removed: &BTreeSet<CategoryId>,
        mapping: &CategoryMap,
    ) -> Result<Self, ProfileError> {
        let mut kept = Vec::new();
        for s in self.services() {
            if !removed.contains(&mapping.resolve(s)?) {
                kept.push(s.clone());
            }
        }
        ContextProfile::new(kept)
    }
}

/// The mapping from marketplace categories to interest categories: a static
/// table, with keyword similarity against the interest corpus as fallback.
#[derive(Debug, Clone, Default)]
pub struct CategoryMap {
    table: BTreeMap<CategoryId, CategoryId>,
    corpus: Option<InterestCorpus>,
}

impl CategoryMap {
    pub fn new(table: BTreeMap<CategoryId, CategoryId>, corpus: Option<InterestCorpus>) -> Self {
        CategoryMap { table, corpus }
    }

    pub fn table(&self) -> &BTreeMap<CategoryId, CategoryId> {
        &self.table
    }

    pub fn resolve(&self, service: &Service) -> Result<CategoryId, ProfileError> {
        if let Some(target) = self.table.get(&service.category) {
            return Ok(target.clone());
        }
        self.corpus
            .as_ref()
            .and_then(|c| map_keywords(&service.keywords, c).ok())
            .map(|m| CategoryId::new(m.interest_id))
            .ok_or_else(|| ProfileError::UnmappableCategory {
                service: service.id,
                category: service.category.clone(),
            })
    }
}

/// Weighted interest categories plus the browsing and interaction
/// components. Component maps are keyed by the interest category they were
/// mapped to.
#[derive(Debug, Clone, PartialEq)]
pub struct InterestProfile {
    weights: BTreeMap<CategoryId, f64>,
    browsing: BTreeMap<CategoryId, f64>,
    interactions: BTreeMap<CategoryId, f64>,
    timestamp: i64,
    slot: u64,
    state: ProfileState,
    bounds: WeightBounds,
}

impl InterestProfile {
    /// A profile in `Initiation` state holding only category weights.
    pub fn from_weights(
        weights: impl IntoIterator<Item = (CategoryId, f64)>,
        bounds: WeightBounds,
    ) -> Result<Self, ProfileError> {
        let p = InterestProfile {
            weights: weights.into_iter().collect(),
            browsing: BTreeMap::new(),
            interactions: BTreeMap::new(),
            timestamp: 0,
            slot: 0,
            state: ProfileState::Initiation,
            bounds,
        };
        p.validate()?;
        Ok(p)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        weights: BTreeMap<CategoryId, f64>,
        browsing: BTreeMap<CategoryId, f64>,
        interactions: BTreeMap<CategoryId, f64>,
        timestamp: i64,
        slot: u64,
        state: ProfileState,
        bounds: WeightBounds,
    ) -> Result<Self, ProfileError> {
        let p = InterestProfile {
            weights,
            browsing,
            interactions,
            timestamp,
            slot,
            state,
            bounds,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let zmax = self.bounds.zeta_max;
        let check = |kind: &str, map: &BTreeMap<CategoryId, f64>, lo: f64| {
            for (k, &w) in map {
                if !k.is_valid() {
                    return Err(ProfileError::InvalidCategory(k.to_string()));
                }
                if !(w > 0.0 && w >= lo && w <= zmax) {
                    return Err(ProfileError::WeightOutOfBounds {
                        key: format!("{kind}:{k}"),
                        value: w,
                        lo,
                        hi: zmax,
                    });
                }
            }
            Ok(())
        };
        check("cat", &self.weights, self.bounds.zeta_min)?;
        check("brw", &self.browsing, 0.0)?;
        check("int", &self.interactions, 0.0)
    }

    pub fn weights(&self) -> &BTreeMap<CategoryId, f64> {
        &self.weights
    }

    pub fn browsing(&self) -> &BTreeMap<CategoryId, f64> {
        &self.browsing
    }

    pub fn interactions(&self) -> &BTreeMap<CategoryId, f64> {
        &self.interactions
    }

    pub fn weight(&self, category: &CategoryId) -> Option<f64> {
        self.weights.get(category).copied()
    }

    pub fn timestamp(&self) -> i64 {
        self.timestamp
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn state(&self) -> ProfileState {
        self.state
    }

    pub fn bounds(&self) -> WeightBounds {
        self.bounds
    }

    pub fn with_timestamp(mut self, timestamp: i64) -> Self {
        self.timestamp = timestamp;
        self
    }

    pub fn with_state(mut self, state: ProfileState) -> Self {
        self.state = state;
        self
    }

    /// Replaces category weights wholesale; used by the privacy layers, which
    /// keep the same bounds contract as the caller passes in.
    pub fn with_weights(
        &self,
        weights: BTreeMap<CategoryId, f64>,
        bounds: WeightBounds,
    ) -> Result<Self, ProfileError> {
        let mut p = self.clone();
        p.weights = weights;
        p.bounds = bounds;
        p.validate()?;
        Ok(p)
    }

    /// Drops the given categories from every weight map.
    pub fn without(&self, removed: &BTreeSet<CategoryId>) -> Self {
        let mut p = self.clone();
        for map in [&mut p.weights, &mut p.browsing, &mut p.interactions] {
            map.retain(|k, _| !removed.contains(k));
        }
        p
    }

    fn max_change_from(&self, other: &InterestProfile) -> f64 {
        [
            (&self.weights, &other.weights),
            (&self.browsing, &other.browsing),
            (&self.interactions, &other.interactions),
        ]
        .into_iter()
        .flat_map(|(a, b)| {
            a.keys().chain(b.keys()).map(move |k| {
                (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs()
            })
        })
        .fold(0.0, f64::max)
    }
}

/// Derives the initial interest profile from the opted-in services: each
/// interest gets the share of services mapped to it, clamped to the bounds.
pub fn establish_profile(
    ctx: &ContextProfile,
    mapping: &CategoryMap,
    bounds: WeightBounds,
) -> Result<InterestProfile, ProfileError> {
    if ctx.is_empty() {
        return Err(ProfileError::EmptyContext);
    }
    let mut counts: BTreeMap<CategoryId, usize> = BTreeMap::new();
    for s in ctx.services() {
        *counts.entry(mapping.resolve(s)?).or_insert(0) += 1;
    }
    let total = ctx.len() as f64;
    InterestProfile::from_weights(
        counts
            .into_iter()
            .map(|(k, c)| (k, bounds.clamp_category(c as f64 / total))),
        bounds,
    )
}

/// Adds browsing and interaction components onto the category weights.
/// Components are keyed by the interest they map to and must lie in
/// `(0, zeta_max]`.
pub fn apply_activity(
    profile: &InterestProfile,
    browsing: &BTreeMap<CategoryId, f64>,
    interactions: &BTreeMap<CategoryId, f64>,
    bounds: WeightBounds,
) -> Result<InterestProfile, ProfileError> {
    for (kind, map) in [("brw", browsing), ("int", interactions)] {
        for (k, &w) in map {
            if !k.is_valid() {
                return Err(ProfileError::InvalidCategory(k.to_string()));
            }
            if !(w > 0.0 && w <= bounds.zeta_max) {
                return Err(ProfileError::WeightOutOfBounds {
                    key: format!("{kind}:{k}"),
                    value: w,
                    lo: 0.0,
                    hi: bounds.zeta_max,
                });
            }
        }
    }
    let mut out = profile.clone();
    out.bounds = bounds;
    for (k, &w) in browsing.iter().chain(interactions) {
        let cur = out.weights.get(k).copied().unwrap_or(0.0);
        out.weights.insert(k.clone(), bounds.clamp_category(cur + w));
    }
    for (k, &w) in browsing {
        let cur = out.browsing.get(k).copied().unwrap_or(0.0);
        out.browsing.insert(k.clone(), bounds.clamp_component(cur + w));
    }
    for (k, &w) in interactions {
        let cur = out.interactions.get(k).copied().unwrap_or(0.0);
        out.interactions.insert(k.clone(), bounds.clamp_component(cur + w));
    }
    if out.weights != profile.weights {
        out.state = ProfileState::Evolution;
    }
    Ok(out)
}

/// Per-slot changes to each of the three weight spaces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProfileDelta {
    pub category_changes: BTreeMap<CategoryId, f64>,
    pub browsing_changes: BTreeMap<CategoryId, f64>,
    pub interaction_changes: BTreeMap<CategoryId, f64>,
    pub slot: u64,
}

impl ProfileDelta {
    pub fn new(slot: u64) -> Self {
        ProfileDelta {
            slot,
            ..Default::default()
        }
    }

    pub fn category(mut self, id: impl Into<CategoryId>, change: f64) -> Self {
        self.category_changes.insert(id.into(), change);
        self
    }

    pub fn browsing(mut self, id: impl Into<CategoryId>, change: f64) -> Self {
        self.browsing_changes.insert(id.into(), change);
        self
    }

    pub fn interaction(mut self, id: impl Into<CategoryId>, change: f64) -> Self {
        self.interaction_changes.insert(id.into(), change);
        self
    }

    /// Every change must lie in `(0, cap]`.
    pub fn validate(&self, cap: f64) -> Result<(), ProfileError> {
        for (kind, map) in [
            ("cat", &self.category_changes),
            ("brw", &self.browsing_changes),
            ("int", &self.interaction_changes),
        ] {
            for (k, &c) in map {
                if !k.is_valid() {
                    return Err(ProfileError::InvalidCategory(k.to_string()));
                }
                if !(c > 0.0 && c <= cap) {
                    return Err(ProfileError::WeightOutOfBounds {
                        key: format!("{kind}:{k}"),
                        value: c,
                        lo: 0.0,
                        hi: cap,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.category_changes.is_empty()
            && self.browsing_changes.is_empty()
            && self.interaction_changes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveConfig {
    /// Per-slot cap on any single change; `None` uses the profile's `zeta_max`.
    pub change_cap: Option<f64>,
    pub slot_secs: i64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            change_cap: None,
            slot_secs: DEFAULT_SLOT_SECS,
        }
    }
}

/// `I^{t+1} = I^t + C_{t+1}`, element-wise in each weight space, clamped.
pub fn evolve(profile: &InterestProfile, delta: &ProfileDelta) -> Result<InterestProfile, ProfileError> {
    evolve_with(profile, delta, EvolveConfig::default())
}

pub fn evolve_with(
    profile: &InterestProfile,
    delta: &ProfileDelta,
    config: EvolveConfig,
) -> Result<InterestProfile, ProfileError> {
    if delta.slot <= profile.slot {
        return Err(ProfileError::StaleDelta {
            delta: delta.slot,
            current: profile.slot,
        });
    }
    delta.validate(config.change_cap.unwrap_or(profile.bounds.zeta_max))?;
    let bounds = profile.bounds;
    let mut out = profile.clone();
    for (k, &c) in &delta.category_changes {
        let cur = out.weights.get(k).copied().unwrap_or(0.0);
        out.weights.insert(k.clone(), bounds.clamp_category(cur + c));
    }
    for (map, changes) in [
        (&mut out.browsing, &delta.browsing_changes),
        (&mut out.interactions, &delta.interaction_changes),
    ] {
        for (k, &c) in changes {
            let cur = map.get(k).copied().unwrap_or(0.0);
            map.insert(k.clone(), bounds.clamp_component(cur + c));
        }
    }
    let elapsed = (delta.slot - profile.slot) as i64;
    out.timestamp = profile.timestamp + elapsed * config.slot_secs;
    out.slot = delta.slot;
    if out.max_change_from(profile) > 0.0 {
        out.state = ProfileState::Evolution;
    }
    Ok(out)
}

/// Fraction of one slot spent in each service.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UsageRecord {
    pub per_service_usage: BTreeMap<ServiceId, f64>,
    pub slot: u64,
}

impl UsageRecord {
    pub fn validate(&self) -> Result<(), ProfileError> {
        for (&service, &value) in &self.per_service_usage {
            if !(0.0..=1.0).contains(&value) {
                return Err(ProfileError::InvalidUsage { service, value });
            }
        }
        Ok(())
    }
}

/// `I'^t = I^t + U^t(K_s)`: each service's usage is added to the interest
/// its category maps to.
pub fn incorporate_usage(
    profile: &InterestProfile,
    usage: &UsageRecord,
    ctx: &ContextProfile,
    mapping: &CategoryMap,
) -> Result<InterestProfile, ProfileError> {
    usage.validate()?;
    let mut added: BTreeMap<CategoryId, f64> = BTreeMap::new();
    for (&id, &u) in &usage.per_service_usage {
        let service = ctx.get(id).ok_or(ProfileError::UnknownService(id))?;
        let target = mapping.resolve(service)?;
        if u > 0.0 {
            *added.entry(target).or_insert(0.0) += u;
        }
    }
    let bounds = profile.bounds;
    let mut out = profile.clone();
    for (k, u) in added {
        let cur = out.weights.get(&k).copied().unwrap_or(0.0);
        out.weights.insert(k, bounds.clamp_category(cur + u));
    }
    if out.weights != profile.weights {
        out.state = ProfileState::Evolution;
    }
    Ok(out)
}

/// `Initiation` for a single profile, `Stable` once the last `window`
/// updates each moved no weight by more than `tol`, `Evolution` otherwise.
pub fn detect_state(history: &[InterestProfile], tol: f64, window: usize) -> ProfileState {
    if history.len() <= 1 {
        return ProfileState::Initiation;
    }
    let window = window.max(1);
    if history.len() < window + 1 {
        return ProfileState::Evolution;
    }
    let recent = &history[history.len() - window - 1..];
    let max_change = recent
        .windows(2)
        .map(|w| w[1].max_change_from(&w[0]))
        .fold(0.0, f64::max);
    if max_change <= tol {
        ProfileState::Stable
    } else {
        ProfileState::Evolution
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kw(s: &str) -> BTreeSet<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn service(i: u32, cat: &str) -> Service {
        Service {
            id: ServiceId(1, i),
            category: cat.into(),
            keywords: kw("app"),
        }
    }

    fn identity_map(cats: &[&str]) -> CategoryMap {
        CategoryMap::new(
            cats.iter().map(|c| (CategoryId::from(*c), CategoryId::from(*c))).collect(),
            None,
        )
    }

    fn wide() -> WeightBounds {
        WeightBounds::new(0.0, 1.0).unwrap()
    }

    fn cat(s: &str) -> CategoryId {
        CategoryId::from(s)
    }

    #[test]
    fn bounds_validation() {
        assert!(WeightBounds::new(0.5, 0.5).is_err());
        assert!(WeightBounds::new(-0.1, 0.5).is_err());
        assert!(WeightBounds::new(0.1, 1.1).is_err());
        assert!(WeightBounds::new(0.0, 1.0).is_ok());
    }

    #[test]
    fn establish_single_category() {
        let ctx = ContextProfile::new([service(1, "Business")]).unwrap();
        let bounds = WeightBounds::new(0.05, 0.6).unwrap();
        let p = establish_profile(&ctx, &identity_map(&["Business"]), bounds).unwrap();
        assert_eq!(p.state(), ProfileState::Initiation);
        assert_eq!(p.weights().len(), 1);
        assert_eq!(p.weight(&cat("Business")), Some(0.6));
    }

    #[test]
    fn establish_symmetric_pair() {
        let ctx = ContextProfile::new([
            service(1, "Games"),
            service(2, "Games"),
            service(3, "News"),
            service(4, "News"),
        ])
        .unwrap();
        let p = establish_profile(&ctx, &identity_map(&["Games", "News"]), wide()).unwrap();
        assert_eq!(p.weight(&cat("Games")), Some(0.5));
        assert_eq!(p.weight(&cat("News")), Some(0.5));
    }

    #[test]
    fn establish_count_proportions_then_clamp() {
        let mut services = Vec::new();
        for i in 0..5 {
            services.push(service(i, "A"));
        }
        for i in 5..8 {
            services.push(service(i, "B"));
        }
        for i in 8..10 {
            services.push(service(i, "C"));
        }
        let ctx = ContextProfile::new(services).unwrap();
        let map = identity_map(&["A", "B", "C"]);
        // counts (5, 3, 2) over 10 services
        let p = establish_profile(&ctx, &map, wide()).unwrap();
        assert_eq!(
            p.weights().values().copied().collect::<Vec<_>>(),
            vec![0.5, 0.3, 0.2]
        );
        let tight = WeightBounds::new(0.25, 0.4).unwrap();
        let p = establish_profile(&ctx, &map, tight).unwrap();
        assert_eq!(
            p.weights().values().copied().collect::<Vec<_>>(),
            vec![0.4, 0.3, 0.25]
        );
    }

    #[test]
    fn establish_errors_and_keyword_fallback() {
        assert_eq!(
            ContextProfile::new(Vec::new()).unwrap_err(),
            ProfileError::EmptyContext
        );
        let mut s = service(1, "Unlisted");
        s.keywords = kw("pizza delivery");
        let ctx = ContextProfile::new([s]).unwrap();
        assert!(matches!(
            establish_profile(&ctx, &identity_map(&["Food"]), wide()),
            Err(ProfileError::UnmappableCategory { .. })
        ));
        let corpus = InterestCorpus::from_pairs([
            ("Food", vec!["pizza".to_string(), "chef".to_string()]),
            ("Cars", vec!["engine".to_string()]),
        ])
        .unwrap();
        let map = CategoryMap::new(BTreeMap::new(), Some(corpus));
        let p = establish_profile(&ctx, &map, wide()).unwrap();
        assert_eq!(p.weights().keys().collect::<Vec<_>>(), vec![&cat("Food")]);
    }

    fn profile(weights: &[(&str, f64)], bounds: WeightBounds) -> InterestProfile {
        InterestProfile::from_weights(weights.iter().map(|(k, w)| (cat(k), *w)), bounds).unwrap()
    }

    #[test]
    fn empty_activity_is_identity() {
        let p = profile(&[("A", 0.4)], wide());
        let out = apply_activity(&p, &BTreeMap::new(), &BTreeMap::new(), wide()).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn activity_clamps_at_zeta_max() {
        let bounds = WeightBounds::new(0.0, 0.6).unwrap();
        let p = profile(&[("A", 0.4)], bounds);
        let brw = BTreeMap::from([(cat("A"), 0.3)]);
        let out = apply_activity(&p, &brw, &BTreeMap::new(), bounds).unwrap();
        assert_eq!(out.weight(&cat("A")), Some(0.6));
        assert_eq!(out.state(), ProfileState::Evolution);
        assert_eq!(out.browsing().get(&cat("A")), Some(&0.3));
    }

    #[test]
    fn activity_is_element_wise_sum() {
        let p = profile(&[("A", 0.1), ("B", 0.2), ("C", 0.3)], wide());
        let brw = BTreeMap::from([(cat("A"), 0.05), (cat("C"), 0.25)]);
        let int = BTreeMap::from([(cat("B"), 0.15), (cat("C"), 0.1)]);
        let out = apply_activity(&p, &brw, &int, wide()).unwrap();
        // oracle: per-element addition
        for (k, base) in [("A", 0.1), ("B", 0.2), ("C", 0.3)] {
            let want = base
                + brw.get(&cat(k)).copied().unwrap_or(0.0)
                + int.get(&cat(k)).copied().unwrap_or(0.0);
            assert!((out.weight(&cat(k)).unwrap() - want).abs() < 1e-15, "{k}");
        }
        let bad = BTreeMap::from([(cat("A"), 1.5)]);
        assert!(matches!(
            apply_activity(&p, &bad, &BTreeMap::new(), wide()),
            Err(ProfileError::WeightOutOfBounds { .. })
        ));
    }

    #[test]
    fn evolve_examples() {
        let p = profile(&[("A", 0.2)], wide());
        let same = evolve(&p, &ProfileDelta::new(1)).unwrap();
        assert_eq!(same.weights(), p.weights());
        assert_eq!(same.state(), p.state());
        assert_eq!(same.slot(), 1);
        assert_eq!(same.timestamp(), DEFAULT_SLOT_SECS);

        let out = evolve(&p, &ProfileDelta::new(1).category("A", 0.1)).unwrap();
        assert!((out.weight(&cat("A")).unwrap() - 0.3).abs() < 1e-15);
        assert!(matches!(
            evolve(&out, &ProfileDelta::new(1).category("A", 0.1)),
            Err(ProfileError::StaleDelta { delta: 1, current: 1 })
        ));
    }

    #[test]
    fn five_deltas_follow_prefix_sums() {
        let bounds = WeightBounds::new(0.0, 0.6).unwrap();
        let mut p = profile(&[("A", 0.05)], bounds);
        let changes = [0.1, 0.05, 0.2, 0.15, 0.3];
        let mut prefix = 0.05;
        for (slot, c) in changes.iter().enumerate() {
            p = evolve(&p, &ProfileDelta::new(slot as u64 + 1).category("A", *c)).unwrap();
            prefix += c;
            let want = f64::min(prefix, 0.6);
            assert!((p.weight(&cat("A")).unwrap() - want).abs() < 1e-12);
            assert!(p.weight(&cat("A")).unwrap() <= 0.6);
        }
    }

    fn ctx3() -> (ContextProfile, CategoryMap) {
        let ctx = ContextProfile::new([service(1, "X"), service(2, "Y"), service(3, "Z")]).unwrap();
        let map = CategoryMap::new(
            BTreeMap::from([
                (cat("X"), cat("A")),
                (cat("Y"), cat("B")),
                (cat("Z"), cat("A")),
            ]),
            None,
        );
        (ctx, map)
    }

    #[test]
    fn usage_examples() {
        let (ctx, map) = ctx3();
        let p = profile(&[("A", 0.1), ("B", 0.1)], wide());
        let zero = UsageRecord {
            per_service_usage: BTreeMap::from([(ServiceId(1, 1), 0.0)]),
            slot: 1,
        };
        assert_eq!(incorporate_usage(&p, &zero, &ctx, &map).unwrap(), p);

        let one = UsageRecord {
            per_service_usage: BTreeMap::from([(ServiceId(1, 2), 0.5)]),
            slot: 1,
        };
        let out = incorporate_usage(&p, &one, &ctx, &map).unwrap();
        assert!((out.weight(&cat("B")).unwrap() - 0.6).abs() < 1e-15);

        // map-then-sum oracle: services 1 and 3 both land on A
        let mixed = UsageRecord {
            per_service_usage: BTreeMap::from([
                (ServiceId(1, 1), 0.2),
                (ServiceId(1, 2), 0.1),
                (ServiceId(1, 3), 0.3),
            ]),
            slot: 1,
        };
        let out = incorporate_usage(&p, &mixed, &ctx, &map).unwrap();
        assert!((out.weight(&cat("A")).unwrap() - (0.1 + 0.2 + 0.3)).abs() < 1e-12);
        assert!((out.weight(&cat("B")).unwrap() - (0.1 + 0.1)).abs() < 1e-12);

        let bad = UsageRecord {
            per_service_usage: BTreeMap::from([(ServiceId(1, 1), 1.5)]),
            slot: 1,
        };
        assert!(incorporate_usage(&p, &bad, &ctx, &map).is_err());
        let unknown = UsageRecord {
            per_service_usage: BTreeMap::from([(ServiceId(9, 9), 0.5)]),
            slot: 1,
        };
        assert_eq!(
            incorporate_usage(&p, &unknown, &ctx, &map).unwrap_err(),
            ProfileError::UnknownService(ServiceId(9, 9))
        );
    }

    #[test]
    fn state_detection() {
        let p = profile(&[("A", 0.2), ("B", 0.3)], wide());
        assert_eq!(detect_state(&[p.clone()], 1e-6, 3), ProfileState::Initiation);
        let flat = vec![p.clone(); 4];
        assert_eq!(detect_state(&flat, 1e-6, 3), ProfileState::Stable);
        let mut moved = flat.clone();
        let bumped = profile(&[("A", 0.2 + 2e-6), ("B", 0.3)], wide());
        moved[2] = bumped;
        assert_eq!(detect_state(&moved, 1e-6, 3), ProfileState::Evolution);
        // an older change outside the window does not count
        let mut old = vec![profile(&[("A", 0.9)], wide())];
        old.extend(flat);
        assert_eq!(detect_state(&old, 1e-6, 3), ProfileState::Stable);
    }

    fn arb_delta(keys: &'static [&'static str]) -> impl Strategy<Value = Vec<(usize, f64)>> {
        proptest::collection::vec((0..keys.len(), 0.001f64..0.05), 0..4)
    }

    const KEYS: &[&str] = &["A", "B", "C"];

    fn delta_from(slot: u64, changes: &[(usize, f64)]) -> ProfileDelta {
        let mut d = ProfileDelta::new(slot);
        for &(k, c) in changes {
            let e = d.category_changes.entry(cat(KEYS[k])).or_insert(0.0);
            *e = (*e + c).min(0.6);
        }
        d
    }

    proptest! {
        #[test]
        fn weights_stay_in_bounds(steps in proptest::collection::vec((arb_delta(KEYS), 0.0f64..1.0), 1..12)) {
            let bounds = WeightBounds::new(0.02, 0.6).unwrap();
            let mut p = profile(&[("A", 0.1)], bounds);
            let (ctx, map) = ctx3();
            for (slot, (changes, usage)) in steps.iter().enumerate() {
                p = evolve(&p, &delta_from(slot as u64 + 1, changes)).unwrap();
                let u = UsageRecord { per_service_usage: BTreeMap::from([(ServiceId(1, 2), *usage)]), slot: slot as u64 };
                p = incorporate_usage(&p, &u, &ctx, &map).unwrap();
                for &w in p.weights().values() {
                    prop_assert!(w > 0.0 && w <= 0.6);
                }
            }
        }

        #[test]
        fn evolve_batches_when_no_clamp_fires(a in arb_delta(KEYS), b in arb_delta(KEYS)) {
            let p = profile(&[("A", 0.1), ("B", 0.1), ("C", 0.1)], wide());
            let d1 = delta_from(1, &a);
            let d2 = delta_from(2, &b);
            let mut sum = d1.clone();
            sum.slot = 2;
            for (k, c) in &d2.category_changes {
                *sum.category_changes.entry(k.clone()).or_insert(0.0) += c;
            }
            let step = evolve(&evolve(&p, &d1).unwrap(), &d2).unwrap();
            let batch = evolve(&p, &sum).unwrap();
            for k in KEYS {
                let x = step.weight(&cat(k)).unwrap();
                let y = batch.weight(&cat(k)).unwrap();
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn weight_is_monotone_under_positive_support(changes in proptest::collection::vec(0.001f64..0.2, 1..10)) {
            let mut p = profile(&[("A", 0.05)], WeightBounds::new(0.0, 0.6).unwrap());
            for (slot, c) in changes.iter().enumerate() {
                let before = p.weight(&cat("A")).unwrap();
                p = evolve(&p, &ProfileDelta::new(slot as u64 + 1).category("A", *c)).unwrap();
                prop_assert!(p.weight(&cat("A")).unwrap() >= before);
            }
        }

        #[test]
        fn detect_state_ignores_key_order(ws in proptest::collection::vec(proptest::collection::vec(0.01f64..0.5, 3), 1..6)) {
            let fwd: Vec<_> = ws.iter().map(|w| profile(&[("A", w[0]), ("B", w[1]), ("C", w[2])], wide())).collect();
            // same content inserted in reverse order
            let rev: Vec<_> = ws.iter().map(|w| profile(&[("C", w[2]), ("B", w[1]), ("A", w[0])], wide())).collect();
            prop_assert_eq!(detect_state(&fwd, 1e-6, 3), detect_state(&rev, 1e-6, 3));
        }
    }
}
