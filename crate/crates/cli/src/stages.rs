//! Loading inputs and the stage computations shared by the subcommands and
//! the pipeline.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use dualring_core::classifier::{
    classify, dp_effect_report, frequency_report, parse_impressions, parse_precategorized, parse_taxonomy,
    profile_categories, timing_stats, AdImpression, CategoryNode, ClassifiedAds, ClassifyConfig, DpEffect,
    FrequencyBins, FrequencyReport, Taxonomy, TimingStats,
};
use dualring_core::dp::{answer, argmax, perturb, privatize_profile, sensitivity, NoisyOutput, ProfileDatabase, QueryKind, StatQuery};
use dualring_core::entropy::{
    apoptose, decide, evaporate, privacy_loss, Action, AttributeDistribution, MonitorPolicy, MonitorRecord, ReEvaluate,
};
use dualring_core::ids::{CategoryId, ServiceId};
use dualring_core::matcher::{parse_catalog, parse_corpus, select_services, CatalogEntry, InterestCorpus};
use dualring_core::pir::DatabaseMatrix;
use dualring_core::profile::{
    detect_state, establish_profile, evolve_with, incorporate_usage, parse_category_map, parse_deltas,
    parse_profiles, parse_services, parse_usage, CategoryMap, ContextProfile, EvolveConfig, InterestProfile,
    ProfileDelta, ProfileDocument, UsageRecord,
};
use dualring_net::client::{as_transports, in_process_cluster, FetchStats, Tcp, Transport};
use dualring_net::{PirClient, PirServer, Quorum};
use rand::Rng;

use crate::config::{Input, RunConfig};
use crate::error::{CliError, DataResult};
use crate::fixtures::WINDOWS_FILE;

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::file(path, e))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::file(path, e))
}

fn parsed<T, E: std::fmt::Display>(path: &Path, r: Result<T, E>) -> Result<T, CliError> {
    r.map_err(|e| CliError::file(path, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::file(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::file(path, e))
}

/// Runs a CSV writer into memory.
pub fn csv_bytes<E: std::fmt::Display>(f: impl FnOnce(&mut Vec<u8>) -> Result<(), E>) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    f(&mut out).map_err(|e| CliError::io(e.to_string()))?;
    Ok(out)
}

pub fn load_corpus(cfg: &RunConfig) -> Result<InterestCorpus, CliError> {
    let p = cfg.input(Input::Corpus);
    parsed(&p, parse_corpus(&read_text(&p)?))
}

pub fn load_mapping(cfg: &RunConfig) -> Result<CategoryMap, CliError> {
    let p = cfg.input(Input::CatMap);
    let table = parsed(&p, parse_category_map(&read_text(&p)?))?;
    Ok(CategoryMap::new(table, Some(load_corpus(cfg)?)))
}

pub fn load_services(cfg: &RunConfig) -> Result<ContextProfile, CliError> {
    let p = cfg.input(Input::Services);
    parsed(&p, parse_services(&read_text(&p)?))
}

pub fn load_deltas(cfg: &RunConfig) -> Result<Vec<ProfileDelta>, CliError> {
    let p = cfg.input(Input::Deltas);
    parsed(&p, parse_deltas(&read_text(&p)?))
}

pub fn load_usage(cfg: &RunConfig) -> Result<Vec<UsageRecord>, CliError> {
    let p = cfg.input(Input::Usage);
    parsed(&p, parse_usage(&read_text(&p)?))
}

pub fn load_catalog(cfg: &RunConfig) -> Result<Vec<CatalogEntry>, CliError> {
    let p = cfg.input(Input::Catalog);
    parsed(&p, parse_catalog(&read_text(&p)?))
}

pub fn load_database(path: &Path) -> Result<DatabaseMatrix, CliError> {
    let f = std::fs::File::open(path).map_err(|e| CliError::file(path, e))?;
    parsed(path, DatabaseMatrix::read_from(std::io::BufReader::new(f)))
}

pub fn load_taxonomy(cfg: &RunConfig) -> Result<Taxonomy, CliError> {
    let p = cfg.input(Input::Taxonomy);
    let nodes = parsed(&p, parse_taxonomy(&read_text(&p)?))?;
    parsed(&p, Taxonomy::new(nodes))
}

/// A missing precategorized table is treated as empty.
pub fn load_precategorized(cfg: &RunConfig) -> Result<BTreeMap<String, CategoryNode>, CliError> {
    let p = cfg.input(Input::Precategorized);
    if !p.exists() {
        return Ok(BTreeMap::new());
    }
    parsed(&p, parse_precategorized(&read_text(&p)?))
}

pub fn load_impressions(cfg: &RunConfig) -> Result<Vec<AdImpression>, CliError> {
    let p = cfg.input(Input::Impressions);
    parsed(&p, parse_impressions(&read_text(&p)?))
}

pub fn load_profiles(path: &Path) -> Result<Vec<ProfileDocument>, CliError> {
    parsed(path, parse_profiles(&read_text(path)?))
}

/// Personas keyed by their temp_id, which names the profile in the log.
pub fn load_personas(cfg: &RunConfig) -> Result<BTreeMap<String, InterestProfile>, CliError> {
    let p = cfg.input(Input::Personas);
    let mut out = BTreeMap::new();
    for d in load_profiles(&p)? {
        let id = d
            .temp_id
            .ok_or_else(|| CliError::file(&p, "persona without temp_id"))?;
        out.insert(id, d.profile);
    }
    Ok(out)
}

/// Experiment windows written next to the log; without that file each
/// experiment spans its first to last arrival.
pub fn load_windows(cfg: &RunConfig, log: &[AdImpression]) -> Result<BTreeMap<String, (i64, i64)>, CliError> {
    let p = cfg.fixtures_dir().join(WINDOWS_FILE);
    let mut out = BTreeMap::new();
    if p.exists() {
        let text = read_text(&p)?;
        for (i, line) in text.lines().enumerate().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || CliError::file(&p, format!("line {}: expected experiment_id,start,duration", i + 1));
            if f.len() != 3 {
                return Err(bad());
            }
            let s = f[1].parse().map_err(|_| bad())?;
            let d = f[2].parse().map_err(|_| bad())?;
            out.insert(f[0].to_owned(), (s, d));
        }
    }
    for imp in log {
        if !out.contains_key(&imp.experiment_id) {
            let arrivals = log.iter().filter(|i| i.experiment_id == imp.experiment_id).map(|i| i.arrival);
            let (lo, hi) = arrivals.fold((i64::MAX, i64::MIN), |(lo, hi), a| (lo.min(a), hi.max(a)));
            out.insert(imp.experiment_id.clone(), (lo, hi - lo));
        }
    }
    Ok(out)
}

/// Establishes the profile and applies deltas and usage slot by slot.
/// Returns every intermediate profile; the last carries the detected state.
pub fn profile_history(
    cfg: &RunConfig,
    ctx: &ContextProfile,
    mapping: &CategoryMap,
    deltas: &[ProfileDelta],
    usage: &[UsageRecord],
) -> Result<Vec<InterestProfile>, CliError> {
    let bounds = cfg.bounds()?;
    let evolve = EvolveConfig {
        change_cap: None,
        slot_secs: cfg.profile.slot_secs,
    };
    let mut p = establish_profile(ctx, mapping, bounds)
        .data("establish")?
        .with_timestamp(cfg.profile.start_timestamp);
    let mut history = vec![p.clone()];
    let slots: BTreeSet<u64> = deltas.iter().map(|d| d.slot).chain(usage.iter().map(|u| u.slot)).collect();
    for slot in slots {
        for d in deltas.iter().filter(|d| d.slot == slot) {
            p = evolve_with(&p, d, evolve).data("evolve")?;
        }
        for u in usage.iter().filter(|u| u.slot == slot) {
            p = incorporate_usage(&p, u, ctx, mapping).data("usage")?;
        }
        history.push(p.clone());
    }
    let state = detect_state(&history, cfg.profile.stable_tol, cfg.profile.stable_window);
    let last = history.pop().unwrap().with_state(state);
    history.push(last);
    Ok(history)
}

/// Drops removed interests from the activity inputs before re-establishing.
pub fn without_removed(
    ctx: &ContextProfile,
    mapping: &CategoryMap,
    deltas: &[ProfileDelta],
    usage: &[UsageRecord],
    removed: &BTreeSet<CategoryId>,
) -> Result<(ContextProfile, Vec<ProfileDelta>, Vec<UsageRecord>), CliError> {
    let ctx2 = ctx.without_interests(removed, mapping).data("re-establish")?;
    let deltas = deltas
        .iter()
        .map(|d| {
            let mut d = d.clone();
            for m in [&mut d.category_changes, &mut d.browsing_changes, &mut d.interaction_changes] {
                m.retain(|k, _| !removed.contains(k));
            }
            d
        })
        .collect();
    let usage = usage
        .iter()
        .map(|u| {
            let mut u = u.clone();
            u.per_service_usage.retain(|id, _| ctx2.get(*id).is_some());
            u
        })
        .collect();
    Ok((ctx2, deltas, usage))
}

pub fn privatize<R: Rng + ?Sized>(cfg: &RunConfig, p: &InterestProfile, rng: &mut R) -> Result<InterestProfile, CliError> {
    privatize_profile(p, cfg.dp.epsilon, cfg.bounds()?, rng).data("privatize")
}

pub struct MonitorOutcome {
    pub record: MonitorRecord,
    /// The profile to release after the action.
    pub profile: InterestProfile,
    pub reevaluate: Option<ReEvaluate>,
}

/// Measures the profile's entropy and applies the policy's action.
pub fn monitor(cfg: &RunConfig, p: &InterestProfile) -> Result<MonitorOutcome, CliError> {
    let dist = AttributeDistribution::from_profile(p).data("entropy")?;
    let state = privacy_loss(&dist, p.slot());
    let none = |profile: InterestProfile| MonitorOutcome {
        record: MonitorRecord {
            state,
            action: Action::None,
            alpha_or_k: 0.0,
        },
        profile,
        reevaluate: None,
    };
    if !(state.h_max > 0.0) {
        return Ok(none(p.clone()));
    }
    let e = &cfg.entropy;
    let policy = MonitorPolicy::from_fractions(state.h_max, e.apoptosis, e.evaporation, e.target).data("entropy")?;
    match decide(&state, &policy) {
        Action::None => Ok(none(p.clone())),
        Action::Evaporate => {
            let (mixed, alpha) = evaporate(&dist, policy.target).data("entropy")?;
            let total: f64 = p.weights().values().sum();
            let weights = mixed
                .labels()
                .iter()
                .cloned()
                .zip(mixed.probs().iter().map(|q| q * total))
                .collect();
            let profile = p.with_weights(weights, p.bounds()).data("entropy")?;
            Ok(MonitorOutcome {
                record: MonitorRecord {
                    state,
                    action: Action::Evaporate,
                    alpha_or_k: alpha,
                },
                profile,
                reevaluate: None,
            })
        }
        Action::Apoptose => {
            let k = e.apoptose_k.min(dist.len() - 1);
            let (profile, re) = apoptose(p, &dist, k).data("entropy")?;
            Ok(MonitorOutcome {
                record: MonitorRecord {
                    state,
                    action: Action::Apoptose,
                    alpha_or_k: k as f64,
                },
                profile,
                reevaluate: Some(re),
            })
        }
    }
}

/// Noisy aggregate statistics over a profile population.
pub fn aggregate_stats<R: Rng + ?Sized>(
    cfg: &RunConfig,
    population: Vec<ProfileDocument>,
    taxonomy: &[CategoryId],
    count_service: ServiceId,
    rng: &mut R,
) -> Result<(Vec<(QueryKind, NoisyOutput)>, Option<CategoryId>), CliError> {
    let db = ProfileDatabase::from_documents(population).data("aggregate")?;
    let mut out = Vec::new();
    let mut most = None;
    for q in [
        StatQuery::count_optin(count_service),
        StatQuery::histogram(taxonomy),
        StatQuery::most_requested(taxonomy),
    ] {
        let exact = answer(&db, &q, taxonomy).data("aggregate")?;
        let noisy = perturb(&exact, sensitivity(&q).data("aggregate")?, cfg.dp.epsilon, rng).data("aggregate")?;
        if q.kind == QueryKind::MostRequestedService {
            most = argmax(&noisy.values).map(|i| taxonomy[i].clone());
        }
        out.push((q.kind, noisy));
    }
    Ok((out, most))
}

pub fn select(
    cfg: &RunConfig,
    p: &InterestProfile,
    catalog: &[CatalogEntry],
    corpus: &InterestCorpus,
) -> Result<Vec<usize>, CliError> {
    select_services(p, catalog, corpus, cfg.pir.ads).data("match")
}

/// Endpoints from the config, or an in-process cluster over `db`.
pub fn transports(cfg: &RunConfig, db: Option<Arc<DatabaseMatrix>>) -> Result<Vec<Arc<dyn Transport>>, CliError> {
    let timeout = Duration::from_secs(cfg.pir.timeout_s);
    if cfg.pir.endpoints.is_empty() {
        let db = db.ok_or_else(|| CliError::config("no endpoints and no database"))?;
        let cluster = in_process_cluster(Arc::new(PirServer::new(db)), cfg.pir.servers);
        return Ok(as_transports(&cluster));
    }
    if cfg.pir.endpoints.len() != cfg.pir.servers {
        return Err(CliError::config(format!(
            "{} endpoints given for {} servers",
            cfg.pir.endpoints.len(),
            cfg.pir.servers
        )));
    }
    cfg.pir
        .endpoints
        .iter()
        .map(|e| {
            let addr = e
                .parse()
                .map_err(|_| CliError::config(format!("bad endpoint {e:?}, expected host:port")))?;
            Ok(Arc::new(Tcp::new(addr, timeout)) as Arc<dyn Transport>)
        })
        .collect()
}

pub struct Fetched {
    pub records: Vec<Vec<u8>>,
    pub stats: FetchStats,
}

pub fn fetch<R: Rng + ?Sized>(
    cfg: &RunConfig,
    transports: Vec<Arc<dyn Transport>>,
    indices: &[usize],
    quorum: Quorum,
    rng: &mut R,
) -> Result<Fetched, CliError> {
    let mut client = PirClient::new(transports, cfg.pir.params()?)
        .map_err(CliError::from)?
        .with_quorum(quorum)
        .with_timeout(Duration::from_secs(cfg.pir.timeout_s));
    let n = client.header().map_err(|e| CliError::from(e).at("pir"))?.num_records as usize;
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(CliError::config(format!("index {bad} outside a database of {n} records")).at("pir"));
    }
    let r = client.fetch(indices, rng).map_err(|e| CliError::from(e).at("pir"))?;
    Ok(Fetched {
        records: r.records,
        stats: r.stats,
    })
}

pub fn classify_config(cfg: &RunConfig, log: &[AdImpression], personas: &BTreeMap<String, InterestProfile>) -> ClassifyConfig {
    let mut c = ClassifyConfig::new(cfg.classify.overlap_s);
    c.full_path = cfg.classify.full_path;
    for (id, p) in personas {
        c.profile_categories.insert(id.clone(), profile_categories(p, cfg.classify.floor));
    }
    for imp in log {
        if let Ok(node) = CategoryNode::parse(imp.app_category.as_str()) {
            c.app_categories.entry(imp.app_category.clone()).or_insert_with(|| vec![node]);
        }
    }
    c
}

pub fn run_classify(
    cfg: &RunConfig,
    log: &[AdImpression],
    taxonomy: &Taxonomy,
    pre: &BTreeMap<String, CategoryNode>,
    personas: &BTreeMap<String, InterestProfile>,
) -> Result<ClassifiedAds, CliError> {
    classify(log, taxonomy, pre, &classify_config(cfg, log, personas)).data("classify")
}

/// Classification before and after privatizing every persona.
pub fn run_dp_effect<R: Rng + ?Sized>(
    cfg: &RunConfig,
    log: &[AdImpression],
    taxonomy: &Taxonomy,
    pre: &BTreeMap<String, CategoryNode>,
    personas: &BTreeMap<String, InterestProfile>,
    rng: &mut R,
) -> Result<DpEffect, CliError> {
    let mut pairs = BTreeMap::new();
    for (id, p) in personas {
        pairs.insert(id.clone(), (p.clone(), privatize(cfg, p, rng)?));
    }
    let base = classify_config(cfg, log, &BTreeMap::new());
    dp_effect_report(log, taxonomy, pre, &base, &pairs, cfg.classify.floor).data("dp-effect")
}

pub fn run_timing(cfg: &RunConfig, log: &[AdImpression]) -> Result<Vec<(String, String, TimingStats)>, CliError> {
    let windows = load_windows(cfg, log)?;
    let mut groups: BTreeMap<(String, String), Vec<AdImpression>> = BTreeMap::new();
    for imp in log {
        groups
            .entry((imp.experiment_id.clone(), imp.profile.clone()))
            .or_default()
            .push(imp.clone());
    }
    groups
        .into_iter()
        .map(|((exp, profile), imps)| {
            let (start, duration) = windows[&exp];
            let stats = timing_stats(&imps, start, duration).data("timing")?;
            Ok((exp, profile, stats))
        })
        .collect()
}

pub fn run_frequency(log: &[AdImpression]) -> FrequencyReport {
    frequency_report(log, FrequencyBins::default())
}

pub fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use dualring_core::profile::{Service, WeightBounds};

    fn cfg() -> RunConfig {
        RunConfig::default()
    }

    #[test]
    fn monitor_apoptoses_a_skewed_profile() {
        let mut c = cfg();
        c.entropy.apoptosis = 0.65;
        c.entropy.evaporation = 0.8;
        c.entropy.target = 0.9;
        let b = WeightBounds::new(0.05, 0.6).unwrap();
        let p = InterestProfile::from_weights([("A".into(), 0.6), ("B".into(), 0.077), ("C".into(), 0.077)], b).unwrap();
        let m = monitor(&c, &p).unwrap();
        assert_eq!(m.record.action, Action::Apoptose);
        assert_eq!(m.reevaluate.unwrap().removed, BTreeSet::from([CategoryId::from("A")]));
        let again = monitor(&c, &m.profile).unwrap();
        assert_eq!(again.record.action, Action::None);
    }

    #[test]
    fn evaporation_keeps_weights_in_bounds() {
        let mut c = cfg();
        c.entropy.apoptosis = 0.1;
        c.entropy.evaporation = 0.95;
        c.entropy.target = 0.97;
        let b = WeightBounds::new(0.05, 0.6).unwrap();
        let p = InterestProfile::from_weights([("A".into(), 0.6), ("B".into(), 0.1), ("C".into(), 0.3)], b).unwrap();
        let m = monitor(&c, &p).unwrap();
        assert_eq!(m.record.action, Action::Evaporate);
        let after = privacy_loss(&AttributeDistribution::from_profile(&m.profile).unwrap(), 0);
        assert!(after.h >= 0.97 * after.h_max - 1e-6);
    }

    #[test]
    fn removed_interests_leave_the_activity() {
        let table = BTreeMap::from([("M/A".into(), "A".into()), ("M/B".into(), "B".into())]);
        let mapping = CategoryMap::new(table, None);
        let svc = |i: u32, c: &str| Service {
            id: ServiceId(i, 0),
            category: c.into(),
            keywords: BTreeSet::from(["x".to_owned()]),
        };
        let ctx = ContextProfile::new([svc(1, "M/A"), svc(2, "M/B")]).unwrap();
        let deltas = vec![ProfileDelta::new(1).category("A", 0.1).category("B", 0.1)];
        let usage = vec![UsageRecord {
            per_service_usage: BTreeMap::from([(ServiceId(1, 0), 0.1), (ServiceId(2, 0), 0.1)]),
            slot: 1,
        }];
        let removed = BTreeSet::from([CategoryId::from("A")]);
        let (ctx2, d2, u2) = without_removed(&ctx, &mapping, &deltas, &usage, &removed).unwrap();
        assert_eq!(ctx2.len(), 1);
        assert_eq!(d2[0].category_changes.len(), 1);
        assert_eq!(u2[0].per_service_usage.len(), 1);
        let h = profile_history(&cfg(), &ctx2, &mapping, &d2, &u2).unwrap();
        assert_eq!(h.len(), 2);
        assert!(h.last().unwrap().weight(&"A".into()).is_none());
    }
}
