//! Deterministic synthetic inputs: taxonomy, interest corpus, a user's
//! services and activity, a profile population, the ad catalog and its PIR
//! database, and impression logs with planted class ratios.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use dualring_core::classifier::{
    write_impressions, write_precategorized, write_taxonomy, AdClass, AdImpression, CategoryNode, Network,
};
use dualring_core::dp::fresh_temp_id;
use dualring_core::ids::{CategoryId, ServiceId};
use dualring_core::matcher::{tokenize, write_catalog, write_corpus, CatalogEntry, InterestCorpus};
use dualring_core::pir::DatabaseMatrix;
use dualring_core::profile::{
    establish_profile, write_category_map, write_deltas, write_profile, write_services, write_usage, CategoryMap,
    ContextProfile, InterestProfile, ProfileDelta, ProfileDocument, Service, UsageRecord, WeightBounds,
};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rand_chacha::ChaCha20Rng;

use crate::config::{FixtureConfig, Input, RunConfig};
use crate::error::CliError;
use crate::seed::substream;

type Sub = (&'static str, [&'static str; 4]);

/// Nine app categories with three subcategories each.
pub const TAXONOMY: [(&str, [Sub; 3]); 9] = [
    ("Games", [
        ("Puzzle", ["puzzle", "tiles", "brain", "riddle"]),
        ("Racing", ["racing", "cars", "speed", "track"]),
        ("Strategy", ["strategy", "tactics", "empire", "castle"]),
    ]),
    ("Business", [
        ("Accounting", ["accounting", "invoice", "ledger", "tax"]),
        ("Marketing", ["marketing", "brand", "campaign", "seo"]),
        ("Jobs", ["jobs", "career", "resume", "hiring"]),
    ]),
    ("Sports", [
        ("Soccer", ["soccer", "football", "league", "goal"]),
        ("Tennis", ["tennis", "racket", "court", "serve"]),
        ("Running", ["running", "marathon", "pace", "sneakers"]),
    ]),
    ("Travel", [
        ("Flights", ["flights", "airline", "airport", "fares"]),
        ("Hotels", ["hotels", "booking", "rooms", "resort"]),
        ("Maps", ["maps", "navigation", "routes", "gps"]),
    ]),
    ("Shopping", [
        ("Fashion", ["fashion", "clothing", "style", "apparel"]),
        ("Electronics", ["electronics", "gadgets", "laptop", "phone"]),
        ("Groceries", ["groceries", "food", "delivery", "market"]),
    ]),
    ("Health", [
        ("Fitness", ["fitness", "workout", "gym", "training"]),
        ("Nutrition", ["nutrition", "diet", "calories", "recipes"]),
        ("Sleep", ["sleep", "relax", "meditation", "calm"]),
    ]),
    ("Finance", [
        ("Banking", ["banking", "account", "mobile", "transfer"]),
        ("Investing", ["investing", "stocks", "portfolio", "trading"]),
        ("Insurance", ["insurance", "policy", "coverage", "claims"]),
    ]),
    ("News", [
        ("World", ["world", "headlines", "global", "politics"]),
        ("Technology", ["technology", "startups", "software", "innovation"]),
        ("Weather", ["weather", "forecast", "rain", "storm"]),
    ]),
    ("Music", [
        ("Streaming", ["streaming", "playlist", "songs", "radio"]),
        ("Instruments", ["instruments", "guitar", "piano", "lessons"]),
        ("Concerts", ["concerts", "tickets", "tour", "live"]),
    ]),
];

pub const SUBCATEGORIES: usize = 27;
const NETWORKS: [&str; 3] = ["AdMob", "MoPub", "InMobi"];

fn sub(k: usize) -> (&'static str, &'static Sub) {
    let (root, subs) = &TAXONOMY[k / 3];
    (root, &subs[k % 3])
}

/// Interest id of subcategory `k`, e.g. `Games/Puzzle`.
pub fn interest(k: usize) -> CategoryId {
    let (root, (name, _)) = sub(k);
    CategoryId::new(format!("{root}/{name}"))
}

pub fn market_category(k: usize) -> CategoryId {
    CategoryId::new(format!("Market/{}", sub(k).1 .0))
}

pub fn words(k: usize) -> &'static [&'static str; 4] {
    &sub(k).1 .1
}

pub fn taxonomy_nodes() -> Vec<CategoryNode> {
    let mut out = Vec::new();
    for (root, subs) in &TAXONOMY {
        out.push(CategoryNode::parse(root).unwrap());
        for (name, _) in subs {
            out.push(CategoryNode::parse(&format!("{root}/{name}")).unwrap());
        }
    }
    out
}

pub fn interest_corpus() -> InterestCorpus {
    let docs = (0..SUBCATEGORIES)
        .map(|k| {
            let id = interest(k);
            let mut doc = tokenize(id.as_str());
            doc.extend(words(k).iter().map(|w| w.to_string()));
            (id.to_string(), doc)
        })
        .collect();
    InterestCorpus::new(docs).expect("fixed corpus is valid")
}

/// The static part of the category map. The last subcategory of every third
/// root is left out so those services map through keyword similarity.
pub fn category_table() -> BTreeMap<CategoryId, CategoryId> {
    (0..SUBCATEGORIES)
        .filter(|k| k % 9 != 8)
        .map(|k| (market_category(k), interest(k)))
        .collect()
}

fn keywords<R: Rng + ?Sized>(rng: &mut R, k: usize, n: usize) -> BTreeSet<String> {
    let mut w: Vec<&str> = words(k).to_vec();
    w.shuffle(rng);
    w[..n].iter().map(|s| s.to_string()).collect()
}

fn service<R: Rng + ?Sized>(rng: &mut R, k: usize, j: u32) -> Service {
    let n = rng.random_range(2..=3);
    Service {
        id: ServiceId(k as u32, j),
        category: market_category(k),
        keywords: keywords(rng, k, n),
    }
}

/// The user's opted-in services, drawn mostly from a few favourite
/// subcategories. Forced mode puts twelve services in one subcategory and one
/// in each of two others.
pub fn user_services<R: Rng + ?Sized>(rng: &mut R, n: usize, forced: bool) -> ContextProfile {
    let mapped: Vec<usize> = (0..SUBCATEGORIES).filter(|k| k % 9 != 8).collect();
    let mut services = Vec::new();
    if forced {
        let mut picks = mapped.clone();
        picks.shuffle(rng);
        for j in 0..12 {
            services.push(service(rng, picks[0], j));
        }
        services.push(service(rng, picks[1], 0));
        services.push(service(rng, picks[2], 0));
    } else {
        let mut favourites: Vec<usize> = (0..SUBCATEGORIES).collect();
        favourites.shuffle(rng);
        favourites.truncate(4);
        let mut next: BTreeMap<usize, u32> = BTreeMap::new();
        for _ in 0..n {
            let k = if rng.random_bool(0.8) {
                favourites[rng.random_range(0..favourites.len())]
            } else {
                rng.random_range(0..SUBCATEGORIES)
            };
            let j = next.entry(k).or_insert(0);
            services.push(service(rng, k, *j));
            *j += 1;
        }
    }
    ContextProfile::new(services).expect("generated services are valid")
}

fn small_change<R: Rng + ?Sized>(rng: &mut R, max_thousandths: u32) -> f64 {
    rng.random_range(1..=max_thousandths) as f64 / 1000.0
}

/// One delta per slot over the user's interests. Forced mode only touches the
/// dominant interest so the skew survives evolution.
pub fn deltas<R: Rng + ?Sized>(rng: &mut R, interests: &[CategoryId], slots: u64, forced: bool) -> Vec<ProfileDelta> {
    (1..=slots)
        .map(|slot| {
            let mut d = ProfileDelta::new(slot);
            if forced {
                return d.category(interests[0].clone(), small_change(rng, 50));
            }
            for _ in 0..2 {
                let c = interests[rng.random_range(0..interests.len())].clone();
                d = match rng.random_range(0..3) {
                    0 => d.category(c, small_change(rng, 50)),
                    1 => d.browsing(c, small_change(rng, 50)),
                    _ => d.interaction(c, small_change(rng, 50)),
                };
            }
            d
        })
        .collect()
}

pub fn usage<R: Rng + ?Sized>(rng: &mut R, services: &[ServiceId], slots: u64) -> Vec<UsageRecord> {
    (1..=slots)
        .map(|slot| {
            let mut u = UsageRecord {
                slot,
                ..Default::default()
            };
            for &id in services {
                if rng.random_bool(0.5) {
                    u.per_service_usage.insert(id, rng.random_range(1..=40) as f64 / 1000.0);
                }
            }
            u
        })
        .collect()
}

/// Profiles of other users for the aggregate statistics.
pub fn population<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    mapping: &CategoryMap,
    bounds: WeightBounds,
    start: i64,
) -> Vec<ProfileDocument> {
    (0..n)
        .map(|_| {
            let count = rng.random_range(3..=8);
            let ctx = user_services(rng, count, false);
            let profile = establish_profile(&ctx, mapping, bounds)
                .expect("generated services map")
                .with_timestamp(start);
            ProfileDocument {
                profile,
                temp_id: Some(fresh_temp_id(rng)),
                optin: ctx.services().map(|s| s.id).collect(),
            }
        })
        .collect()
}

pub fn catalog<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<CatalogEntry> {
    (0..n)
        .map(|index| {
            let k = rng.random_range(0..SUBCATEGORIES);
            let count = rng.random_range(2..=3);
            CatalogEntry {
                index,
                service_id: ServiceId(k as u32, index as u32),
                keywords: keywords(rng, k, count),
            }
        })
        .collect()
}

/// Record `i` starts with a text description of catalog entry `i`; the rest
/// is seeded filler standing in for the ad creative.
pub fn database<R: RngCore + ?Sized>(
    rng: &mut R,
    catalog: &[CatalogEntry],
    record_size: usize,
    word_bits: u32,
) -> Result<DatabaseMatrix, CliError> {
    DatabaseMatrix::from_fn(catalog.len(), record_size, word_bits, |i, buf| {
        let e = &catalog[i];
        let kw: Vec<&str> = e.keywords.iter().map(String::as_str).collect();
        let text = format!("service {} {}\n", e.service_id, kw.join(" "));
        let n = text.len().min(buf.len());
        buf[..n].copy_from_slice(&text.as_bytes()[..n]);
        rng.fill_bytes(&mut buf[n..]);
    })
    .map_err(|e| CliError::config(e.to_string()))
}

/// Impression counts per class that the generator planted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Planted {
    pub counts: BTreeMap<AdClass, usize>,
}

impl Planted {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn percent(&self, class: AdClass) -> f64 {
        100.0 * self.counts.get(&class).copied().unwrap_or(0) as f64 / self.total().max(1) as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,count\n");
        for c in AdClass::ALL {
            out.push_str(&format!("{},{}\n", c.as_str(), self.counts.get(&c).copied().unwrap_or(0)));
        }
        out
    }
}

pub struct ImpressionFixture {
    pub impressions: Vec<AdImpression>,
    pub precategorized: BTreeMap<String, CategoryNode>,
    pub personas: Vec<ProfileDocument>,
    pub planted: Planted,
    /// Start and length of each experiment.
    pub windows: BTreeMap<String, (i64, i64)>,
}

enum Event {
    Pair(String),
    Single(usize, String),
}

fn node(k: usize) -> CategoryNode {
    CategoryNode::parse(interest(k).as_str()).unwrap()
}

/// Impression logs with planted class ratios. Each experiment has two
/// personas interested in one root each, an app category from a third root
/// and generic ads from a fourth. Classification with root matching and an
/// overlap of at least 30 s recovers the planted counts exactly.
pub fn impressions<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &FixtureConfig,
    bounds: WeightBounds,
    start: i64,
) -> ImpressionFixture {
    let mut out = ImpressionFixture {
        impressions: Vec::new(),
        precategorized: BTreeMap::new(),
        personas: Vec::new(),
        planted: Planted::default(),
        windows: BTreeMap::new(),
    };
    for c in AdClass::ALL {
        out.planted.counts.insert(c, 0);
    }
    let n = cfg.impressions_per_experiment;
    for e in 0..cfg.experiments {
        let exp = format!("E{e}");
        let mut roots: Vec<usize> = (0..TAXONOMY.len()).collect();
        roots.shuffle(rng);
        let (app, generic) = (roots[2], roots[3]);
        let names = [format!("{exp}-A"), format!("{exp}-B")];
        let persona_subs: Vec<[usize; 2]> = (0..2).map(|p| [roots[p] * 3, roots[p] * 3 + 1 + rng.random_range(0..2)]).collect();
        for p in 0..2 {
            let weak = generic * 3 + rng.random_range(0..3);
            let weights = [
                (interest(persona_subs[p][0]), 0.5),
                (interest(persona_subs[p][1]), 0.3),
                (interest(weak), 0.06),
            ];
            let profile = InterestProfile::from_weights(weights, bounds)
                .expect("persona weights are in bounds")
                .with_timestamp(start);
            out.personas.push(ProfileDocument {
                profile,
                temp_id: Some(names[p].clone()),
                optin: BTreeSet::new(),
            });
        }

        let pairs = (n as f64 * cfg.ratios[0] / 100.0 / 2.0).floor() as usize;
        let mut left = n - 2 * pairs;
        let targeted = ((n as f64 * cfg.ratios[1] / 100.0).round() as usize).min(left);
        left -= targeted;
        let contextual = ((n as f64 * cfg.ratios[2] / 100.0).round() as usize).min(left);
        let generic_n = left - contextual;
        *out.planted.counts.get_mut(&AdClass::Random).unwrap() += 2 * pairs;
        *out.planted.counts.get_mut(&AdClass::Targeted).unwrap() += targeted;
        *out.planted.counts.get_mut(&AdClass::Contextual).unwrap() += contextual;
        *out.planted.counts.get_mut(&AdClass::Generic).unwrap() += generic_n;

        let host = format!("https://ads{e}.example.net");
        let mut events = Vec::new();
        for i in 0..pairs {
            let url = format!("{host}/r/{i}");
            out.precategorized.insert(url.clone(), node(rng.random_range(0..SUBCATEGORIES)));
            events.push(Event::Pair(url));
        }
        // urls are reused up to three times by the same persona
        let mut single = |kind: &str, i: usize, pick: &mut dyn FnMut(&mut R, usize) -> Option<usize>| {
            let p = i % 2;
            let url = format!("{host}/{kind}/{p}/{}", i / 6);
            if let Some(k) = pick(rng, p) {
                out.precategorized.entry(url.clone()).or_insert_with(|| node(k));
            }
            Event::Single(p, url)
        };
        for i in 0..targeted {
            events.push(single("t", i, &mut |r, p| Some(persona_subs[p][r.random_range(0..2)])));
        }
        for i in 0..contextual {
            events.push(single("c", i, &mut |r, _| Some(app * 3 + r.random_range(0..3))));
        }
        for i in 0..generic_n {
            // every fourth generic url is left for keyword mapping, which finds nothing
            let unmapped = (i / 6) % 4 == 3;
            events.push(single("g", i, &mut |r, _| (!unmapped).then(|| generic * 3 + r.random_range(0..3))));
        }
        events.shuffle(rng);

        let slot = (cfg.experiment_secs / (events.len() as i64 + 1)).max(2);
        let duration = cfg.experiment_secs.max(slot * (events.len() as i64 + 1));
        out.windows.insert(exp.clone(), (start, duration));
        let app_category = CategoryId::new(TAXONOMY[app].0);
        for (i, ev) in events.into_iter().enumerate() {
            let base = start + i as i64 * slot + rng.random_range(0..slot / 2);
            let network = Network::parse(NETWORKS[rng.random_range(0..NETWORKS.len())]);
            let mut push = |p: usize, at: i64, url: &str| {
                out.impressions.push(AdImpression {
                    experiment_id: exp.clone(),
                    profile: names[p].clone(),
                    app_category: app_category.clone(),
                    arrival: at,
                    network: network.clone(),
                    ad_url: url.to_owned(),
                });
            };
            match ev {
                Event::Pair(url) => {
                    let first = rng.random_range(0..2);
                    let gap = rng.random_range(0..=(slot / 2 - 1).clamp(0, 30));
                    push(first, base, &url);
                    push(1 - first, base + gap, &url);
                }
                Event::Single(p, url) => push(p, base, &url),
            }
        }
    }
    out
}

/// Every fixture file, in memory.
pub struct FixtureSet {
    pub files: Vec<(String, Vec<u8>)>,
    pub planted: Planted,
    pub num_records: usize,
}

impl FixtureSet {
    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }
}

pub const PLANTED_FILE: &str = "planted.csv";
pub const WINDOWS_FILE: &str = "experiments.csv";

pub fn generate(cfg: &RunConfig) -> Result<FixtureSet, CliError> {
    let seed = cfg.require_seed()?;
    let f = &cfg.fixtures;
    let bounds = cfg.bounds()?;
    let start = cfg.profile.start_timestamp;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut put = |which: Input, bytes: Vec<u8>| files.push((which.file_name().to_owned(), bytes));

    let taxonomy = taxonomy_nodes();
    put(Input::Taxonomy, write_taxonomy(&taxonomy).into_bytes());
    let corpus = interest_corpus();
    put(Input::Corpus, write_corpus(&corpus).into_bytes());
    let table = category_table();
    put(Input::CatMap, write_category_map(&table).into_bytes());
    let mapping = CategoryMap::new(table, Some(corpus));

    let mut rng: ChaCha20Rng = substream(seed, "fixtures/user");
    let ctx = user_services(&mut rng, f.user_services, f.forced_apoptosis);
    put(Input::Services, write_services(&ctx).into_bytes());
    let mut interests: Vec<CategoryId> = Vec::new();
    for s in ctx.services() {
        let i = mapping.resolve(s).map_err(|e| CliError::config(e.to_string()))?;
        if !interests.contains(&i) {
            interests.push(i);
        }
    }
    if f.forced_apoptosis {
        // dominant interest first
        let dominant = mapping.resolve(ctx.services().max_by_key(|s| {
            ctx.services().filter(|o| o.category == s.category).count()
        }).unwrap()).unwrap();
        interests.retain(|i| *i != dominant);
        interests.insert(0, dominant);
    }
    put(Input::Deltas, write_deltas(&deltas(&mut rng, &interests, f.slots, f.forced_apoptosis)).into_bytes());
    let usage_ids: Vec<ServiceId> = if f.forced_apoptosis {
        ctx.services()
            .filter(|s| mapping.resolve(s).ok().as_ref() == Some(&interests[0]))
            .map(|s| s.id)
            .collect()
    } else {
        ctx.services().map(|s| s.id).collect()
    };
    put(Input::Usage, write_usage(&usage(&mut rng, &usage_ids, f.slots)).into_bytes());

    let mut rng = substream(seed, "fixtures/population");
    let pop = population(&mut rng, f.population, &mapping, bounds, start);
    put(Input::Population, pop.iter().map(write_profile).collect::<String>().into_bytes());

    let num_records = (f.db_size / f.record_size as u64) as usize;
    let mut rng = substream(seed, "fixtures/catalog");
    let cat = catalog(&mut rng, num_records);
    put(Input::Catalog, write_catalog(&cat).into_bytes());
    let mut rng = substream(seed, "fixtures/database");
    let db = database(&mut rng, &cat, f.record_size, cfg.pir.word_bits)?;
    put(Input::Db, db.to_bytes());
    drop(db);

    let mut rng = substream(seed, "fixtures/impressions");
    let imp = impressions(&mut rng, f, bounds, start);
    let mut log = Vec::new();
    write_impressions(&mut log, &imp.impressions).map_err(|e| CliError::io(e.to_string()))?;
    put(Input::Impressions, log);
    let mut pre = Vec::new();
    write_precategorized(&mut pre, &imp.precategorized).map_err(|e| CliError::io(e.to_string()))?;
    put(Input::Precategorized, pre);
    put(Input::Personas, imp.personas.iter().map(write_profile).collect::<String>().into_bytes());
    files.push((PLANTED_FILE.to_owned(), imp.planted.to_csv().into_bytes()));
    let mut windows = String::from("experiment_id,start_epoch_s,duration_s\n");
    for (exp, (s, d)) in &imp.windows {
        windows.push_str(&format!("{exp},{s},{d}\n"));
    }
    files.push((WINDOWS_FILE.to_owned(), windows.into_bytes()));

    Ok(FixtureSet {
        files,
        planted: imp.planted,
        num_records,
    })
}

pub fn write_set(dir: &Path, set: &FixtureSet) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::file(dir, e))?;
    for (name, bytes) in &set.files {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| CliError::file(&p, e))?;
    }
    Ok(())
}
