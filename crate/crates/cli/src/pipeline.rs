//! The end-to-end run: profile, privatize, monitor, match, fetch, classify
//! and report, with a digest log of every stage.

use std::collections::BTreeSet;
use std::sync::Arc;

use dualring_core::classifier::{write_class_report, write_dp_effect, write_frequency_report, write_timing_report};
use dualring_core::dp::write_noisy_csv;
use dualring_core::entropy::{write_monitor_log, Action, MonitorRecord};
use dualring_core::ids::CategoryId;
use dualring_core::profile::{write_profile, ProfileDocument};
use dualring_net::Quorum;

use crate::config::{Input, RunConfig};
use crate::error::CliError;
use crate::seed::{digest, digest_all, substream};
use crate::stages::*;

pub const STAGES_FILE: &str = "stages.csv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageLog {
    pub stage: String,
    pub input_digest: String,
    pub output_digest: String,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub stages: Vec<StageLog>,
    pub reestablishments: usize,
    pub actions: Vec<MonitorRecord>,
    pub selected: Vec<usize>,
    /// Every fetched record equals the database row at its index.
    pub fetch_ok: bool,
    /// Output files, relative to the pipeline directory. Timing-free.
    pub files: Vec<(String, Vec<u8>)>,
}

impl PipelineReport {
    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    pub fn count(&self, stage: &str) -> usize {
        self.stages.iter().filter(|s| s.stage == stage).count()
    }
}

struct Log {
    stages: Vec<StageLog>,
}

impl Log {
    fn push(&mut self, stage: &str, inputs: &[&[u8]], outputs: &[&[u8]], detail: impl Into<String>) {
        self.stages.push(StageLog {
            stage: stage.to_owned(),
            input_digest: digest_all(inputs.iter().copied()),
            output_digest: digest_all(outputs.iter().copied()),
            detail: detail.into(),
        });
    }

    fn to_csv(&self) -> String {
        let mut s = String::from("stage,input_digest,output_digest,detail\n");
        for l in &self.stages {
            s.push_str(&format!("{},{},{},{}\n", l.stage, l.input_digest, l.output_digest, l.detail));
        }
        s
    }
}

fn profile_bytes(p: &dualring_core::profile::InterestProfile) -> Vec<u8> {
    write_profile(&ProfileDocument::new(p.clone())).into_bytes()
}

fn ids(set: &BTreeSet<CategoryId>) -> String {
    set.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(";")
}

pub fn run(cfg: &RunConfig) -> Result<PipelineReport, CliError> {
    let seed = cfg.require_seed()?;
    let mut log = Log { stages: Vec::new() };
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();

    let raw = |i: Input| read_bytes(&cfg.input(i));
    let (services_raw, catmap_raw, corpus_raw) = (raw(Input::Services)?, raw(Input::CatMap)?, raw(Input::Corpus)?);
    let (deltas_raw, usage_raw) = (raw(Input::Deltas)?, raw(Input::Usage)?);
    let mapping = load_mapping(cfg).map_err(|e| e.at("establish"))?;
    let corpus = load_corpus(cfg).map_err(|e| e.at("establish"))?;
    let mut ctx = load_services(cfg).map_err(|e| e.at("establish"))?;
    let mut deltas = load_deltas(cfg).map_err(|e| e.at("evolve"))?;
    let mut usage = load_usage(cfg).map_err(|e| e.at("usage"))?;

    let mut priv_rng = substream(seed, "privatize");
    let mut reestablishments = 0;
    let mut actions = Vec::new();
    let mut inputs: Vec<Vec<u8>> = vec![services_raw, catmap_raw, corpus_raw, deltas_raw, usage_raw];
    let released = loop {
        let history = profile_history(cfg, &ctx, &mapping, &deltas, &usage)?;
        let established = profile_bytes(&history[0]);
        let refs: Vec<&[u8]> = inputs.iter().map(Vec::as_slice).collect();
        log.push("establish", &refs[..3], &[&established], format!("interests={}", history[0].weights().len()));
        let profile = history.last().unwrap().clone();
        let evolved = profile_bytes(&profile);
        log.push(
            "evolve",
            &[&established, refs[3], refs[4]],
            &[&evolved],
            format!("slots={} state={}", history.len() - 1, profile.state().as_str()),
        );

        let private = privatize(cfg, &profile, &mut priv_rng)?;
        let private_bytes = profile_bytes(&private);
        log.push("privatize", &[&evolved], &[&private_bytes], format!("epsilon={}", cfg.dp.epsilon));

        let m = monitor(cfg, &private)?;
        let mut mlog = Vec::new();
        write_monitor_log(&mut mlog, std::slice::from_ref(&m.record)).map_err(|e| CliError::io(e.to_string()))?;
        let out = profile_bytes(&m.profile);
        let mut detail = format!("action={}", m.record.action.as_str());
        if let Some(re) = &m.reevaluate {
            detail.push_str(&format!(" removed={}", ids(&re.removed)));
        }
        log.push("entropy", &[&private_bytes], &[&mlog, &out], detail);
        actions.push(m.record);

        match m.reevaluate {
            Some(re) if reestablishments == 0 => {
                reestablishments += 1;
                let (c, d, u) = without_removed(&ctx, &mapping, &deltas, &usage, &re.removed)?;
                ctx = c;
                deltas = d;
                usage = u;
                inputs[0] = dualring_core::profile::write_services(&ctx).into_bytes();
                inputs[3] = dualring_core::profile::write_deltas(&deltas).into_bytes();
                inputs[4] = dualring_core::profile::write_usage(&usage).into_bytes();
                log.push(
                    "re-establish",
                    &[&out],
                    &[&inputs[0], &inputs[3], &inputs[4]],
                    format!("removed={}", ids(&re.removed)),
                );
            }
            _ => {
                files.push(("profile.drp".into(), evolved));
                files.push(("profile.private.drp".into(), private_bytes));
                break m.profile;
            }
        }
    };
    let released_bytes = profile_bytes(&released);
    files.push(("profile.released.drp".into(), released_bytes.clone()));
    let monitor_csv = csv_bytes(|o| write_monitor_log(o, &actions))?;
    files.push(("monitor.csv".into(), monitor_csv));

    let population_raw = raw(Input::Population)?;
    let population = load_profiles(&cfg.input(Input::Population)).map_err(|e| e.at("aggregate"))?;
    let categories: Vec<CategoryId> = corpus.docs().map(|(id, _)| CategoryId::from(id)).collect();
    let count_service = ctx
        .services()
        .next()
        .map(|s| s.id)
        .ok_or_else(|| CliError::io("empty service list").at("aggregate"))?;
    let (noisy, most) = aggregate_stats(cfg, population, &categories, count_service, &mut substream(seed, "aggregate"))
        .map_err(|e| e.at("aggregate"))?;
    let noisy_csv = csv_bytes(|o| write_noisy_csv(o, &noisy))?;
    log.push(
        "aggregate",
        &[&population_raw],
        &[&noisy_csv],
        format!("most_requested={}", most.as_ref().map_or("-", |c| c.as_str())),
    );
    files.push(("noisy_stats.csv".into(), noisy_csv));

    let catalog_raw = raw(Input::Catalog)?;
    let catalog = load_catalog(cfg).map_err(|e| e.at("match"))?;
    let selected = select(cfg, &released, &catalog, &corpus)?;
    let mut selected_csv = String::from("rank,index\n");
    for (r, i) in selected.iter().enumerate() {
        selected_csv.push_str(&format!("{r},{i}\n"));
    }
    log.push("match", &[&released_bytes, &catalog_raw], &[selected_csv.as_bytes()], format!("ads={}", selected.len()));
    files.push(("selected.csv".into(), selected_csv.into_bytes()));

    let db_path = cfg.input(Input::Db);
    let db = Arc::new(load_database(&db_path).map_err(|e| e.at("pir"))?);
    let db_digest = digest(&db.to_bytes());
    let t = transports(cfg, Some(db.clone())).map_err(|e| e.at("pir"))?;
    let fetched = fetch(cfg, t, &selected, Quorum::All, &mut substream(seed, "pir"))?;
    let mut fetch_ok = true;
    let mut fetch_csv = String::from("index,record_sha256,matches_direct\n");
    for (i, rec) in selected.iter().zip(&fetched.records) {
        let ok = *rec == db.record(*i);
        fetch_ok &= ok;
        fetch_csv.push_str(&format!("{i},{},{ok}\n", digest(rec)));
    }
    log.push(
        "pir",
        &[db_digest.as_bytes(), files.last().unwrap().1.as_slice()],
        &[fetch_csv.as_bytes()],
        format!(
            "up_bytes={} down_bytes={} responders={}",
            fetched.stats.up_bytes, fetched.stats.down_bytes, fetched.stats.responders
        ),
    );
    if !fetch_ok {
        return Err(CliError::new(crate::error::ErrorKind::Protocol, "fetched record differs from the database").at("pir"));
    }
    files.push(("fetch.csv".into(), fetch_csv.into_bytes()));

    let log_raw = raw(Input::Impressions)?;
    let tax_raw = raw(Input::Taxonomy)?;
    let personas_raw = raw(Input::Personas)?;
    let impressions = load_impressions(cfg).map_err(|e| e.at("classify"))?;
    let taxonomy = load_taxonomy(cfg).map_err(|e| e.at("classify"))?;
    let pre = load_precategorized(cfg).map_err(|e| e.at("classify"))?;
    let personas = load_personas(cfg).map_err(|e| e.at("classify"))?;
    let classified = run_classify(cfg, &impressions, &taxonomy, &pre, &personas)?;
    let classes = csv_bytes(|o| write_class_report(o, &classified))?;
    log.push("classify", &[&log_raw, &tax_raw, &personas_raw], &[&classes], format!("impressions={}", impressions.len()));
    files.push(("classes.csv".into(), classes));

    let effect = run_dp_effect(cfg, &impressions, &taxonomy, &pre, &personas, &mut substream(seed, "dp-effect"))?;
    let dp_csv = csv_bytes(|o| write_dp_effect(o, &effect))?;
    log.push("dp-effect", &[&log_raw, &personas_raw], &[&dp_csv], format!("epsilon={}", cfg.dp.epsilon));
    files.push(("dp_effect.csv".into(), dp_csv));

    let timing = run_timing(cfg, &impressions)?;
    let timing_csv = csv_bytes(|o| write_timing_report(o, &timing))?;
    log.push("timing", &[&log_raw], &[&timing_csv], format!("groups={}", timing.len()));
    files.push(("timing.csv".into(), timing_csv));

    let freq = run_frequency(&impressions);
    let freq_csv = csv_bytes(|o| write_frequency_report(o, &freq))?;
    log.push("frequency", &[&log_raw], &[&freq_csv], "");
    files.push(("frequency.csv".into(), freq_csv));

    files.push((STAGES_FILE.into(), log.to_csv().into_bytes()));
    Ok(PipelineReport {
        stages: log.stages,
        reestablishments,
        actions,
        selected,
        fetch_ok,
        files,
    })
}

/// Whether any monitor record applied apoptosis.
pub fn apoptosed(report: &PipelineReport) -> usize {
    report.actions.iter().filter(|r| r.action == Action::Apoptose).count()
}
