//! One function per subcommand. Each returns a short summary for stdout.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use dualring_core::classifier::{write_class_report, write_dp_effect, write_frequency_report, write_timing_report};
use dualring_core::dp::write_noisy_csv;
use dualring_core::entropy::write_monitor_log;
use dualring_core::ids::CategoryId;
use dualring_core::profile::{
    detect_state, evolve_with, incorporate_usage, parse_profiles, write_profile, EvolveConfig, InterestProfile,
    ProfileDocument,
};
use dualring_net::bench::{run_bench, write_bench_csv, BenchCell, BenchConfig};
use dualring_net::{PirServer, Quorum, TcpServer};

use crate::cli::{Command, EntropyCmd, PirCmd, ProfileCmd, ReportCmd};
use crate::config::{Input, RunConfig};
use crate::error::{CliError, DataResult};
use crate::fixtures;
use crate::pipeline;
use crate::seed::{digest, substream};
use crate::stages::*;

pub const PROFILE_FILE: &str = "profile.drp";
pub const HISTORY_FILE: &str = "history.drp";
pub const PRIVATE_FILE: &str = "profile.private.drp";
pub const RELEASED_FILE: &str = "profile.released.drp";
pub const SELECTED_FILE: &str = "selected.csv";

pub fn run(cfg: &RunConfig, command: &Command) -> Result<String, CliError> {
    match command {
        Command::GenFixtures => gen_fixtures(cfg),
        Command::Profile(p) => profile(cfg, p),
        Command::Privatize(a) => privatize_cmd(cfg, a.input.as_deref()),
        Command::Entropy(EntropyCmd::Monitor(a)) => monitor_cmd(cfg, a.input.as_deref()),
        Command::Match(a) => match_cmd(cfg, a.input.as_deref()),
        Command::Pir(p) => pir(cfg, p),
        Command::Classify => classify_cmd(cfg),
        Command::Report(r) => report(cfg, r),
        Command::Pipeline => pipeline_cmd(cfg),
    }
}

fn gen_fixtures(cfg: &RunConfig) -> Result<String, CliError> {
    let set = fixtures::generate(cfg).map_err(|e| e.at("gen-fixtures"))?;
    let dir = cfg.fixtures_dir();
    fixtures::write_set(&dir, &set)?;
    Ok(format!("wrote {} files to {} ({} records)", set.files.len(), dir.display(), set.num_records))
}

fn read_profile(path: &Path) -> Result<InterestProfile, CliError> {
    let docs = load_profiles(path)?;
    docs.into_iter()
        .last()
        .map(|d| d.profile)
        .ok_or_else(|| CliError::file(path, "no profile"))
}

fn profile_text(p: &InterestProfile) -> String {
    write_profile(&ProfileDocument::new(p.clone()))
}

fn write_history(cfg: &RunConfig, history: &[InterestProfile]) -> Result<(), CliError> {
    let text: String = history.iter().map(profile_text).collect();
    write_file(&out_path(cfg, HISTORY_FILE), text.as_bytes())?;
    write_file(&out_path(cfg, PROFILE_FILE), profile_text(history.last().unwrap()).as_bytes())
}

fn read_history(cfg: &RunConfig) -> Result<Vec<InterestProfile>, CliError> {
    let p = out_path(cfg, HISTORY_FILE);
    let docs = parse_profiles(&read_text(&p)?).map_err(|e| CliError::file(&p, e))?;
    if docs.is_empty() {
        return Err(CliError::file(&p, "empty history; run `profile establish` first"));
    }
    Ok(docs.into_iter().map(|d| d.profile).collect())
}

fn profile(cfg: &RunConfig, cmd: &ProfileCmd) -> Result<String, CliError> {
    match cmd {
        ProfileCmd::Establish => {
            let ctx = load_services(cfg)?;
            let mapping = load_mapping(cfg)?;
            let h = profile_history(cfg, &ctx, &mapping, &[], &[])?;
            write_history(cfg, &h)?;
            Ok(format!("established {} interests", h[0].weights().len()))
        }
        ProfileCmd::Evolve => {
            let mut h = read_history(cfg)?;
            let evolve = EvolveConfig {
                change_cap: None,
                slot_secs: cfg.profile.slot_secs,
            };
            let mut deltas = load_deltas(cfg)?;
            deltas.sort_by_key(|d| d.slot);
            for d in &deltas {
                let next = evolve_with(h.last().unwrap(), d, evolve).data("evolve")?;
                h.push(next);
            }
            write_history(cfg, &h)?;
            Ok(format!("applied {} deltas", deltas.len()))
        }
        ProfileCmd::Usage => {
            let mut h = read_history(cfg)?;
            let ctx = load_services(cfg)?;
            let mapping = load_mapping(cfg)?;
            let mut usage = load_usage(cfg)?;
            usage.sort_by_key(|u| u.slot);
            for u in &usage {
                let next = incorporate_usage(h.last().unwrap(), u, &ctx, &mapping).data("usage")?;
                h.push(next);
            }
            write_history(cfg, &h)?;
            Ok(format!("applied {} usage records", usage.len()))
        }
        ProfileCmd::State => {
            let mut h = read_history(cfg)?;
            let state = detect_state(&h, cfg.profile.stable_tol, cfg.profile.stable_window);
            let last = h.pop().unwrap().with_state(state);
            h.push(last);
            write_history(cfg, &h)?;
            Ok(state.as_str().to_owned())
        }
    }
}

fn input_or(cfg: &RunConfig, input: Option<&Path>, default: &str) -> PathBuf {
    input.map(Path::to_path_buf).unwrap_or_else(|| out_path(cfg, default))
}

fn privatize_cmd(cfg: &RunConfig, input: Option<&Path>) -> Result<String, CliError> {
    let seed = cfg.require_seed()?;
    let p = read_profile(&input_or(cfg, input, PROFILE_FILE))?;
    let private = privatize(cfg, &p, &mut substream(seed, "privatize"))?;
    write_file(&out_path(cfg, PRIVATE_FILE), profile_text(&private).as_bytes())?;
    let mut summary = format!("privatized {} interests at epsilon {}", private.weights().len(), cfg.dp.epsilon);
    let pop_path = cfg.input(Input::Population);
    if pop_path.exists() {
        let population = load_profiles(&pop_path)?;
        let corpus = load_corpus(cfg)?;
        let categories: Vec<CategoryId> = corpus.docs().map(|(id, _)| CategoryId::from(id)).collect();
        let service = load_services(cfg)?
            .services()
            .next()
            .map(|s| s.id)
            .ok_or_else(|| CliError::io("empty service list"))?;
        let (noisy, _) = aggregate_stats(cfg, population, &categories, service, &mut substream(seed, "aggregate"))?;
        write_file(&out_path(cfg, "noisy_stats.csv"), &csv_bytes(|o| write_noisy_csv(o, &noisy))?)?;
        summary.push_str("; wrote noisy_stats.csv");
    }
    Ok(summary)
}

fn monitor_cmd(cfg: &RunConfig, input: Option<&Path>) -> Result<String, CliError> {
    let p = read_profile(&input_or(cfg, input, PRIVATE_FILE))?;
    let m = monitor(cfg, &p)?;
    write_file(&out_path(cfg, "monitor.csv"), &csv_bytes(|o| write_monitor_log(o, std::slice::from_ref(&m.record)))?)?;
    write_file(&out_path(cfg, RELEASED_FILE), profile_text(&m.profile).as_bytes())?;
    let mut s = format!(
        "H={:.6} H_max={:.6} action={}",
        m.record.state.h,
        m.record.state.h_max,
        m.record.action.as_str()
    );
    if let Some(re) = m.reevaluate {
        let ids: Vec<&str> = re.removed.iter().map(|c| c.as_str()).collect();
        s.push_str(&format!(" removed={}; re-establish without them", ids.join(";")));
    }
    Ok(s)
}

fn match_cmd(cfg: &RunConfig, input: Option<&Path>) -> Result<String, CliError> {
    let default = if out_path(cfg, RELEASED_FILE).exists() { RELEASED_FILE } else { PRIVATE_FILE };
    let p = read_profile(&input_or(cfg, input, default))?;
    let selected = select(cfg, &p, &load_catalog(cfg)?, &load_corpus(cfg)?)?;
    let mut csv = String::from("rank,index\n");
    for (r, i) in selected.iter().enumerate() {
        csv.push_str(&format!("{r},{i}\n"));
    }
    write_file(&out_path(cfg, SELECTED_FILE), csv.as_bytes())?;
    Ok(format!("selected {selected:?}"))
}

fn read_selected(cfg: &RunConfig) -> Result<Vec<usize>, CliError> {
    let p = out_path(cfg, SELECTED_FILE);
    let text = read_text(&p)?;
    text.lines()
        .skip(1)
        .map(|l| {
            l.split(',')
                .nth(1)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| CliError::file(&p, format!("bad line {l:?}")))
        })
        .collect()
}

fn pir(cfg: &RunConfig, cmd: &PirCmd) -> Result<String, CliError> {
    match cmd {
        PirCmd::Serve { bind, db } => {
            let path = db.clone().unwrap_or_else(|| cfg.input(Input::Db));
            let db = Arc::new(load_database(&path)?);
            let server = Arc::new(PirServer::new(db));
            let mut running = Vec::new();
            for addr in bind {
                let s = TcpServer::bind(server.clone(), addr.as_str())
                    .map_err(|e| CliError::io(format!("bind {addr}: {e}")))?;
                println!("listening on {}", s.local_addr());
                running.push(s);
            }
            for s in running {
                s.wait();
            }
            Ok("servers stopped".into())
        }
        PirCmd::Fetch { endpoint, index, db } => {
            let seed = cfg.require_seed()?;
            let mut cfg = cfg.clone();
            if !endpoint.is_empty() {
                cfg.pir.endpoints = endpoint.clone();
            }
            let indices = if index.is_empty() { read_selected(&cfg)? } else { index.clone() };
            let local = if cfg.pir.endpoints.is_empty() {
                let path = db.clone().unwrap_or_else(|| cfg.input(Input::Db));
                Some(Arc::new(load_database(&path)?))
            } else {
                None
            };
            let t = transports(&cfg, local)?;
            let f = fetch(&cfg, t, &indices, Quorum::Minimum, &mut substream(seed, "pir"))?;
            let mut csv = String::from("index,record_bytes,record_sha256\n");
            for (i, r) in indices.iter().zip(&f.records) {
                csv.push_str(&format!("{i},{},{}\n", r.len(), digest(r)));
                write_file(&out_path(&cfg, &format!("records/{i}.bin")), r)?;
            }
            write_file(&out_path(&cfg, "fetch.csv"), csv.as_bytes())?;
            let s = f.stats;
            Ok(format!(
                "fetched {} records from {} servers: up {} B, down {} B, encode {:.4}s server {:.4}s decode {:.4}s total {:.4}s",
                indices.len(),
                s.responders,
                s.up_bytes,
                s.down_bytes,
                s.encode_s,
                s.server_s,
                s.decode_s,
                s.total_s
            ))
        }
        PirCmd::Bench => bench(cfg),
    }
}

fn bench(cfg: &RunConfig) -> Result<String, CliError> {
    let seed = cfg.require_seed()?;
    let b = &cfg.bench;
    let mut cells = Vec::new();
    let mut skipped = 0;
    for &db_bytes in &b.db_sizes {
        for &record_bytes in &b.record_sizes {
            for &servers in &b.servers {
                for &privacy in &b.t {
                    for &word_bits in &b.word_bits {
                        for &depth in &b.depths {
                            for &ads in &b.ads {
                                let cell = BenchCell {
                                    db_bytes,
                                    record_bytes,
                                    servers,
                                    privacy,
                                    word_bits,
                                    depth,
                                    ads,
                                };
                                if cell.num_records() > 0 && cell.params().is_ok() {
                                    cells.push(cell);
                                } else {
                                    skipped += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(CliError::config("the bench grid has no valid cell"));
    }
    let config = BenchConfig {
        cells,
        repetitions: b.repetitions,
        seed,
    };
    let rows = run_bench(&config).map_err(|e| match e {
        dualring_net::bench::BenchError::Net(n) => CliError::from(n).at("bench"),
        other => CliError::new(crate::error::ErrorKind::Protocol, other.to_string()).at("bench"),
    })?;
    write_file(&out_path(cfg, "bench.csv"), &csv_bytes(|o| write_bench_csv(o, &rows, b.timings))?)?;
    let exact = rows.iter().filter(|r| r.bytes_match_model()).count();
    Ok(format!("{} cells ({skipped} skipped), {exact} match the cost model exactly", rows.len()))
}

struct ClassifyInputs {
    log: Vec<dualring_core::classifier::AdImpression>,
    taxonomy: dualring_core::classifier::Taxonomy,
    pre: std::collections::BTreeMap<String, dualring_core::classifier::CategoryNode>,
    personas: std::collections::BTreeMap<String, InterestProfile>,
}

fn classify_inputs(cfg: &RunConfig) -> Result<ClassifyInputs, CliError> {
    let personas = if cfg.input(Input::Personas).exists() {
        load_personas(cfg)?
    } else {
        Default::default()
    };
    Ok(ClassifyInputs {
        log: load_impressions(cfg)?,
        taxonomy: load_taxonomy(cfg)?,
        pre: load_precategorized(cfg)?,
        personas,
    })
}

fn classify_cmd(cfg: &RunConfig) -> Result<String, CliError> {
    let i = classify_inputs(cfg)?;
    let c = run_classify(cfg, &i.log, &i.taxonomy, &i.pre, &i.personas)?;
    write_file(&out_path(cfg, "classes.csv"), &csv_bytes(|o| write_class_report(o, &c))?)?;
    Ok(format!("classified {} impressions", i.log.len()))
}

fn report(cfg: &RunConfig, cmd: &ReportCmd) -> Result<String, CliError> {
    match cmd {
        ReportCmd::DpEffect => {
            let seed = cfg.require_seed()?;
            let i = classify_inputs(cfg)?;
            let e = run_dp_effect(cfg, &i.log, &i.taxonomy, &i.pre, &i.personas, &mut substream(seed, "dp-effect"))?;
            write_file(&out_path(cfg, "dp_effect.csv"), &csv_bytes(|o| write_dp_effect(o, &e))?)?;
            Ok("wrote dp_effect.csv".into())
        }
        ReportCmd::Timing => {
            let log = load_impressions(cfg)?;
            let rows = run_timing(cfg, &log)?;
            write_file(&out_path(cfg, "timing.csv"), &csv_bytes(|o| write_timing_report(o, &rows))?)?;
            Ok(format!("wrote timing.csv ({} groups)", rows.len()))
        }
        ReportCmd::Frequency => {
            let log = load_impressions(cfg)?;
            let r = run_frequency(&log);
            write_file(&out_path(cfg, "frequency.csv"), &csv_bytes(|o| write_frequency_report(o, &r))?)?;
            Ok("wrote frequency.csv".into())
        }
    }
}

fn pipeline_cmd(cfg: &RunConfig) -> Result<String, CliError> {
    let r = pipeline::run(cfg)?;
    let dir = out_path(cfg, "pipeline");
    for (name, bytes) in &r.files {
        write_file(&dir.join(name), bytes)?;
    }
    Ok(format!(
        "{} stages, {} re-establishment(s), selected {:?}; reports in {}",
        r.stages.len(),
        r.reestablishments,
        r.selected,
        dir.display()
    ))
}
