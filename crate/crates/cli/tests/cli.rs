use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_dualring");

fn dir(name: &str) -> PathBuf {
    let p = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&p);
    std::fs::create_dir_all(&p).unwrap();
    p
}

fn run(cwd: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(cwd).args(args).output().unwrap()
}

fn ok(cwd: &Path, args: &[&str]) -> String {
    let o = run(cwd, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read_dir_sorted(p: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(p)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().unwrap().is_file())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn fixtures_are_byte_identical_for_one_seed() {
    let d = dir("fixtures");
    ok(&d, &["--seed", "3", "--out", "a", "gen-fixtures"]);
    ok(&d, &["--seed", "3", "--out", "b", "gen-fixtures"]);
    ok(&d, &["--seed", "4", "--out", "c", "gen-fixtures"]);
    let a = read_dir_sorted(&d.join("a/fixtures"));
    assert_eq!(a.len(), 14);
    assert_eq!(a, read_dir_sorted(&d.join("b/fixtures")));
    assert_ne!(a, read_dir_sorted(&d.join("c/fixtures")));
}

#[test]
fn stage_by_stage_commands() {
    let d = dir("stages");
    fn with<'a>(rest: &[&'a str]) -> Vec<&'a str> {
        [&["--seed", "5"][..], rest].concat()
    }
    ok(&d, &with(&["--db-size", "65536", "--record-size", "16384", "gen-fixtures"]));
    assert!(ok(&d, &with(&["profile", "establish"])).contains("established"));
    ok(&d, &with(&["profile", "evolve"]));
    ok(&d, &with(&["profile", "usage"]));
    let state = ok(&d, &with(&["profile", "state"]));
    assert!(["Initiation", "Stable", "Evolution"].contains(&state.trim()));
    ok(&d, &with(&["privatize"]));
    assert!(d.join("out/noisy_stats.csv").exists());
    assert!(ok(&d, &with(&["entropy", "monitor"])).contains("action="));
    ok(&d, &with(&["--ads", "2", "match"]));
    let fetched = ok(&d, &with(&["pir", "fetch"]));
    assert!(fetched.contains("fetched 2 records"), "{fetched}");
    ok(&d, &with(&["classify"]));
    for r in ["dp-effect", "timing", "frequency"] {
        ok(&d, &with(&["report", r]));
    }
    let classes = std::fs::read_to_string(d.join("out/classes.csv")).unwrap();
    assert!(classes.starts_with("class,count,percent"));
    let fetch_csv = std::fs::read_to_string(d.join("out/fetch.csv")).unwrap();
    assert_eq!(fetch_csv.lines().count(), 3);
}

#[test]
fn flags_override_the_config_file() {
    let d = dir("precedence");
    std::fs::write(d.join("run.toml"), "seed = 1\nout = \"from-file\"\n[fixtures]\ndb_size = 65536\nrecord_size = 16384\n").unwrap();
    ok(&d, &["--config", "run.toml", "gen-fixtures"]);
    assert!(d.join("from-file/fixtures/ads.db").exists());
    let out = ok(&d, &["--config", "run.toml", "--out", "from-flag", "--record-size", "32768", "gen-fixtures"]);
    assert!(out.contains("(2 records)"), "{out}");
    assert!(d.join("from-flag/fixtures/ads.db").exists());
}

#[test]
fn exit_codes() {
    let d = dir("codes");
    assert_eq!(code(&run(&d, &["gen-fixtures"])), 2, "missing seed");
    assert_eq!(code(&run(&d, &["--seed", "1", "--epsilon", "-1", "gen-fixtures"])), 2);
    assert_eq!(code(&run(&d, &["--seed", "1", "--servers", "3", "--t", "3", "gen-fixtures"])), 2);
    std::fs::write(d.join("bad.toml"), "bogus_key = 1\n").unwrap();
    assert_eq!(code(&run(&d, &["--config", "bad.toml", "classify"])), 2);
    assert_eq!(code(&run(&d, &["--seed", "1", "pipeline"])), 3, "missing fixtures");
    ok(&d, &["--seed", "1", "--db-size", "65536", "gen-fixtures"]);
    std::fs::write(d.join("out/fixtures/impressions.csv"), "not,a,log\n").unwrap();
    assert_eq!(code(&run(&d, &["--seed", "1", "classify"])), 3);
    // nothing listens on these ports
    let o = run(
        &d,
        &["--seed", "1", "pir", "fetch", "--index", "0", "--endpoint", "127.0.0.1:1", "--endpoint", "127.0.0.1:2", "--endpoint", "127.0.0.1:3"],
    );
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn pipeline_runs_end_to_end_and_repeats_exactly() {
    let d = dir("pipeline");
    ok(&d, &["--seed", "9", "gen-fixtures"]);
    ok(&d, &["--seed", "9", "pipeline"]);
    let first = read_dir_sorted(&d.join("out/pipeline"));
    ok(&d, &["--seed", "9", "pipeline"]);
    assert_eq!(first, read_dir_sorted(&d.join("out/pipeline")));
    let stages = std::fs::read_to_string(d.join("out/pipeline/stages.csv")).unwrap();
    for s in ["establish", "privatize", "entropy", "match", "pir", "classify", "frequency"] {
        assert!(stages.lines().any(|l| l.starts_with(&format!("{s},"))), "{s} missing");
    }
    let fetch = std::fs::read_to_string(d.join("out/pipeline/fetch.csv")).unwrap();
    assert!(fetch.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn serve_and_fetch_over_tcp() {
    let d = dir("tcp");
    ok(&d, &["--seed", "2", "--db-size", "262144", "gen-fixtures"]);
    let mut server = Command::new(BIN)
        .current_dir(&d)
        .args(["pir", "serve", "--bind", "127.0.0.1:0", "--bind", "127.0.0.1:0", "--bind", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(server.stdout.take().unwrap()).lines();
    let addrs: Vec<String> = (0..3)
        .map(|_| lines.next().unwrap().unwrap().trim_start_matches("listening on ").to_owned())
        .collect();
    let mut args = vec!["--seed", "2", "pir", "fetch", "--index", "3", "--index", "7"];
    for a in &addrs {
        args.extend(["--endpoint", a.as_str()]);
    }
    let remote = ok(&d, &args);
    server.kill().unwrap();
    server.wait().unwrap();
    assert!(remote.contains("fetched 2 records"), "{remote}");
    let over_tcp = std::fs::read_to_string(d.join("out/fetch.csv")).unwrap();
    ok(&d, &["--seed", "2", "pir", "fetch", "--index", "3", "--index", "7"]);
    assert_eq!(over_tcp, std::fs::read_to_string(d.join("out/fetch.csv")).unwrap());
}

#[test]
fn bench_writes_one_row_per_valid_cell() {
    let d = dir("bench");
    std::fs::write(
        d.join("bench.toml"),
        "seed = 4\n[bench]\ndb_sizes = [65536, 131072]\nrecord_sizes = [16384]\nservers = [3, 4]\nt = [1, 3]\nword_bits = [10]\ndepths = [1]\nads = [1]\nrepetitions = 1\ntimings = false\n",
    )
    .unwrap();
    let out = ok(&d, &["--config", "bench.toml", "pir", "bench"]);
    // t = 3 needs at least 4 servers
    assert!(out.starts_with("6 cells (2 skipped), 6 match"), "{out}");
    let csv = std::fs::read_to_string(d.join("out/bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    let again = {
        ok(&d, &["--config", "bench.toml", "pir", "bench"]);
        std::fs::read_to_string(d.join("out/bench.csv")).unwrap()
    };
    assert_eq!(csv, again, "timing-free bench output is deterministic");
}
