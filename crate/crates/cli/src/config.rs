//! Run configuration: built-in defaults, then a TOML file, then flags.

use std::path::{Path, PathBuf};

use dualring_core::classifier::DEFAULT_OVERLAP_S;
use dualring_core::pir::PirParams;
use dualring_core::profile::{WeightBounds, DEFAULT_SLOT_SECS, DEFAULT_STABLE_TOL, DEFAULT_STABLE_WINDOW};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub paths: Paths,
    pub profile: ProfileConfig,
    pub dp: DpConfig,
    pub entropy: EntropyConfig,
    pub pir: PirConfig,
    pub fixtures: FixtureConfig,
    pub bench: BenchSweep,
    pub classify: ClassifyOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            out: PathBuf::from("out"),
            paths: Paths::default(),
            profile: ProfileConfig::default(),
            dp: DpConfig::default(),
            entropy: EntropyConfig::default(),
            pir: PirConfig::default(),
            fixtures: FixtureConfig::default(),
            bench: BenchSweep::default(),
            classify: ClassifyOptions::default(),
        }
    }
}

/// Input files. Unset entries default to the file `gen-fixtures` writes
/// under `<out>/fixtures`.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub fixtures: Option<PathBuf>,
    pub services: Option<PathBuf>,
    pub catmap: Option<PathBuf>,
    pub deltas: Option<PathBuf>,
    pub usage: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub db: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    pub precategorized: Option<PathBuf>,
    pub impressions: Option<PathBuf>,
    pub personas: Option<PathBuf>,
    pub population: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Input {
    Services,
    CatMap,
    Deltas,
    Usage,
    Corpus,
    Catalog,
    Db,
    Taxonomy,
    Precategorized,
    Impressions,
    Personas,
    Population,
}

impl Input {
    pub const ALL: [Input; 12] = [
        Input::Services,
        Input::CatMap,
        Input::Deltas,
        Input::Usage,
        Input::Corpus,
        Input::Catalog,
        Input::Db,
        Input::Taxonomy,
        Input::Precategorized,
        Input::Impressions,
        Input::Personas,
        Input::Population,
    ];

    pub fn file_name(&self) -> &'static str {
        match self {
            Input::Services => "services.txt",
            Input::CatMap => "catmap.txt",
            Input::Deltas => "deltas.txt",
            Input::Usage => "usage.txt",
            Input::Corpus => "corpus.txt",
            Input::Catalog => "catalog.txt",
            Input::Db => "ads.db",
            Input::Taxonomy => "taxonomy.txt",
            Input::Precategorized => "precategorized.csv",
            Input::Impressions => "impressions.csv",
            Input::Personas => "personas.drp",
            Input::Population => "population.drp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub zeta_min: f64,
    pub zeta_max: f64,
    pub start_timestamp: i64,
    pub slot_secs: i64,
    pub stable_tol: f64,
    pub stable_window: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            zeta_min: 0.05,
            zeta_max: 0.6,
            start_timestamp: 1_600_000_000,
            slot_secs: DEFAULT_SLOT_SECS,
            stable_tol: DEFAULT_STABLE_TOL,
            stable_window: DEFAULT_STABLE_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpConfig {
    pub epsilon: f64,
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig { epsilon: 1.0 }
    }
}

/// Monitor thresholds as fractions of the maximum entropy.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyConfig {
    pub apoptosis: f64,
    pub evaporation: f64,
    pub target: f64,
    /// Attributes removed per apoptosis.
    pub apoptose_k: usize,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig {
            apoptosis: 0.3,
            evaporation: 0.6,
            target: 0.8,
            apoptose_k: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PirConfig {
    pub servers: usize,
    pub t: usize,
    pub word_bits: u32,
    pub depth: usize,
    pub ads: usize,
    pub timeout_s: u64,
    /// Remote servers; empty means an in-process cluster.
    pub endpoints: Vec<String>,
}

impl Default for PirConfig {
    fn default() -> Self {
        PirConfig {
            servers: 3,
            t: 1,
            word_bits: 10,
            depth: 1,
            ads: 2,
            timeout_s: 30,
            endpoints: Vec::new(),
        }
    }
}

impl PirConfig {
    pub fn params(&self) -> Result<PirParams, CliError> {
        PirParams::new(self.servers, self.t, self.word_bits, self.depth).map_err(|e| CliError::config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureConfig {
    pub db_size: u64,
    pub record_size: usize,
    pub user_services: usize,
    pub population: usize,
    pub slots: u64,
    pub experiments: usize,
    pub impressions_per_experiment: usize,
    /// Planted percentages of random, targeted, contextual and generic ads.
    pub ratios: [f64; 4],
    pub experiment_secs: i64,
    /// Builds a user whose profile is dominated by one interest.
    pub forced_apoptosis: bool,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            db_size: 1 << 20,
            record_size: 16384,
            user_services: 8,
            population: 40,
            slots: 3,
            experiments: 2,
            impressions_per_experiment: 200,
            ratios: [10.0, 30.0, 20.0, 40.0],
            experiment_secs: 86_400,
            forced_apoptosis: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSweep {
    pub db_sizes: Vec<u64>,
    pub record_sizes: Vec<usize>,
    pub servers: Vec<usize>,
    pub t: Vec<usize>,
    pub word_bits: Vec<u32>,
    pub depths: Vec<usize>,
    pub ads: Vec<usize>,
    pub repetitions: usize,
    /// Write timing columns; off gives a reproducible report.
    pub timings: bool,
}

impl Default for BenchSweep {
    fn default() -> Self {
        BenchSweep {
            db_sizes: vec![1 << 20],
            record_sizes: vec![16384],
            servers: vec![3],
            t: vec![1],
            word_bits: vec![10],
            depths: vec![1],
            ads: vec![1],
            repetitions: 3,
            timings: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyOptions {
    pub overlap_s: i64,
    pub full_path: bool,
    /// Profile categories weighted above this count for targeting.
    pub floor: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            overlap_s: DEFAULT_OVERLAP_S,
            full_path: false,
            floor: 0.1,
        }
    }
}

/// Values given on the command line; `None` leaves the file or default value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub servers: Option<usize>,
    pub t: Option<usize>,
    pub word_bits: Option<u32>,
    pub depth: Option<usize>,
    pub ads: Option<usize>,
    pub db_size: Option<u64>,
    pub record_size: Option<usize>,
    pub overlap: Option<i64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))
    }

    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::config(format!("cannot read config {}: {e}", p.display())))?;
                RunConfig::from_toml(&text)?
            }
            None => RunConfig::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = Some(v);
        }
        if let Some(v) = o.epsilon {
            self.dp.epsilon = v;
        }
        if let Some(v) = o.servers {
            self.pir.servers = v;
            self.bench.servers = vec![v];
        }
        if let Some(v) = o.t {
            self.pir.t = v;
            self.bench.t = vec![v];
        }
        if let Some(v) = o.word_bits {
            self.pir.word_bits = v;
            self.bench.word_bits = vec![v];
        }
        if let Some(v) = o.depth {
            self.pir.depth = v;
            self.bench.depths = vec![v];
        }
        if let Some(v) = o.ads {
            self.pir.ads = v;
            self.bench.ads = vec![v];
        }
        if let Some(v) = o.db_size {
            self.fixtures.db_size = v;
            self.bench.db_sizes = vec![v];
        }
        if let Some(v) = o.record_size {
            self.fixtures.record_size = v;
            self.bench.record_sizes = vec![v];
        }
        if let Some(v) = o.overlap {
            self.classify.overlap_s = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
    }

    /// Parameter checks that do not need any input file.
    pub fn validate(&self) -> Result<(), CliError> {
        self.bounds()?;
        if !(self.dp.epsilon > 0.0 && self.dp.epsilon.is_finite()) {
            return Err(CliError::config(format!("epsilon must be positive, got {}", self.dp.epsilon)));
        }
        let e = &self.entropy;
        if !(0.0 <= e.apoptosis && e.apoptosis < e.evaporation && e.evaporation <= e.target && e.target <= 1.0) {
            return Err(CliError::config(
                "entropy thresholds need 0 <= apoptosis < evaporation <= target <= 1",
            ));
        }
        if e.apoptose_k == 0 {
            return Err(CliError::config("apoptose_k must be at least 1"));
        }
        self.pir.params()?;
        if self.pir.ads == 0 || self.pir.ads > u16::MAX as usize {
            return Err(CliError::config("ads must be between 1 and 65535"));
        }
        let f = &self.fixtures;
        if f.record_size == 0 || f.db_size < f.record_size as u64 {
            return Err(CliError::config("db_size must be at least one record"));
        }
        if f.ratios.iter().any(|r| !(0.0..=100.0).contains(r)) || f.ratios.iter().sum::<f64>() > 100.0 + 1e-9 {
            return Err(CliError::config("fixture ratios must be percentages summing to at most 100"));
        }
        if f.user_services == 0 || f.experiments == 0 {
            return Err(CliError::config("fixtures need at least one service and one experiment"));
        }
        if self.classify.overlap_s < 0 {
            return Err(CliError::config("overlap must be non-negative"));
        }
        if self.bench.repetitions == 0 {
            return Err(CliError::config("bench repetitions must be at least 1"));
        }
        Ok(())
    }

    pub fn bounds(&self) -> Result<WeightBounds, CliError> {
        WeightBounds::new(self.profile.zeta_min, self.profile.zeta_max).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::config("this command is stochastic and needs --seed or `seed` in the config"))
    }

    pub fn fixtures_dir(&self) -> PathBuf {
        self.paths.fixtures.clone().unwrap_or_else(|| self.out.join("fixtures"))
    }

    pub fn input(&self, which: Input) -> PathBuf {
        let p = &self.paths;
        let set = match which {
            Input::Services => &p.services,
            Input::CatMap => &p.catmap,
            Input::Deltas => &p.deltas,
            Input::Usage => &p.usage,
            Input::Corpus => &p.corpus,
            Input::Catalog => &p.catalog,
            Input::Db => &p.db,
            Input::Taxonomy => &p.taxonomy,
            Input::Precategorized => &p.precategorized,
            Input::Impressions => &p.impressions,
            Input::Personas => &p.personas,
            Input::Population => &p.population,
        };
        set.clone().unwrap_or_else(|| self.fixtures_dir().join(which.file_name()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn parsing_never_panics(text in "[a-z_\\[\\]=\"0-9. \n-]{0,120}") {
            let _ = RunConfig::from_toml(&text).and_then(|c| c.validate());
        }

        #[test]
        fn flags_always_win(seed in any::<u64>(), eps in 0.01f64..100.0, servers in 2usize..9) {
            let mut cfg = RunConfig::from_toml("seed = 1\n[dp]\nepsilon = 3.0\n[pir]\nservers = 4\n").unwrap();
            cfg.apply(&Overrides { seed: Some(seed), epsilon: Some(eps), servers: Some(servers), ..Default::default() });
            prop_assert_eq!(cfg.seed, Some(seed));
            prop_assert_eq!(cfg.dp.epsilon, eps);
            prop_assert_eq!(cfg.pir.servers, servers);
            prop_assert_eq!(&cfg.bench.servers, &vec![servers]);
        }
    }

    #[test]
    fn precedence_flags_over_file_over_defaults() {
        let mut cfg = RunConfig::from_toml("seed = 5\n[dp]\nepsilon = 0.5\n[pir]\nservers = 5\n").unwrap();
        assert_eq!(cfg.pir.t, 1);
        assert_eq!(cfg.pir.servers, 5);
        cfg.apply(&Overrides {
            epsilon: Some(2.0),
            ..Default::default()
        });
        assert_eq!(cfg.dp.epsilon, 2.0);
        assert_eq!(cfg.seed, Some(5));
        assert_eq!(cfg.pir.servers, 5);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml("bogus = 1\n").is_err());
        let mut cfg = RunConfig::default();
        cfg.dp.epsilon = 0.0;
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
        let mut cfg = RunConfig::default();
        cfg.pir.t = 3;
        assert!(cfg.validate().is_err());
        assert!(RunConfig::default().require_seed().is_err());
    }

    #[test]
    fn default_inputs_live_under_fixtures() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.input(Input::Db), Path::new("out/fixtures/ads.db"));
        let cfg = RunConfig::from_toml("[paths]\ndb = \"x.db\"\n").unwrap();
        assert_eq!(cfg.input(Input::Db), Path::new("x.db"));
    }
}
