use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::Overrides;

#[derive(Debug, Parser)]
#[command(name = "dualring", version, about = "Private ad profiling and PIR toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Root seed for every random stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML config file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// Number of PIR servers, l.
    #[arg(long, global = true)]
    pub servers: Option<usize>,
    /// Privacy threshold: coalitions up to this size learn nothing.
    #[arg(long, global = true)]
    pub t: Option<usize>,
    /// Field word size w in bits.
    #[arg(long, global = true)]
    pub word_bits: Option<u32>,
    /// Recursion depth d.
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    /// Ads fetched per query.
    #[arg(long, global = true)]
    pub ads: Option<usize>,
    /// Database size in bytes.
    #[arg(long, global = true)]
    pub db_size: Option<u64>,
    /// Record size in bytes.
    #[arg(long, global = true)]
    pub record_size: Option<usize>,
    /// Random-ad overlap window in seconds.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub overlap: Option<i64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl Global {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            epsilon: self.epsilon,
            servers: self.servers,
            t: self.t,
            word_bits: self.word_bits,
            depth: self.depth,
            ads: self.ads,
            db_size: self.db_size,
            record_size: self.record_size,
            overlap: self.overlap,
            out: self.out.clone(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic inputs into the fixtures directory.
    GenFixtures,
    #[command(subcommand)]
    Profile(ProfileCmd),
    /// Privatize a profile and the population's aggregate statistics.
    Privatize(InputArg),
    #[command(subcommand)]
    Entropy(EntropyCmd),
    /// Rank catalog services against a profile.
    Match(InputArg),
    #[command(subcommand)]
    Pir(PirCmd),
    /// Split the impression log into ad classes.
    Classify,
    #[command(subcommand)]
    Report(ReportCmd),
    /// Run every stage end to end.
    Pipeline,
}

#[derive(Debug, Clone, Args)]
pub struct InputArg {
    /// Profile to read instead of the default.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ProfileCmd {
    /// Derive the initial interest profile from the service list.
    Establish,
    /// Apply the activity deltas slot by slot.
    Evolve,
    /// Fold in service usage records.
    Usage,
    /// Detect the state of the recorded history.
    State,
}

#[derive(Debug, Subcommand)]
pub enum EntropyCmd {
    /// Measure privacy loss and apply evaporation or apoptosis.
    Monitor(InputArg),
}

#[derive(Debug, Subcommand)]
pub enum PirCmd {
    /// Serve the database over TCP until interrupted.
    Serve {
        /// Listen address; repeat to run several servers in one process.
        #[arg(long, required = true)]
        bind: Vec<String>,
        #[arg(long)]
        db: Option<PathBuf>,
    },
    /// Retrieve records privately.
    Fetch {
        /// Server address; repeat once per server. Without any, the servers run in process.
        #[arg(long)]
        endpoint: Vec<String>,
        /// Record index; repeat for several. Defaults to the matcher's selection.
        #[arg(long)]
        index: Vec<usize>,
        #[arg(long)]
        db: Option<PathBuf>,
    },
    /// Sweep the configured grid and write bench.csv.
    Bench,
}

#[derive(Debug, Subcommand)]
pub enum ReportCmd {
    DpEffect,
    Timing,
    Frequency,
}
