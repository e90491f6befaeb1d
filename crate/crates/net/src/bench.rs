//! Benchmark sweeps over in-process server clusters.

use std::io::{self, Write};
use std::sync::Arc;

use dualring_core::pir::{DatabaseMatrix, PirParams};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::client::{as_transports, in_process_cluster, NetError, PirClient, Quorum};
use crate::server::PirServer;

pub const RECORD_SIZES: [usize; 3] = [12288, 16384, 20480];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ItPir,
    Recursive(usize),
}

impl Scheme {
    pub fn for_depth(d: usize) -> Self {
        if d <= 1 {
            Scheme::ItPir
        } else {
            Scheme::Recursive(d)
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Scheme::ItPir => 1,
            Scheme::Recursive(d) => *d,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Scheme::ItPir => "ITPIR".into(),
            Scheme::Recursive(d) => format!("RPIR({d})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchCell {
    pub db_bytes: u64,
    pub record_bytes: usize,
    pub servers: usize,
    pub privacy: usize,
    pub word_bits: u32,
    pub depth: usize,
    pub ads: usize,
}

impl BenchCell {
    pub fn num_records(&self) -> usize {
        ((self.db_bytes / self.record_bytes as u64) as usize).max(1)
    }

    pub fn params(&self) -> Result<PirParams, NetError> {
        Ok(PirParams::new(self.servers, self.privacy, self.word_bits, self.depth)?)
    }
}

/// One fetch, as measured by the client.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub scheme: Scheme,
    pub cell: BenchCell,
    pub up_bytes: u64,
    pub down_bytes: u64,
    pub encode_s: f64,
    pub server_s: f64,
    pub decode_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Sample standard deviation; 0 for fewer than two values.
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return MeanSd::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanSd { mean, sd }
    }
}

/// R repetitions of one cell. Byte counts are identical across repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub scheme: Scheme,
    pub cell: BenchCell,
    pub up_bytes: u64,
    pub down_bytes: u64,
    pub predicted_up: u64,
    pub predicted_down: u64,
    pub encode_s: MeanSd,
    pub server_s: MeanSd,
    pub decode_s: MeanSd,
    pub total_s: MeanSd,
    pub runs: Vec<BenchRecord>,
}

impl BenchRow {
    pub fn bytes_match_model(&self) -> bool {
        self.runs
            .iter()
            .all(|r| r.up_bytes == self.predicted_up && r.down_bytes == self.predicted_down)
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub cells: Vec<BenchCell>,
    pub repetitions: usize,
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("fetched record {beta} does not match the database")]
    WrongRecord { beta: usize },
    #[error("repetitions must be at least 1")]
    NoRepetitions,
}

/// Synthetic database whose content depends only on the seed and shape.
pub fn synthetic_database(
    num_records: usize,
    record_bytes: usize,
    word_bits: u32,
    seed: u64,
) -> Result<DatabaseMatrix, NetError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok(DatabaseMatrix::from_fn(num_records, record_bytes, word_bits, |_, buf| {
        rng.fill_bytes(buf)
    })?)
}

/// Runs every cell `repetitions` times against `l` in-process servers that
/// share one database. Each fetch waits for all servers so the byte counts
/// cover the whole request.
pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchRow>, BenchError> {
    if config.repetitions == 0 {
        return Err(BenchError::NoRepetitions);
    }
    let mut cached: Option<((usize, usize, u32), Arc<DatabaseMatrix>)> = None;
    let mut rows = Vec::with_capacity(config.cells.len());
    for (ci, cell) in config.cells.iter().enumerate() {
        let key = (cell.num_records(), cell.record_bytes, cell.word_bits);
        let db = match &cached {
            Some((k, db)) if *k == key => db.clone(),
            _ => {
                // release the previous database before building the next one
                drop(cached.take());
                let db = Arc::new(synthetic_database(key.0, key.1, key.2, config.seed)?);
                cached = Some((key, db.clone()));
                db
            }
        };
        rows.push(run_cell(cell, db, config.repetitions, config.seed ^ ci as u64)?);
    }
    Ok(rows)
}

pub fn run_cell(
    cell: &BenchCell,
    db: Arc<DatabaseMatrix>,
    repetitions: usize,
    seed: u64,
) -> Result<BenchRow, BenchError> {
    let params = cell.params()?;
    let server = Arc::new(PirServer::new(db.clone()));
    let cluster = in_process_cluster(server, cell.servers);
    let mut client = PirClient::new(as_transports(&cluster), params)?.with_quorum(Quorum::All);
    let predicted = client.predicted_cost(cell.ads)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let scheme = Scheme::for_depth(cell.depth);
    let mut runs = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let betas: Vec<usize> = (0..cell.ads).map(|_| rng.random_range(0..db.num_records())).collect();
        let result = client.fetch(&betas, &mut rng)?;
        for (&beta, rec) in betas.iter().zip(&result.records) {
            if *rec != db.record(beta) {
                return Err(BenchError::WrongRecord { beta });
            }
        }
        let s = result.stats;
        runs.push(BenchRecord {
            scheme,
            cell: *cell,
            up_bytes: s.up_bytes,
            down_bytes: s.down_bytes,
            encode_s: s.encode_s,
            server_s: s.server_s,
            decode_s: s.decode_s,
            total_s: s.total_s,
        });
    }
    let col = |f: fn(&BenchRecord) -> f64| MeanSd::of(&runs.iter().map(f).collect::<Vec<_>>());
    Ok(BenchRow {
        scheme,
        cell: *cell,
        up_bytes: runs[0].up_bytes,
        down_bytes: runs[0].down_bytes,
        predicted_up: predicted.up_bytes(),
        predicted_down: predicted.down_bytes(),
        encode_s: col(|r| r.encode_s),
        server_s: col(|r| r.server_s),
        decode_s: col(|r| r.decode_s),
        total_s: col(|r| r.total_s),
        runs,
    })
}

pub const BENCH_HEADER: [&str; 18] = [
    "scheme",
    "db_bytes",
    "record_bytes",
    "l",
    "t",
    "w",
    "d",
    "q",
    "up_bytes",
    "down_bytes",
    "encode_s_mean",
    "encode_s_sd",
    "server_s_mean",
    "server_s_sd",
    "decode_s_mean",
    "decode_s_sd",
    "total_s_mean",
    "total_s_sd",
];

/// Writes the aggregated CSV. With `timings = false` the timing columns are
/// left empty, which keeps the report reproducible.
pub fn write_bench_csv<W: Write>(out: W, rows: &[BenchRow], timings: bool) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BENCH_HEADER)?;
    for r in rows {
        let c = &r.cell;
        let mut rec = vec![
            r.scheme.label(),
            c.db_bytes.to_string(),
            c.record_bytes.to_string(),
            c.servers.to_string(),
            c.privacy.to_string(),
            c.word_bits.to_string(),
            c.depth.to_string(),
            c.ads.to_string(),
            r.up_bytes.to_string(),
            r.down_bytes.to_string(),
        ];
        for m in [r.encode_s, r.server_s, r.decode_s, r.total_s] {
            if timings {
                rec.push(format!("{:.6}", m.mean));
                rec.push(format!("{:.6}", m.sd));
            } else {
                rec.push(String::new());
                rec.push(String::new());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell() -> BenchCell {
        BenchCell {
            db_bytes: 64 * 1024,
            record_bytes: 1024,
            servers: 3,
            privacy: 1,
            word_bits: 10,
            depth: 1,
            ads: 2,
        }
    }

    #[test]
    fn single_cell_gives_one_row() {
        let config = BenchConfig {
            cells: vec![cell()],
            repetitions: 3,
            seed: 5,
        };
        let rows = run_bench(&config).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].runs.len(), 3);
        assert!(rows[0].bytes_match_model());
        let mut out = Vec::new();
        write_bench_csv(&mut out, &rows, true).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().nth(1).unwrap().starts_with("ITPIR,65536,1024,3,1,10,1,2,"));
    }

    #[test]
    fn timing_sanity() {
        let rows = run_bench(&BenchConfig {
            cells: vec![BenchCell { depth: 2, ..cell() }],
            repetitions: 2,
            seed: 1,
        })
        .unwrap();
        assert_eq!(rows[0].scheme.label(), "RPIR(2)");
        for r in &rows[0].runs {
            assert!(r.encode_s >= 0.0 && r.server_s >= 0.0 && r.decode_s >= 0.0);
            assert!(r.total_s >= r.encode_s + r.decode_s);
        }
    }

    #[test]
    fn mean_sd() {
        let m = MeanSd::of(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.sd - 1.0).abs() < 1e-15);
        assert_eq!(MeanSd::of(&[4.0]).sd, 0.0);
    }

    #[test]
    fn synthetic_db_is_seeded() {
        let a = synthetic_database(8, 32, 8, 3).unwrap();
        let b = synthetic_database(8, 32, 8, 3).unwrap();
        let c = synthetic_database(8, 32, 8, 4).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_ne!(a.to_bytes(), c.to_bytes());
    }
}
