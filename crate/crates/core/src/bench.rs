//! Store/fetch/delete benchmark for the two photo storage strategies.
//!
//! A run uses scratch employee rows in a reserved id range, checks every
//! fetched payload against the stored one, then removes the rows and
//! reports anything left behind as residue.

use std::sync::{Barrier, Mutex};
use std::time::{Duration, Instant};

use postgres::Client;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, ConnectionConfig};
use crate::imaging::{ImageBlob, ImageFormat};
use crate::par::{self, Mode};
use crate::payload::{self, PayloadError};
use crate::records::{self, sample_employee, RecordError};
use crate::schema::{self, SchemaError};
use crate::storage::{PhotoStore, StorageError, StorageStrategy};
use crate::table::Table;

/// First employee id used for scratch rows.
pub const SCRATCH_ID_BASE: i32 = 2_000_000_000;
pub const MAX_CONCURRENCY: usize = 64;
pub const MAX_IMAGES: usize = 100_000;
pub const CSV_HEADER: [&str; 8] = [
    "strategy",
    "size_bytes",
    "op",
    "count",
    "mean_ms",
    "median_ms",
    "p95_ms",
    "throughput_mib_s",
];

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid workload: {0}")]
    InvalidSpec(String),
    #[error("database holds a {deployed} schema but the workload targets {requested}")]
    StrategyMismatch {
        deployed: String,
        requested: StorageStrategy,
    },
    #[error("scratch rows already present at id {0} and above")]
    ScratchRowsPresent(i32),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Db(#[from] postgres::Error),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Payload(#[from] PayloadError),
    #[error("worker thread panicked")]
    WorkerPanicked,
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub strategy: StorageStrategy,
    pub n_images: usize,
    pub size_bytes: usize,
    pub concurrency: usize,
    pub seed: u64,
    #[serde(default)]
    pub warmup: usize,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidSpec(m));
        if self.n_images == 0 || self.n_images > MAX_IMAGES {
            return bad(format!("n_images must be in 1..={MAX_IMAGES}"));
        }
        if self.concurrency == 0 || self.concurrency > MAX_CONCURRENCY {
            return bad(format!("concurrency must be in 1..={MAX_CONCURRENCY}"));
        }
        let min = payload::minimum_size(ImageFormat::Png).max(payload::minimum_size(ImageFormat::Jpeg));
        if self.size_bytes < min {
            return bad(format!("size_bytes must be at least {min}"));
        }
        if self.size_bytes > crate::storage::DEFAULT_MAX_PHOTO_BYTES {
            return bad(format!(
                "size_bytes must be at most {}",
                crate::storage::DEFAULT_MAX_PHOTO_BYTES
            ));
        }
        Ok(())
    }
}

/// Cartesian product of strategies, sizes and concurrency levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchPlan {
    pub strategies: Vec<StorageStrategy>,
    pub sizes_bytes: Vec<usize>,
    pub concurrency: Vec<usize>,
    pub n_images: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub warmup: usize,
}

impl BenchPlan {
    pub fn from_toml_str(text: &str) -> Result<Self, BenchError> {
        toml::from_str(text).map_err(|e| BenchError::InvalidSpec(e.to_string()))
    }

    pub fn workloads(&self) -> Vec<WorkloadSpec> {
        let mut out = Vec::new();
        for &strategy in &self.strategies {
            for &size_bytes in &self.sizes_bytes {
                for &concurrency in &self.concurrency {
                    out.push(WorkloadSpec {
                        strategy,
                        n_images: self.n_images,
                        size_bytes,
                        concurrency,
                        seed: self.seed,
                        warmup: self.warmup,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Store,
    Fetch,
    Delete,
}

impl Op {
    pub const ALL: [Op; 3] = [Op::Store, Op::Fetch, Op::Delete];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpStats {
    pub strategy: StorageStrategy,
    pub size_bytes: usize,
    pub op: Op,
    pub count: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub throughput_mib_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub spec: WorkloadSpec,
    pub stats: Vec<OpStats>,
    /// Every fetched payload matched the stored one.
    pub verified: bool,
    pub mismatches: usize,
    /// Scratch rows or large objects left after cleanup.
    pub residue: u64,
}

/// Summary statistics of `samples` (milliseconds). Median averages the two
/// middle values; p95 is nearest-rank.
pub fn summarize(samples: &[f64]) -> (f64, f64, f64) {
    if samples.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let mean = s.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    };
    let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
    (mean, median, s[rank - 1])
}

fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

/// Payload `i` of a workload; formats alternate PNG, JPEG.
pub fn workload_payload(spec: &WorkloadSpec, i: usize) -> Result<ImageBlob, PayloadError> {
    let format = if i.is_multiple_of(2) { ImageFormat::Png } else { ImageFormat::Jpeg };
    payload::synthetic_image(format, spec.size_bytes, spec.seed.wrapping_add(i as u64))
}

fn scratch_id(i: usize) -> i32 {
    SCRATCH_ID_BASE + i as i32
}

fn scratch_count(client: &mut Client) -> Result<i64, postgres::Error> {
    Ok(client
        .query_one(
            &format!(
                "SELECT count(*) FROM {} WHERE {} >= $1",
                Table::Employees,
                Table::Employees.id_column()
            ),
            &[&SCRATCH_ID_BASE],
        )?
        .get(0))
}

fn remove_scratch_rows(client: &mut Client) -> Result<u64, postgres::Error> {
    client.execute(
        &format!(
            "DELETE FROM {} WHERE {} >= $1",
            Table::Employees,
            Table::Employees.id_column()
        ),
        &[&SCRATCH_ID_BASE],
    )
}

fn surviving_objects(client: &mut Client, oids: &[u32]) -> Result<u64, postgres::Error> {
    if oids.is_empty() {
        return Ok(0);
    }
    let n: i64 = client
        .query_one(
            "SELECT count(*) FROM pg_largeobject_metadata WHERE oid = ANY($1)",
            &[&oids],
        )?
        .get(0);
    Ok(n as u64)
}

#[derive(Default)]
struct Samples {
    ms: [Vec<f64>; 3],
    phase_wall: [Duration; 3],
    mismatches: usize,
    oids: Vec<u32>,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() * 1e3)
}

/// Runs `spec` against the database in `config`, which must already hold
/// a schema deployed for `spec.strategy`.
pub fn run_benchmark(
    config: &ConnectionConfig,
    spec: &WorkloadSpec,
) -> Result<BenchmarkReport, BenchError> {
    spec.validate()?;
    let mut admin = config.connect()?;
    match schema::deployed_strategy(&mut admin)? {
        Some(s) if s == spec.strategy => {}
        other => {
            return Err(BenchError::StrategyMismatch {
                deployed: other.map_or_else(|| "missing".to_owned(), |s| s.to_string()),
                requested: spec.strategy,
            })
        }
    }
    if scratch_count(&mut admin)? > 0 {
        return Err(BenchError::ScratchRowsPresent(SCRATCH_ID_BASE));
    }

    let payloads = par::map_range(Mode::default(), spec.n_images, |i| workload_payload(spec, i))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let digests: Vec<[u8; 32]> = par::map(Mode::default(), &payloads, |p| sha256(p.bytes()));

    let store = PhotoStore::new(spec.strategy);
    let mut template = sample_employee();
    for i in 0..spec.n_images {
        template.emp_id = scratch_id(i);
        records::create(&mut admin, &template)?;
    }

    let result = run_phases(config, spec, &store, &payloads, &digests, &mut admin);
    let removed_rows = remove_scratch_rows(&mut admin);
    let samples = result?;
    removed_rows?;

    let residue = scratch_count(&mut admin)? as u64 + surviving_objects(&mut admin, &samples.oids)?;
    let total_mib = spec.size_bytes as f64 * spec.n_images as f64 / (1024.0 * 1024.0);
    let stats = Op::ALL
        .iter()
        .enumerate()
        .map(|(k, &op)| {
            let (mean_ms, median_ms, p95_ms) = summarize(&samples.ms[k]);
            let secs = samples.phase_wall[k].as_secs_f64();
            OpStats {
                strategy: spec.strategy,
                size_bytes: spec.size_bytes,
                op,
                count: samples.ms[k].len(),
                mean_ms,
                median_ms,
                p95_ms,
                throughput_mib_s: if secs > 0.0 { total_mib / secs } else { 0.0 },
            }
        })
        .collect();
    Ok(BenchmarkReport {
        spec: *spec,
        stats,
        verified: samples.mismatches == 0 && samples.ms[1].len() == spec.n_images,
        mismatches: samples.mismatches,
        residue,
    })
}

fn run_phases(
    config: &ConnectionConfig,
    spec: &WorkloadSpec,
    store: &PhotoStore,
    payloads: &[ImageBlob],
    digests: &[[u8; 32]],
    admin: &mut Client,
) -> Result<Samples, BenchError> {
    for (i, payload) in payloads.iter().enumerate().take(spec.warmup.min(spec.n_images)) {
        store.store_photo(admin, Table::Employees, scratch_id(i), payload)?;
        store.fetch_photo(admin, Table::Employees, scratch_id(i))?;
        store.delete_photo(admin, Table::Employees, scratch_id(i))?;
    }

    let mut clients = (0..spec.concurrency)
        .map(|_| config.connect())
        .collect::<Result<Vec<_>, _>>()?;
    let barrier = Barrier::new(spec.concurrency + 1);
    let collected = Mutex::new(Samples::default());

    std::thread::scope(|scope| -> Result<(), BenchError> {
        let handles: Vec<_> = clients
            .iter_mut()
            .enumerate()
            .map(|(w, client)| {
                let barrier = &barrier;
                let collected = &collected;
                scope.spawn(move || -> Result<(), BenchError> {
                    let mine: Vec<usize> = (w..spec.n_images).step_by(spec.concurrency).collect();
                    let mut local = Samples::default();
                    let mut outcome = Ok(());
                    for (k, op) in Op::ALL.iter().enumerate() {
                        barrier.wait();
                        if outcome.is_ok() {
                            outcome = run_op(*op, k, client, store, &mine, payloads, digests, &mut local);
                        }
                        barrier.wait();
                    }
                    let mut all = collected.lock().expect("samples lock");
                    for k in 0..3 {
                        all.ms[k].append(&mut local.ms[k]);
                    }
                    all.mismatches += local.mismatches;
                    all.oids.append(&mut local.oids);
                    outcome
                })
            })
            .collect();

        let mut walls = [Duration::ZERO; 3];
        for wall in &mut walls {
            barrier.wait();
            let start = Instant::now();
            barrier.wait();
            *wall = start.elapsed();
        }
        let mut first_err = Ok(());
        for h in handles {
            let r = h.join().map_err(|_| BenchError::WorkerPanicked).and_then(|r| r);
            if first_err.is_ok() {
                first_err = r;
            }
        }
        collected.lock().expect("samples lock").phase_wall = walls;
        first_err
    })?;
    Ok(collected.into_inner().expect("samples lock"))
}

#[allow(clippy::too_many_arguments)]
fn run_op(
    op: Op,
    slot: usize,
    client: &mut Client,
    store: &PhotoStore,
    ids: &[usize],
    payloads: &[ImageBlob],
    digests: &[[u8; 32]],
    local: &mut Samples,
) -> Result<(), BenchError> {
    for &i in ids {
        let id = scratch_id(i);
        match op {
            Op::Store => {
                let (r, t) = timed(|| store.store_photo(client, Table::Employees, id, &payloads[i]));
                local.oids.extend(r?.object_id);
                local.ms[slot].push(t);
            }
            Op::Fetch => {
                let (r, t) = timed(|| store.fetch_photo(client, Table::Employees, id));
                local.ms[slot].push(t);
                match r? {
                    Some(blob) if sha256(blob.bytes()) == digests[i] => {}
                    _ => local.mismatches += 1,
                }
            }
            Op::Delete => {
                let (r, t) = timed(|| store.delete_photo(client, Table::Employees, id));
                r?;
                local.ms[slot].push(t);
            }
        }
    }
    Ok(())
}

/// Creates a throwaway database per strategy, migrates it, runs every
/// workload of `plan` there, and drops it again.
pub fn run_plan(
    config: &ConnectionConfig,
    plan: &BenchPlan,
    mut on_report: impl FnMut(&BenchmarkReport),
) -> Result<Vec<BenchmarkReport>, BenchError> {
    let workloads = plan.workloads();
    for w in &workloads {
        w.validate()?;
    }
    let mut reports = Vec::new();
    for &strategy in &plan.strategies {
        let scratch = ScratchDatabase::create(config, &format!("bench_{}", strategy.as_str()))?;
        let mut client = scratch.config().connect()?;
        schema::migrate(&mut client, strategy, schema::Target::Latest)?;
        drop(client);
        for w in workloads.iter().filter(|w| w.strategy == strategy) {
            let report = run_benchmark(scratch.config(), w)?;
            on_report(&report);
            reports.push(report);
        }
    }
    Ok(reports)
}

/// A database created on construction and dropped on drop.
pub struct ScratchDatabase {
    admin: ConnectionConfig,
    config: ConnectionConfig,
}

impl ScratchDatabase {
    pub fn create(base: &ConnectionConfig, tag: &str) -> Result<Self, BenchError> {
        let name = format!(
            "{}_{}_{}_{:x}",
            base.database,
            tag,
            std::process::id(),
            rand::random::<u32>()
        )
        .to_lowercase();
        let mut client = base.connect()?;
        client.batch_execute(&format!(
            "CREATE DATABASE \"{name}\" ENCODING 'UTF8' LC_COLLATE 'C' LC_CTYPE 'C' TEMPLATE template0"
        ))?;
        Ok(Self {
            admin: base.clone(),
            config: base.with_database(name),
        })
    }

    pub fn config(&self) -> &ConnectionConfig {
        &self.config
    }
}

impl Drop for ScratchDatabase {
    fn drop(&mut self) {
        let drop_it = || -> Result<(), BenchError> {
            let mut client = self.admin.connect()?;
            client.batch_execute(&format!(
                "DROP DATABASE IF EXISTS \"{}\" WITH (FORCE)",
                self.config.database
            ))?;
            Ok(())
        };
        if let Err(e) = drop_it() {
            log::warn!("could not drop scratch database {}: {e}", self.config.database);
        }
    }
}

pub fn report_to_csv(reports: &[BenchmarkReport]) -> Result<String, BenchError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(|e| BenchError::Csv(e.to_string()))?;
    for s in reports.iter().flat_map(|r| &r.stats) {
        w.serialize(s).map_err(|e| BenchError::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| BenchError::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| BenchError::Csv(e.to_string()))
}

pub fn parse_csv(text: &str) -> Result<Vec<OpStats>, BenchError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| BenchError::Csv(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(BenchError::Csv(format!("unexpected header {header:?}")));
    }
    r.deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| BenchError::Csv(e.to_string()))
}
