//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p personnel-server --test acceptance`; pass
//! criterion names as arguments to run a subset.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader};
use std::process::{Command, ExitCode, Stdio};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use personnel_core::bench::{self, BenchPlan, Op, CSV_HEADER};
use personnel_core::idcard::{encode_code39, render_barcode, scanline, ModuleKind};
use personnel_core::imaging::{auto_crop_box, normalize_badge_photo, Aspect};
use personnel_core::payload::synthetic_image;
use personnel_core::records::{self, sample_employee, sample_student, RecordError};
use personnel_core::schema::{self, Target};
use personnel_core::storage::StorageError;
use personnel_core::{
    ConnectionConfig, EmployeeRecord, ImageBlob, ImageFormat, PhotoStore, Record, StorageStrategy,
    StudentRecord, Table,
};
use personnel_testkit::{code39, crop, images, large_objects, referenced_lo_oids, sha256_hex, TestDb};
use postgres::Client;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

type Check = Result<String, String>;

struct Criterion {
    name: &'static str,
    limit: Duration,
    run: fn() -> Check,
}

const CRITERIA: &[Criterion] = &[
    Criterion { name: "ddl_fidelity", limit: Duration::from_secs(10), run: ddl_fidelity },
    Criterion { name: "round_trip", limit: Duration::from_secs(120), run: round_trip },
    Criterion { name: "referential_closure", limit: Duration::from_secs(180), run: referential_closure },
    Criterion { name: "concurrency_soak", limit: Duration::from_secs(90), run: concurrency_soak },
    Criterion { name: "barcode_closure", limit: Duration::from_secs(30), run: barcode_closure },
    Criterion { name: "validation_table", limit: Duration::from_secs(30), run: validation_table },
    Criterion { name: "autocrop_oracle", limit: Duration::from_secs(30), run: autocrop_oracle },
    Criterion { name: "bench_deliverable", limit: Duration::from_secs(300), run: bench_deliverable },
    Criterion { name: "end_to_end", limit: Duration::from_secs(60), run: end_to_end },
];

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(c.run)
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_text(&p))));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > c.limit => Err(format!("{d}; took {elapsed:.1?}, limit {:?}", c.limit)),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {:<20} {:>8.2?}  {detail}", c.name, elapsed),
            Err(why) => {
                failed += 1;
                println!("FAIL {:<20} {:>8.2?}  {why}", c.name, elapsed);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".into())
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    }};
}

fn database() -> Result<TestDb, String> {
    TestDb::try_new().ok_or_else(|| "no PostgreSQL server reachable (set PERSONNEL_TEST_DB_*)".to_owned())
}

fn migrated(strategy: StorageStrategy) -> Result<(TestDb, Client), String> {
    let db = database()?;
    let mut c = db.client();
    schema::migrate(&mut c, strategy, Target::Latest).map_err(|e| e.to_string())?;
    Ok((db, c))
}

fn config_for(db: &TestDb, database: &str) -> ConnectionConfig {
    ConnectionConfig {
        host: db.params.host.clone(),
        port: db.params.port,
        database: database.to_owned(),
        user: db.params.user.clone(),
        password: db.params.password.clone(),
        tls: false,
    }
}

fn employee(id: i32) -> EmployeeRecord {
    let mut e = sample_employee();
    e.emp_id = id;
    e
}

fn closure(c: &mut Client) -> Result<usize, String> {
    let all = large_objects(c);
    let referenced = referenced_lo_oids(c);
    ensure!(
        all == referenced,
        "catalog {} objects vs {} referenced; stranded {:?}, dangling {:?}",
        all.len(),
        referenced.len(),
        all.difference(&referenced).collect::<Vec<_>>(),
        referenced.difference(&all).collect::<Vec<_>>()
    );
    Ok(all.len())
}

fn ddl_fidelity() -> Check {
    let sql: String = schema::generate_ddl(StorageStrategy::LargeObject)
        .iter()
        .map(|s| s.to_sql())
        .collect();
    let domains = sql.matches("CREATE DOMAIN lo AS oid").count();
    ensure!(domains == 1, "CREATE DOMAIN lo AS oid appears {domains} times");
    for t in Table::ALL {
        let stmt = format!("ALTER TABLE {} ADD COLUMN myphoto lo", t.sql_name());
        ensure!(sql.matches(&stmt).count() == 1, "missing `{stmt}`");
    }
    ensure!(
        sql.find("CREATE DOMAIN").unwrap() < sql.find("ADD COLUMN myphoto lo").unwrap(),
        "domain created after first use"
    );
    let (_db, mut c) = migrated(StorageStrategy::LargeObject)?;
    let rows = c
        .query(
            "SELECT c.table_name, c.domain_name, format_type(t.typbasetype, NULL)
             FROM information_schema.columns c JOIN pg_type t ON t.typname = c.domain_name
             WHERE c.column_name = 'myphoto' ORDER BY 1",
            &[],
        )
        .map_err(|e| e.to_string())?;
    let got: Vec<(String, String, String)> = rows.iter().map(|r| (r.get(0), r.get(1), r.get(2))).collect();
    let want: Vec<(String, String, String)> = ["tab_t_emp_details", "tab_t_students"]
        .iter()
        .map(|t| (t.to_string(), "lo".to_string(), "oid".to_string()))
        .collect();
    ensure!(got == want, "live columns {got:?}");
    Ok("domain once, myphoto lo on both tables, resolves to oid in a live database".into())
}

fn random_blob(rng: &mut StdRng, min: usize, max: usize) -> ImageBlob {
    let format = if rng.random() { ImageFormat::Png } else { ImageFormat::Jpeg };
    let size = images::log_uniform(rng, min, max);
    synthetic_image(format, size, rng.random()).expect("payload")
}

fn round_trip() -> Check {
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let blobs: Vec<ImageBlob> = (0..100).map(|_| random_blob(&mut rng, 1024, 8 << 20)).collect();
    let (lo, hi) = blobs.iter().fold((usize::MAX, 0), |(a, b), x| (a.min(x.len()), b.max(x.len())));
    let formats: BTreeSet<_> = blobs.iter().map(|b| format!("{:?}", b.format())).collect();
    let total: usize = blobs.iter().map(ImageBlob::len).sum();
    for strategy in StorageStrategy::ALL {
        let (_db, mut c) = migrated(strategy)?;
        let store = PhotoStore::new(strategy);
        for (i, blob) in blobs.iter().enumerate() {
            let id = i as i32 + 1;
            records::create(&mut c, &employee(id)).map_err(|e| e.to_string())?;
            store.store_photo(&mut c, Table::Employees, id, blob).map_err(|e| e.to_string())?;
        }
        for (i, blob) in blobs.iter().enumerate() {
            let got = store
                .fetch_photo(&mut c, Table::Employees, i as i32 + 1)
                .map_err(|e| e.to_string())?
                .ok_or("photo missing")?;
            ensure!(
                sha256_hex(got.bytes()) == sha256_hex(blob.bytes()) && got.len() == blob.len(),
                "{strategy}: blob {i} ({} bytes) differs",
                blob.len()
            );
        }
    }
    Ok(format!(
        "100 blobs x 2 strategies byte-equal; sizes {lo}..{hi} B, {:.1} MiB total, formats {formats:?}",
        total as f64 / (1 << 20) as f64
    ))
}

fn referential_closure() -> Check {
    let (_db, mut c) = migrated(StorageStrategy::LargeObject)?;
    let store = PhotoStore::new(StorageStrategy::LargeObject);
    let mut rng = StdRng::seed_from_u64(0x5eed_0002);
    let mut rows: HashMap<i32, Option<String>> = HashMap::new();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for step in 0..500 {
        let id = rng.random_range(1..=40);
        let op = match rng.random_range(0..100) {
            0..20 => "create",
            20..30 => "delete_record",
            30..55 => "store_photo",
            55..65 => "delete_photo",
            65..75 => "update",
            75..90 => "fetch",
            90..95 => "store_invalid",
            _ => "vacuum",
        };
        *counts.entry(op).or_default() += 1;
        let exists = rows.contains_key(&id);
        match op {
            "create" => match records::create(&mut c, &employee(id)) {
                Ok(_) => {
                    ensure!(!exists, "step {step}: duplicate create accepted");
                    rows.insert(id, None);
                }
                Err(RecordError::Duplicate(_)) => ensure!(exists, "step {step}: spurious duplicate"),
                Err(e) => return Err(format!("step {step}: {e}")),
            },
            "delete_record" => {
                let found = records::delete::<EmployeeRecord>(&mut c, id).map_err(|e| e.to_string())?;
                ensure!(found == exists, "step {step}: delete found={found}, model {exists}");
                rows.remove(&id);
            }
            "store_photo" => {
                let blob = random_blob(&mut rng, 1024, 64 * 1024);
                match store.store_photo(&mut c, Table::Employees, id, &blob) {
                    Ok(_) => {
                        ensure!(exists, "step {step}: stored onto missing row");
                        rows.insert(id, Some(sha256_hex(blob.bytes())));
                    }
                    Err(StorageError::RowNotFound { .. }) => ensure!(!exists, "step {step}: row lost"),
                    Err(e) => return Err(format!("step {step}: {e}")),
                }
            }
            "delete_photo" => match store.delete_photo(&mut c, Table::Employees, id) {
                Ok(had) => {
                    let model = rows.get(&id).is_some_and(Option::is_some);
                    ensure!(had == model, "step {step}: delete_photo had={had}, model {model}");
                    rows.insert(id, None);
                }
                Err(StorageError::RowNotFound { .. }) => ensure!(!exists, "step {step}: row lost"),
                Err(e) => return Err(format!("step {step}: {e}")),
            },
            "update" => {
                let mut e = employee(id);
                e.designation = format!("Grade {step}");
                let found = records::update(&mut c, &e).map_err(|e| e.to_string())?;
                ensure!(found == exists, "step {step}: update found={found}, model {exists}");
            }
            "fetch" => match store.fetch_photo(&mut c, Table::Employees, id) {
                Ok(got) => {
                    let want = rows.get(&id).cloned().flatten();
                    ensure!(exists, "step {step}: fetched from missing row");
                    ensure!(got.map(|b| sha256_hex(b.bytes())) == want, "step {step}: fetch mismatch");
                }
                Err(StorageError::RowNotFound { .. }) => ensure!(!exists, "step {step}: row lost"),
                Err(e) => return Err(format!("step {step}: {e}")),
            },
            "store_invalid" => {
                let png = images::png(64, 64);
                let bad = [b"GIF89a-not-stored".to_vec(), Vec::new(), png[..png.len() / 2].to_vec()];
                for bytes in bad {
                    let normalized = normalize_badge_photo(bytes, None);
                    ensure!(normalized.is_err(), "step {step}: invalid upload accepted");
                }
            }
            _ => {
                let n = store.vacuum_orphans(&mut c).map_err(|e| e.to_string())?;
                ensure!(n == 0, "step {step}: vacuum reclaimed {n} during a closed sequence");
            }
        }
        if step % 50 == 49 {
            let n = closure(&mut c).map_err(|e| format!("after step {step}: {e}"))?;
            let with_photo = rows.values().filter(|p| p.is_some()).count();
            ensure!(n == with_photo, "after step {step}: {n} objects, model has {with_photo} photos");
        }
    }
    let live = closure(&mut c)?;
    for _ in 0..10 {
        c.execute("SELECT lo_from_bytea(0, $1)", &[&b"orphan".as_slice()])
            .map_err(|e| e.to_string())?;
    }
    let orphans = store.list_orphans(&mut c).map_err(|e| e.to_string())?.len();
    ensure!(orphans == 10, "listed {orphans} orphans after inducing 10");
    let reclaimed = store.vacuum_orphans(&mut c).map_err(|e| e.to_string())?;
    ensure!(reclaimed == 10, "vacuum reclaimed {reclaimed}, expected 10");
    ensure!(closure(&mut c)? == live, "vacuum touched referenced objects");
    let again = store.vacuum_orphans(&mut c).map_err(|e| e.to_string())?;
    ensure!(again == 0, "second vacuum reclaimed {again}");
    let mut ops: Vec<_> = counts.into_iter().collect();
    ops.sort();
    Ok(format!("500 steps {ops:?}; catalog == referenced ({live}); vacuum reclaimed exactly 10"))
}

fn concurrency_soak() -> Check {
    const WORKERS: usize = 8;
    const IDS: i32 = 16;
    const VERSIONS: usize = 4;
    let soak = Duration::from_secs(60);
    let (db, mut c) = migrated(StorageStrategy::LargeObject)?;
    for id in 1..=IDS {
        records::create(&mut c, &employee(id)).map_err(|e| e.to_string())?;
    }
    let mut rng = StdRng::seed_from_u64(0x5eed_0003);
    let payloads: Arc<HashMap<i32, Vec<ImageBlob>>> = Arc::new(
        (1..=IDS)
            .map(|id| (id, (0..VERSIONS).map(|_| random_blob(&mut rng, 1024, 256 * 1024)).collect()))
            .collect(),
    );
    let digests: Arc<HashMap<i32, BTreeSet<String>>> = Arc::new(
        payloads
            .iter()
            .map(|(id, v)| (*id, v.iter().map(|b| sha256_hex(b.bytes())).collect()))
            .collect(),
    );
    let mismatches = Arc::new(AtomicUsize::new(0));
    let ops = Arc::new(AtomicUsize::new(0));
    let stop = Arc::new(AtomicBool::new(false));
    let config = config_for(&db, &db.name);
    let workers: Vec<_> = (0..WORKERS)
        .map(|w| {
            let (payloads, digests, mismatches, ops, stop, config) =
                (payloads.clone(), digests.clone(), mismatches.clone(), ops.clone(), stop.clone(), config.clone());
            std::thread::spawn(move || -> Result<(), String> {
                let mut c = config.connect().map_err(|e| e.to_string())?;
                let store = PhotoStore::new(StorageStrategy::LargeObject);
                let mut rng = StdRng::seed_from_u64(w as u64);
                while !stop.load(Ordering::Relaxed) {
                    let id = rng.random_range(1..=IDS);
                    let roll = rng.random_range(0..100);
                    let result = if roll < 40 {
                        let blob = &payloads[&id][rng.random_range(0..VERSIONS)];
                        ignore_missing(store.store_photo(&mut c, Table::Employees, id, blob))
                    } else if roll < 80 {
                        ignore_missing(store.fetch_photo(&mut c, Table::Employees, id).map(|got| {
                            if let Some(b) = got {
                                if !digests[&id].contains(&sha256_hex(b.bytes())) {
                                    mismatches.fetch_add(1, Ordering::Relaxed);
                                }
                            }
                        }))
                    } else if roll < 95 {
                        ignore_missing(store.delete_photo(&mut c, Table::Employees, id))
                    } else {
                        let churn = records::delete::<EmployeeRecord>(&mut c, id)
                            .and_then(|_| records::create(&mut c, &employee(id)));
                        match churn {
                            Ok(_) | Err(RecordError::Duplicate(_)) => Ok(()),
                            Err(e) => Err(e.to_string()),
                        }
                    };
                    if let Err(e) = result {
                        return Err(format!("worker {w}: {e}"));
                    }
                    ops.fetch_add(1, Ordering::Relaxed);
                }
                Ok(())
            })
        })
        .collect();
    std::thread::sleep(soak);
    stop.store(true, Ordering::Relaxed);
    for h in workers {
        h.join().map_err(|_| "worker panicked".to_string())??;
    }
    let mismatches = mismatches.load(Ordering::Relaxed);
    ensure!(mismatches == 0, "{mismatches} checksum mismatches");
    let live = closure(&mut c)?;
    let orphans = PhotoStore::new(StorageStrategy::LargeObject)
        .list_orphans(&mut c)
        .map_err(|e| e.to_string())?
        .len();
    ensure!(orphans == 0, "{orphans} stranded objects");
    Ok(format!(
        "{WORKERS} workers x {soak:?}: {} ops, 0 mismatches, 0 stranded ({live} live objects)",
        ops.load(Ordering::Relaxed)
    ))
}

/// A row deleted by another worker is an expected outcome.
fn ignore_missing<T>(r: Result<T, StorageError>) -> Result<(), String> {
    match r {
        Ok(_) | Err(StorageError::RowNotFound { .. }) => Ok(()),
        Err(e) => Err(e.to_string()),
    }
}

fn barcode_closure() -> Check {
    let alphabet: Vec<char> = code39::ALPHABET.chars().collect();
    let mut rng = StdRng::seed_from_u64(0x5eed_0005);
    for i in 0..200 {
        let len = rng.random_range(1..=20);
        let text: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
        let symbol = encode_code39(&text).map_err(|e| format!("{text:?}: {e}"))?;
        for mw in [2u32, 4] {
            let decoded = code39::decode_row(&scanline(&symbol, mw));
            ensure!(decoded.as_deref() == Ok(text.as_str()), "#{i} {text:?} at {mw}px decoded as {decoded:?}");
            let png = render_barcode(&symbol, mw, 6).map_err(|e| e.to_string())?;
            let raster = images::decode_rgb(png.bytes());
            let row: Vec<bool> = (0..raster.width()).map(|x| raster.get_pixel(x, 3).0[0] < 128).collect();
            let runs = code39::run_lengths(&row);
            ensure!(runs.len() >= 3, "#{i}: no bars at {mw}px");
            let quiet = 10 * mw as usize;
            ensure!(
                runs[0] == (false, quiet) && runs[runs.len() - 1] == (false, quiet),
                "#{i}: quiet zones {:?} / {:?}",
                runs[0],
                runs[runs.len() - 1]
            );
            let recovered: Vec<(bool, usize)> = runs[1..runs.len() - 1]
                .iter()
                .map(|&(dark, n)| (dark, if n % mw as usize == 0 { n / mw as usize } else { 0 }))
                .collect();
            let expected: Vec<(bool, usize)> = symbol
                .modules()
                .iter()
                .map(|m| (m.kind == ModuleKind::Bar, m.width as usize))
                .collect();
            ensure!(recovered == expected, "#{i} {text:?}: module sequence differs at {mw}px");
            ensure!(code39::decode_image(png.bytes()).as_deref() == Ok(text.as_str()), "#{i}: image decode");
        }
    }
    Ok("200 strings decode by the reference decoder; run-length scans match modules at 2 and 4 px".into())
}

struct Bound {
    field: &'static str,
    /// Value at the bound.
    pass: Value,
    /// Value one past the bound.
    fail: Value,
    /// Text bound, also enforced by the column type.
    text_len: Option<usize>,
}

fn text_bound(field: &'static str, n: usize) -> Bound {
    Bound {
        field,
        pass: json!("é".repeat(n)),
        fail: json!("é".repeat(n + 1)),
        text_len: Some(n),
    }
}

fn int_bound(field: &'static str, max: i64) -> Bound {
    Bound { field, pass: json!(max), fail: json!(max + 1), text_len: None }
}

fn employee_bounds() -> Vec<Bound> {
    vec![
        int_bound("emp_id", i32::MAX as i64),
        text_bound("first_name", 50),
        text_bound("middle_name", 50),
        text_bound("last_name", 50),
        Bound { field: "emp_contact_no", pass: json!("9".repeat(15)), fail: json!("9".repeat(16)), text_len: None },
        text_bound("dept", 20),
        text_bound("highest_education", 20),
        text_bound("designation", 20),
        text_bound("employment_type", 20),
        text_bound("gender", 6),
        Bound { field: "blood_group", pass: json!("AB+"), fail: json!("AB+AB+A"), text_len: None },
        int_bound("years_of_experience", i16::MAX as i64),
        text_bound("remark", 255),
    ]
}

fn student_bounds() -> Vec<Bound> {
    vec![
        int_bound("student_id", i32::MAX as i64),
        text_bound("first_name", 50),
        text_bound("middle_name", 50),
        text_bound("last_name", 50),
        Bound { field: "student_contact_no", pass: json!("9".repeat(15)), fail: json!("9".repeat(16)), text_len: None },
        text_bound("branch", 20),
        text_bound("session", 20),
        int_bound("semester", 12),
        int_bound("aicte_course_id", i32::MAX as i64),
        text_bound("gender", 6),
        Bound { field: "blood_group", pass: json!("AB+"), fail: json!("AB+AB+A"), text_len: None },
        text_bound("remark", 255),
    ]
}

/// Checks every bound of `R`: the bound value is stored and read back
/// verbatim, the next value is rejected, and the column itself refuses
/// over-long text.
fn check_bounds<R: Record + PartialEq>(c: &mut Client, base: Value, bounds: &[Bound], next_id: &mut i64) -> Result<usize, String> {
    let id_field = R::TABLE.id_column();
    for b in bounds {
        let mut pass = base.clone();
        pass[b.field] = b.pass.clone();
        if b.field != id_field {
            *next_id += 1;
            pass[id_field] = json!(*next_id);
        }
        let rec: R = serde_json::from_value(pass).map_err(|e| format!("{}: bound value unreadable: {e}", b.field))?;
        records::create(c, &rec).map_err(|e| format!("{}: bound value rejected: {e}", b.field))?;
        let back = records::get::<R>(c, rec.id()).map_err(|e| e.to_string())?;
        ensure!(back.as_ref() == Some(&rec), "{}: bound value not read back verbatim", b.field);

        let mut fail = base.clone();
        fail[b.field] = b.fail.clone();
        if b.field != id_field {
            *next_id += 1;
            fail[id_field] = json!(*next_id);
        }
        match serde_json::from_value::<R>(fail) {
            Err(_) => {}
            Ok(rec) => match records::create(c, &rec) {
                Err(RecordError::Validation(v)) => {
                    ensure!(v.field == b.field, "{}: rejected for {} instead", b.field, v.field)
                }
                other => return Err(format!("{}: bound+1 not rejected: {other:?}", b.field)),
            },
        }

        if let Some(n) = b.text_len {
            let sql = format!("UPDATE {} SET {} = $1 WHERE {id_field} = $2", R::TABLE, b.field);
            let over = "é".repeat(n + 1);
            let res = c.execute(&sql, &[&over, &rec.id()]);
            ensure!(res.is_err(), "{}: column accepts {} characters", b.field, n + 1);
        }
    }
    Ok(bounds.len())
}

fn validation_table() -> Check {
    let (_db, mut c) = migrated(StorageStrategy::LargeObject)?;
    let sourav = sample_employee();
    ensure!(
        (sourav.emp_id, sourav.first_name.as_str(), sourav.last_name.as_str(), sourav.blood_group.as_str())
            == (9, "Sourav", "Bag", "A+"),
        "sample record drifted: {sourav:?}"
    );
    let id = records::create(&mut c, &sourav).map_err(|e| format!("Sourav Bag record rejected: {e}"))?;
    ensure!(id == 9, "created id {id}");
    let back = records::get::<EmployeeRecord>(&mut c, 9).map_err(|e| e.to_string())?;
    ensure!(back.as_ref() == Some(&sourav), "Sourav Bag record not read back verbatim: {back:?}");

    let mut next_id = 100;
    let mut e_base = serde_json::to_value(employee(1)).unwrap();
    e_base["middle_name"] = json!("M");
    e_base["remark"] = json!("r");
    let ne = check_bounds::<EmployeeRecord>(&mut c, e_base, &employee_bounds(), &mut next_id)?;
    let mut s_base = serde_json::to_value(sample_student()).unwrap();
    s_base["middle_name"] = json!("M");
    s_base["remark"] = json!("r");
    let ns = check_bounds::<StudentRecord>(&mut c, s_base, &student_bounds(), &mut next_id)?;
    Ok(format!("Sourav Bag record accepted verbatim; {ne} employee and {ns} student bounds pass at bound, fail at bound+1"))
}

fn autocrop_oracle() -> Check {
    let mut rng = StdRng::seed_from_u64(0x5eed_0007);
    let mut degenerate = 0;
    for i in 0..1000 {
        let (w, h) = (rng.random_range(1..=4000u32), rng.random_range(1..=4000u32));
        let (aw, ah) = (rng.random_range(1..=21u32), rng.random_range(1..=21u32));
        let bx = auto_crop_box(w, h, Aspect::new(aw, ah).unwrap());
        let tag = format!("#{i} {w}x{h} at {aw}:{ah} -> {bx}");
        ensure!(bx.fits_within(w, h), "{tag}: out of bounds");
        match crop::best_box(w, h, aw, ah) {
            Some((bw, bh)) => {
                ensure!((bx.width, bx.height) == (bw, bh), "{tag}: brute force found {bw}x{bh}");
                ensure!(crop::center_error(w, bx.x, bx.width) <= 1.0, "{tag}: x off center");
                ensure!(crop::center_error(h, bx.y, bx.height) <= 1.0, "{tag}: y off center");
                ensure!(crop::is_maximal(w, h, bx.width, bx.height, aw, ah, 2), "{tag}: not maximal");
            }
            None => {
                degenerate += 1;
                ensure!((bx.width, bx.height) == (1, 1), "{tag}: no in-band box exists");
            }
        }
    }
    Ok(format!("1000 triples match brute force, centered within 1 px, maximal under 2 px growth ({degenerate} degenerate)"))
}

fn bench_deliverable() -> Check {
    let db = database()?;
    let base = config_for(&db, "postgres");
    let plan = BenchPlan {
        strategies: StorageStrategy::ALL.to_vec(),
        sizes_bytes: vec![64 * 1024, 1 << 20],
        concurrency: vec![1, 8],
        n_images: 16,
        seed: 7,
        warmup: 2,
    };
    let reports = bench::run_plan(&base, &plan, |_| {}).map_err(|e| e.to_string())?;
    ensure!(reports.len() == 8, "{} reports for 8 workloads", reports.len());
    for r in &reports {
        let tag = format!("{} {} B x{}", r.spec.strategy, r.spec.size_bytes, r.spec.concurrency);
        ensure!(r.verified && r.mismatches == 0, "{tag}: not verified ({} mismatches)", r.mismatches);
        ensure!(r.residue == 0, "{tag}: residue {}", r.residue);
    }
    let csv = bench::report_to_csv(&reports).map_err(|e| e.to_string())?;
    let header = csv.lines().next().unwrap_or_default();
    ensure!(header == CSV_HEADER.join(","), "header {header:?}");
    let rows = bench::parse_csv(&csv).map_err(|e| e.to_string())?;
    ensure!(rows.len() == 8 * Op::ALL.len(), "{} csv rows", rows.len());
    for s in &rows {
        ensure!(plan.sizes_bytes.contains(&s.size_bytes), "size {}", s.size_bytes);
        ensure!(s.count == plan.n_images, "count {}", s.count);
        let nums = [s.mean_ms, s.median_ms, s.p95_ms, s.throughput_mib_s];
        ensure!(nums.iter().all(|v| v.is_finite() && *v >= 0.0), "non-finite stats {s:?}");
        ensure!(s.median_ms <= s.p95_ms, "median above p95: {s:?}");
    }
    let out = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("bench.csv");
    std::fs::write(&out, &csv).map_err(|e| e.to_string())?;
    Ok(format!("8 workloads verified, zero residue; {} rows written to {}", rows.len(), out.display()))
}

fn end_to_end() -> Check {
    let db = database()?;
    let bin = env!("CARGO_BIN_EXE_personnel");
    let env = |cmd: &mut Command| {
        cmd.env("PERSONNEL_DB_HOST", &db.params.host)
            .env("PERSONNEL_DB_PORT", db.params.port.to_string())
            .env("PERSONNEL_DB_NAME", &db.name)
            .env("PERSONNEL_DB_USER", &db.params.user)
            .env("PERSONNEL_ADMIN_PASSWORD", "e2e-pass")
            .env("RUST_LOG", "warn");
        if let Some(pw) = &db.params.password {
            cmd.env("PERSONNEL_DB_PASSWORD", pw);
        }
    };
    let mut migrate = Command::new(bin);
    migrate.arg("migrate");
    env(&mut migrate);
    let out = migrate.output().map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "migrate failed: {}", String::from_utf8_lossy(&out.stderr));

    let mut serve = Command::new(bin);
    serve.args(["serve", "--bind", "127.0.0.1:0"]).stdout(Stdio::piped());
    env(&mut serve);
    let mut child = serve.spawn().map_err(|e| e.to_string())?;
    let result = (|| -> Check {
        let mut line = String::new();
        BufReader::new(child.stdout.take().ok_or("no stdout")?)
            .read_line(&mut line)
            .map_err(|e| e.to_string())?;
        let addr = line.trim().strip_prefix("listening on ").ok_or(format!("unexpected {line:?}"))?;
        let base = format!("http://{addr}");
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| e.to_string())?;
        let login: Value = http
            .post(format!("{base}/api/login"))
            .json(&json!({"username": "admin", "password": "e2e-pass"}))
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(|e| e.to_string())?;
        let token = login["token"].as_str().ok_or("no token")?.to_owned();
        let sourav = json!({
            "emp_id": 9, "first_name": "Sourav", "middle_name": null, "last_name": "Bag",
            "emp_contact_no": "8131042345", "date_of_birth": "1990-01-01",
            "dept": "Electronics and Cor", "date_of_joining": "2015-07-01",
            "highest_education": "M.Tech", "designation": "Asst. Professor",
            "employment_type": "Employee", "gender": "Male", "blood_group": "A+",
            "years_of_experience": 1, "remark": null
        });
        let resp = http.post(format!("{base}/api/employees")).bearer_auth(&token).json(&sourav).send().map_err(|e| e.to_string())?;
        ensure!(resp.status() == 201, "create returned {}", resp.status());
        let resp = http
            .put(format!("{base}/api/employees/9/photo"))
            .bearer_auth(&token)
            .body(images::jpeg(640, 480))
            .send()
            .map_err(|e| e.to_string())?;
        ensure!(resp.status() == 200, "photo upload returned {}", resp.status());
        let resp = http.get(format!("{base}/api/employees/9/idcard.png")).bearer_auth(&token).send().map_err(|e| e.to_string())?;
        ensure!(resp.status() == 200, "idcard returned {}", resp.status());
        let png = resp.bytes().map_err(|e| e.to_string())?;
        let decoded = code39::decode_image(&png)?;
        ensure!(decoded == "9", "barcode decodes to {decoded:?}");
        Ok(format!("migrate, create, upload, card via {addr}; barcode decodes to \"9\""))
    })();
    let _ = Command::new("kill").args(["-TERM", &child.id().to_string()]).status();
    let deadline = Instant::now() + Duration::from_secs(10);
    let status = loop {
        if let Some(s) = child.try_wait().map_err(|e| e.to_string())? {
            break Some(s);
        }
        if Instant::now() > deadline {
            let _ = child.kill();
            break None;
        }
        std::thread::sleep(Duration::from_millis(50));
    };
    let detail = result?;
    ensure!(status.is_some_and(|s| s.success()), "server did not exit cleanly on SIGTERM: {status:?}");
    Ok(detail)
}
