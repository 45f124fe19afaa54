//! DDL generation and versioned migrations.
//!
//! Under [`StorageStrategy::LargeObject`] the photo columns are declared
//! with the `lo` domain over `oid`, created once for the whole schema and
//! then reused by every photo-bearing table. A trigger unlinks the large
//! object behind a row whenever its photo is replaced or the row is
//! deleted. Under [`StorageStrategy::InlineBytes`] the photo column is a
//! plain `bytea` and no domain is created.
//!
//! Applied versions are recorded in `personnel_schema_history`, which makes
//! `migrate` idempotent.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use postgres::Client;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::records::{EmployeeRecord, Record, StudentRecord};
use crate::storage::StorageStrategy;
use crate::table::{Table, PHOTO_COLUMN};

pub const HISTORY_TABLE: &str = "personnel_schema_history";
pub const LO_DOMAIN: &str = "lo";
pub const UNLINK_FUNCTION: &str = "personnel_unlink_photo";

/// Advisory lock key held for the duration of a migration run.
pub const MIGRATE_LOCK_KEY: i64 = 0x7065_7273_6d69_6772;

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("database error: {0}")]
    Db(#[from] postgres::Error),
    #[error("version regression: database is at version {current}, target {target} requested")]
    VersionRegression { current: u32, target: u32 },
    #[error("unknown target version {target}; latest is {latest}")]
    UnknownVersion { target: u32, latest: u32 },
    #[error("database was migrated with strategy {deployed}, not {requested}")]
    StrategyMismatch {
        deployed: StorageStrategy,
        requested: StorageStrategy,
    },
    #[error("migration V{version} failed and was rolled back: {source}")]
    ScriptFailed {
        version: u32,
        source: postgres::Error,
    },
    #[error("applied migration V{version} does not match the shipped script")]
    ChecksumDrift { version: u32 },
    #[error("invalid migration set: {0}")]
    InvalidScripts(String),
    #[error("io error writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MigrationScript {
    pub version: u32,
    pub description: String,
    pub statements: Vec<String>,
}

impl MigrationScript {
    fn new(version: u32, description: &str, statements: Vec<String>) -> Self {
        Self {
            version,
            description: description.to_owned(),
            statements,
        }
    }

    /// `V<version>__<description>.sql`
    pub fn file_name(&self) -> String {
        format!("V{}__{}.sql", self.version, self.description)
    }

    pub fn to_sql(&self) -> String {
        let mut out = format!("-- V{}: {}\n", self.version, self.description);
        for stmt in &self.statements {
            let _ = write!(out, "\n{stmt};\n");
        }
        out
    }

    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.to_sql().as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Latest,
    Version(u32),
}

impl std::str::FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("latest") {
            return Ok(Target::Latest);
        }
        match s.parse::<u32>() {
            Ok(v) if v > 0 => Ok(Target::Version(v)),
            _ => Err(format!("invalid target version {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhotoColumn {
    pub table: String,
    pub column: String,
    /// Declared type name (e.g. `lo`).
    pub declared_type: String,
    /// Underlying base type once domains are resolved (e.g. `oid`).
    pub resolved_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemaReport {
    pub strategy: Option<StorageStrategy>,
    pub applied_versions: Vec<u32>,
    pub missing_objects: Vec<String>,
    pub photo_columns: Vec<PhotoColumn>,
}

impl SchemaReport {
    pub fn current_version(&self) -> u32 {
        self.applied_versions.last().copied().unwrap_or(0)
    }

    pub fn is_complete(&self) -> bool {
        self.missing_objects.is_empty()
    }
}

fn employees_table() -> String {
    "CREATE TABLE tab_t_emp_details (
    emp_id integer PRIMARY KEY CHECK (emp_id > 0),
    first_name varchar(50) NOT NULL,
    middle_name varchar(50),
    last_name varchar(50) NOT NULL,
    emp_contact_no varchar(15) NOT NULL CHECK (emp_contact_no ~ '^[0-9]{1,15}$'),
    date_of_birth date NOT NULL,
    dept varchar(20) NOT NULL,
    date_of_joining date NOT NULL,
    highest_education varchar(20) NOT NULL,
    designation varchar(20) NOT NULL,
    employment_type varchar(20) NOT NULL,
    gender varchar(6) NOT NULL,
    blood_group varchar(6) NOT NULL
        CHECK (blood_group IN ('A+', 'A-', 'B+', 'B-', 'AB+', 'AB-', 'O+', 'O-')),
    years_of_experience smallint NOT NULL CHECK (years_of_experience >= 0),
    remark varchar(255),
    CHECK (date_of_joining >= date_of_birth)
)"
    .to_owned()
}

fn students_table() -> String {
    "CREATE TABLE tab_t_students (
    student_id integer PRIMARY KEY CHECK (student_id > 0),
    first_name varchar(50) NOT NULL,
    middle_name varchar(50),
    last_name varchar(50) NOT NULL,
    student_contact_no varchar(15) NOT NULL CHECK (student_contact_no ~ '^[0-9]{1,15}$'),
    date_of_birth date NOT NULL,
    branch varchar(20) NOT NULL,
    date_of_admission date NOT NULL,
    session varchar(20) NOT NULL,
    semester smallint NOT NULL CHECK (semester BETWEEN 1 AND 12),
    aicte_course_id integer NOT NULL CHECK (aicte_course_id > 0),
    gender varchar(6) NOT NULL,
    blood_group varchar(6) NOT NULL
        CHECK (blood_group IN ('A+', 'A-', 'B+', 'B-', 'AB+', 'AB-', 'O+', 'O-')),
    remark varchar(255),
    CHECK (date_of_admission >= date_of_birth)
)"
    .to_owned()
}

fn table_statements() -> Vec<String> {
    vec![
        employees_table(),
        "COMMENT ON TABLE tab_t_emp_details IS 'Employee records (originally Tab_T_Emp_Details / Tab_T_EmpDetails)'".to_owned(),
        "COMMENT ON COLUMN tab_t_emp_details.emp_contact_no IS 'Originally Number (Double); stored as a digit string'".to_owned(),
        students_table(),
        "COMMENT ON TABLE tab_t_students IS 'Student records (originally Tab_T_Students)'".to_owned(),
        "COMMENT ON COLUMN tab_t_students.student_contact_no IS 'Originally Number (Double); stored as a digit string'".to_owned(),
    ]
}

fn unlink_trigger_statements() -> Vec<String> {
    let mut stmts = vec![format!(
        "CREATE FUNCTION {UNLINK_FUNCTION}() RETURNS trigger LANGUAGE plpgsql AS $fn$
BEGIN
    IF OLD.myphoto IS NOT NULL
       AND (TG_OP = 'DELETE' OR NEW.myphoto IS DISTINCT FROM OLD.myphoto) THEN
        IF EXISTS (SELECT 1 FROM pg_largeobject_metadata WHERE oid = OLD.myphoto) THEN
            PERFORM lo_unlink(OLD.myphoto);
        END IF;
    END IF;
    RETURN NULL;
END
$fn$"
    )];
    for table in Table::ALL {
        stmts.push(format!(
            "CREATE TRIGGER {} AFTER UPDATE OR DELETE ON {} FOR EACH ROW EXECUTE FUNCTION {UNLINK_FUNCTION}()",
            trigger_name(table),
            table.sql_name()
        ));
    }
    stmts
}

pub fn trigger_name(table: Table) -> String {
    format!("{}_unlink_photo", table.sql_name())
}

/// The ordered migration set for `strategy`. Pure and deterministic.
pub fn generate_ddl(strategy: StorageStrategy) -> Vec<MigrationScript> {
    match strategy {
        StorageStrategy::LargeObject => vec![
            MigrationScript::new(
                1,
                "create_lo_domain",
                vec![format!("CREATE DOMAIN {LO_DOMAIN} AS oid")],
            ),
            MigrationScript::new(2, "create_record_tables", table_statements()),
            MigrationScript::new(
                3,
                "add_photo_columns",
                Table::ALL
                    .iter()
                    .map(|t| format!("ALTER TABLE {t} ADD COLUMN {PHOTO_COLUMN} {LO_DOMAIN}"))
                    .collect(),
            ),
            MigrationScript::new(4, "photo_unlink_trigger", unlink_trigger_statements()),
        ],
        StorageStrategy::InlineBytes => vec![
            MigrationScript::new(1, "create_record_tables", table_statements()),
            MigrationScript::new(
                2,
                "add_photo_columns",
                Table::ALL
                    .iter()
                    .flat_map(|t| {
                        [
                            format!("ALTER TABLE {t} ADD COLUMN {PHOTO_COLUMN} bytea"),
                            // images are already compressed
                            format!("ALTER TABLE {t} ALTER COLUMN {PHOTO_COLUMN} SET STORAGE EXTERNAL"),
                        ]
                    })
                    .collect(),
            ),
        ],
    }
}

/// Checks the structural invariants of a migration set.
pub fn check_scripts(scripts: &[MigrationScript]) -> Result<(), SchemaError> {
    for (i, s) in scripts.iter().enumerate() {
        if s.version as usize != i + 1 {
            return Err(SchemaError::InvalidScripts(format!(
                "versions must be contiguous from 1; position {} has V{}",
                i + 1,
                s.version
            )));
        }
        if s.statements.is_empty() {
            return Err(SchemaError::InvalidScripts(format!("V{} has no statements", s.version)));
        }
    }
    Ok(())
}

/// Writes one `V<version>__<description>.sql` file per script into `dir`.
pub fn write_migration_files(
    dir: &Path,
    strategy: StorageStrategy,
) -> Result<Vec<PathBuf>, SchemaError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SchemaError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    generate_ddl(strategy)
        .iter()
        .map(|s| {
            let path = dir.join(s.file_name());
            std::fs::write(&path, s.to_sql()).map_err(io(&path))?;
            Ok(path)
        })
        .collect()
}

fn ensure_history_table(client: &mut Client) -> Result<(), postgres::Error> {
    client.batch_execute(&format!(
        "CREATE TABLE IF NOT EXISTS {HISTORY_TABLE} (
            version integer PRIMARY KEY,
            description text NOT NULL,
            strategy text NOT NULL,
            checksum text NOT NULL,
            applied_at timestamptz NOT NULL DEFAULT now()
        )"
    ))
}

struct Applied {
    version: u32,
    strategy: String,
    checksum: String,
}

fn history_exists(client: &mut Client) -> Result<bool, postgres::Error> {
    let row = client.query_one("SELECT to_regclass($1) IS NOT NULL", &[&HISTORY_TABLE])?;
    Ok(row.get(0))
}

fn applied(client: &mut Client) -> Result<Vec<Applied>, postgres::Error> {
    if !history_exists(client)? {
        return Ok(Vec::new());
    }
    let rows = client.query(
        &format!("SELECT version, strategy, checksum FROM {HISTORY_TABLE} ORDER BY version"),
        &[],
    )?;
    Ok(rows
        .iter()
        .map(|r| Applied {
            version: r.get::<_, i32>(0) as u32,
            strategy: r.get(1),
            checksum: r.get(2),
        })
        .collect())
}

/// Strategy recorded by the migrations already applied, if any.
pub fn deployed_strategy(client: &mut Client) -> Result<Option<StorageStrategy>, postgres::Error> {
    Ok(applied(client)?
        .first()
        .and_then(|a| a.strategy.parse().ok()))
}

/// Applies the shipped migrations for `strategy` up to `target`.
pub fn migrate(
    client: &mut Client,
    strategy: StorageStrategy,
    target: Target,
) -> Result<SchemaReport, SchemaError> {
    apply_scripts(client, &generate_ddl(strategy), strategy, target)?;
    verify_schema(client, strategy)
}

/// Applies `scripts` up to `target`, one transaction per script.
///
/// Concurrent callers serialize on a session advisory lock. Returns the
/// versions applied by this call.
pub fn apply_scripts(
    client: &mut Client,
    scripts: &[MigrationScript],
    strategy: StorageStrategy,
    target: Target,
) -> Result<Vec<u32>, SchemaError> {
    check_scripts(scripts)?;
    let latest = scripts.len() as u32;
    let target = match target {
        Target::Latest => latest,
        Target::Version(v) if v > latest => {
            return Err(SchemaError::UnknownVersion { target: v, latest })
        }
        Target::Version(v) => v,
    };

    client.execute("SELECT pg_advisory_lock($1)", &[&MIGRATE_LOCK_KEY])?;
    let result = apply_locked(client, scripts, strategy, target);
    let unlock = client.execute("SELECT pg_advisory_unlock($1)", &[&MIGRATE_LOCK_KEY]);
    let applied = result?;
    unlock?;
    Ok(applied)
}

fn apply_locked(
    client: &mut Client,
    scripts: &[MigrationScript],
    strategy: StorageStrategy,
    target: u32,
) -> Result<Vec<u32>, SchemaError> {
    ensure_history_table(client)?;
    let done = applied(client)?;
    if let Some(first) = done.first() {
        if first.strategy != strategy.as_str() {
            return Err(SchemaError::StrategyMismatch {
                deployed: first.strategy.parse().unwrap_or(strategy.other()),
                requested: strategy,
            });
        }
    }
    for a in &done {
        let shipped = scripts.get(a.version as usize - 1);
        if shipped.map(|s| s.checksum()) != Some(a.checksum.clone()) {
            return Err(SchemaError::ChecksumDrift { version: a.version });
        }
    }
    let current = done.last().map_or(0, |a| a.version);
    if target < current {
        return Err(SchemaError::VersionRegression { current, target });
    }

    let mut newly = Vec::new();
    for script in &scripts[current as usize..target as usize] {
        let mut tx = client.transaction()?;
        for stmt in &script.statements {
            if let Err(source) = tx.batch_execute(stmt) {
                // dropping tx rolls the script back
                return Err(SchemaError::ScriptFailed {
                    version: script.version,
                    source,
                });
            }
        }
        tx.execute(
            &format!(
                "INSERT INTO {HISTORY_TABLE} (version, description, strategy, checksum) VALUES ($1, $2, $3, $4)"
            ),
            &[
                &(script.version as i32),
                &script.description,
                &strategy.as_str(),
                &script.checksum(),
            ],
        )?;
        tx.commit()?;
        log::info!("applied migration {}", script.file_name());
        newly.push(script.version);
    }
    Ok(newly)
}

fn expected_columns(table: Table) -> &'static [&'static str] {
    match table {
        Table::Employees => EmployeeRecord::FIELDS,
        Table::Students => StudentRecord::FIELDS,
    }
}

/// Introspects the catalog and reports what is present and what is missing
/// for a deployment using `expected`.
pub fn verify_schema(
    client: &mut Client,
    expected: StorageStrategy,
) -> Result<SchemaReport, SchemaError> {
    let done = applied(client)?;
    let mut missing = Vec::new();
    let mut photo_columns = Vec::new();

    if !history_exists(client)? {
        missing.push(HISTORY_TABLE.to_owned());
    }
    // Length bounds are in characters, which only holds for UTF8.
    let encoding: String = client
        .query_one("SELECT pg_encoding_to_char(encoding) FROM pg_database WHERE datname = current_database()", &[])?
        .get(0);
    if encoding != "UTF8" {
        missing.push(format!("UTF8 database encoding (found {encoding})"));
    }

    if expected == StorageStrategy::LargeObject {
        let domain = client.query_opt(
            "SELECT format_type(t.typbasetype, NULL) FROM pg_type t
             WHERE t.typname = $1 AND t.typtype = 'd'
               AND t.typnamespace = 'public'::regnamespace",
            &[&LO_DOMAIN],
        )?;
        match domain {
            Some(row) if row.get::<_, String>(0) == "oid" => {}
            _ => missing.push(LO_DOMAIN.to_owned()),
        }
        let func = client.query_one(
            "SELECT count(*) FROM pg_proc WHERE proname = $1",
            &[&UNLINK_FUNCTION],
        )?;
        if func.get::<_, i64>(0) == 0 {
            missing.push(format!("{UNLINK_FUNCTION}()"));
        }
    }

    for table in Table::ALL {
        let exists: bool = client
            .query_one("SELECT to_regclass($1) IS NOT NULL", &[&table.sql_name()])?
            .get(0);
        if !exists {
            missing.push(table.sql_name().to_owned());
            continue;
        }
        let rows = client.query(
            "SELECT a.attname::text, t.typname::text,
                    CASE WHEN t.typtype = 'd' THEN format_type(t.typbasetype, NULL)
                         ELSE format_type(a.atttypid, NULL) END
             FROM pg_attribute a JOIN pg_type t ON t.oid = a.atttypid
             WHERE a.attrelid = to_regclass($1) AND a.attnum > 0 AND NOT a.attisdropped",
            &[&table.sql_name()],
        )?;
        let present: Vec<String> = rows.iter().map(|r| r.get(0)).collect();
        for col in expected_columns(table) {
            if !present.iter().any(|p| p == col) {
                missing.push(format!("{}.{col}", table.sql_name()));
            }
        }
        match rows.iter().find(|r| r.get::<_, String>(0) == PHOTO_COLUMN) {
            Some(row) => {
                let pc = PhotoColumn {
                    table: table.sql_name().to_owned(),
                    column: PHOTO_COLUMN.to_owned(),
                    declared_type: row.get(1),
                    resolved_type: row.get(2),
                };
                let ok = match expected {
                    StorageStrategy::LargeObject => {
                        pc.declared_type == LO_DOMAIN && pc.resolved_type == "oid"
                    }
                    StorageStrategy::InlineBytes => pc.resolved_type == "bytea",
                };
                if !ok {
                    missing.push(format!(
                        "{}.{PHOTO_COLUMN} ({})",
                        table.sql_name(),
                        expected.column_type()
                    ));
                }
                photo_columns.push(pc);
            }
            None => missing.push(format!("{}.{PHOTO_COLUMN}", table.sql_name())),
        }
        if expected == StorageStrategy::LargeObject {
            let trig: i64 = client
                .query_one(
                    "SELECT count(*) FROM pg_trigger WHERE tgrelid = to_regclass($1) AND tgname = $2",
                    &[&table.sql_name(), &trigger_name(table)],
                )?
                .get(0);
            if trig == 0 {
                missing.push(format!("trigger {}", trigger_name(table)));
            }
        }
    }

    Ok(SchemaReport {
        strategy: done.first().and_then(|a| a.strategy.parse().ok()),
        applied_versions: done.iter().map(|a| a.version).collect(),
        missing_objects: missing,
        photo_columns,
    })
}
