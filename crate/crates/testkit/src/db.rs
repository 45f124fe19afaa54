//! Throwaway PostgreSQL databases and catalog queries.

use std::collections::BTreeSet;

use postgres::{Client, NoTls};

/// Connection settings for test databases, from `PERSONNEL_TEST_DB_HOST`,
/// `_PORT`, `_USER` and `_PASSWORD`, defaulting to a local trust login.
#[derive(Debug, Clone)]
pub struct ServerParams {
    pub host: String,
    pub port: u16,
    pub user: String,
    pub password: Option<String>,
}

impl ServerParams {
    pub fn from_env() -> Self {
        let var = |k: &str| std::env::var(format!("PERSONNEL_TEST_DB_{k}")).ok();
        Self {
            host: var("HOST").unwrap_or_else(|| "127.0.0.1".into()),
            port: var("PORT").and_then(|p| p.parse().ok()).unwrap_or(5432),
            user: var("USER").unwrap_or_else(|| "postgres".into()),
            password: var("PASSWORD"),
        }
    }

    pub fn connect(&self, database: &str) -> Result<Client, postgres::Error> {
        let mut cfg = postgres::Config::new();
        cfg.host(&self.host)
            .port(self.port)
            .user(&self.user)
            .dbname(database)
            .connect_timeout(std::time::Duration::from_secs(5));
        if let Some(pw) = &self.password {
            cfg.password(pw);
        }
        cfg.connect(NoTls)
    }
}

/// A freshly created database, dropped (forcibly) when this value drops.
pub struct TestDb {
    pub params: ServerParams,
    pub name: String,
}

impl TestDb {
    /// `None` when no server is reachable.
    pub fn try_new() -> Option<Self> {
        let params = ServerParams::from_env();
        let mut admin = params.connect("postgres").ok()?;
        let name = format!("personnel_test_{:016x}", rand::random::<u64>());
        admin
            .batch_execute(&format!(
                "CREATE DATABASE {name} ENCODING 'UTF8' LC_COLLATE 'C' LC_CTYPE 'C' TEMPLATE template0"
            ))
            .expect("create test database");
        Some(Self { params, name })
    }

    /// Panics when no server is reachable.
    #[allow(clippy::new_without_default)]
    pub fn new() -> Self {
        Self::try_new().unwrap_or_else(|| {
            let p = ServerParams::from_env();
            panic!(
                "no PostgreSQL server at {}:{} as {} (set PERSONNEL_TEST_DB_*)",
                p.host, p.port, p.user
            )
        })
    }

    pub fn client(&self) -> Client {
        self.params.connect(&self.name).expect("connect to test database")
    }
}

impl Drop for TestDb {
    fn drop(&mut self) {
        if let Ok(mut admin) = self.params.connect("postgres") {
            let _ = admin.batch_execute(&format!(
                "DROP DATABASE IF EXISTS {} WITH (FORCE)",
                self.name
            ));
        }
    }
}

/// Every large object in the catalog.
pub fn large_objects(client: &mut Client) -> BTreeSet<u32> {
    client
        .query("SELECT oid FROM pg_largeobject_metadata", &[])
        .expect("query large-object catalog")
        .iter()
        .map(|r| r.get(0))
        .collect()
}

/// Non-null values of every user column whose type is the `lo` domain,
/// found by walking the catalog rather than by table name.
pub fn referenced_lo_oids(client: &mut Client) -> BTreeSet<u32> {
    let columns: Vec<(String, String, String)> = client
        .query(
            "SELECT c.table_schema, c.table_name, c.column_name
             FROM information_schema.columns c
             WHERE c.domain_name = 'lo'",
            &[],
        )
        .expect("query lo columns")
        .iter()
        .map(|r| (r.get(0), r.get(1), r.get(2)))
        .collect();
    let mut out = BTreeSet::new();
    for (schema, table, column) in columns {
        let sql = format!(
            "SELECT \"{column}\"::oid FROM \"{schema}\".\"{table}\" WHERE \"{column}\" IS NOT NULL"
        );
        for row in client.query(&sql, &[]).expect("query lo column") {
            out.insert(row.get::<_, u32>(0));
        }
    }
    out
}
