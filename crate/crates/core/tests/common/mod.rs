#![allow(dead_code)]

use personnel_core::{schema, ConnectionConfig, StorageStrategy};
use personnel_testkit::TestDb;
use postgres::Client;

/// A fresh database, or `None` (with a note on stderr) when no server runs.
pub fn db() -> Option<TestDb> {
    let db = TestDb::try_new();
    if db.is_none() {
        eprintln!("skipping: no PostgreSQL server reachable");
    }
    db
}

pub fn config(db: &TestDb) -> ConnectionConfig {
    ConnectionConfig {
        host: db.params.host.clone(),
        port: db.params.port,
        database: db.name.clone(),
        user: db.params.user.clone(),
        password: db.params.password.clone(),
        tls: false,
    }
}

/// A fresh database migrated to the latest version for `strategy`.
pub fn migrated(strategy: StorageStrategy) -> Option<(TestDb, Client)> {
    let db = db()?;
    let mut client = db.client();
    schema::migrate(&mut client, strategy, schema::Target::Latest).expect("migrate");
    Some((db, client))
}
