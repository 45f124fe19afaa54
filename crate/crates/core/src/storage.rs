//! Photo persistence under two strategies.
//!
//! [`StorageStrategy::LargeObject`] keeps the bytes in the server's
//! large-object store and puts the object identifier in the row's `lo`
//! column. [`StorageStrategy::InlineBytes`] writes the bytes into a `bytea`
//! column. Every operation is a single transaction.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use postgres::{Client, IsolationLevel, Transaction};
use serde::{Deserialize, Serialize};

use crate::imaging::{ImageBlob, ImageError};
use crate::table::{Table, PHOTO_COLUMN};

pub const DEFAULT_MAX_PHOTO_BYTES: usize = 16 * 1024 * 1024;
pub const DEFAULT_CHUNK_BYTES: usize = 256 * 1024;

/// Advisory lock key held while vacuuming orphans.
pub const VACUUM_LOCK_KEY: i64 = 0x7065_7273_7661_6375;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorageStrategy {
    #[default]
    LargeObject,
    InlineBytes,
}

impl StorageStrategy {
    pub const ALL: [StorageStrategy; 2] = [StorageStrategy::LargeObject, StorageStrategy::InlineBytes];

    pub fn as_str(self) -> &'static str {
        match self {
            StorageStrategy::LargeObject => "large_object",
            StorageStrategy::InlineBytes => "inline_bytes",
        }
    }

    /// SQL type of the photo column.
    pub fn column_type(self) -> &'static str {
        match self {
            StorageStrategy::LargeObject => "lo",
            StorageStrategy::InlineBytes => "bytea",
        }
    }

    pub fn other(self) -> Self {
        match self {
            StorageStrategy::LargeObject => StorageStrategy::InlineBytes,
            StorageStrategy::InlineBytes => StorageStrategy::LargeObject,
        }
    }
}

impl fmt::Display for StorageStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StorageStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "large_object" | "largeobject" | "lo" => Ok(StorageStrategy::LargeObject),
            "inline_bytes" | "inlinebytes" | "bytea" => Ok(StorageStrategy::InlineBytes),
            _ => Err(format!("unknown storage strategy {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PhotoRef {
    pub strategy: StorageStrategy,
    pub table: Table,
    pub record_id: i32,
    /// Present exactly when `strategy` is `LargeObject`.
    pub object_id: Option<u32>,
}

#[derive(Debug, thiserror::Error)]
pub enum StorageError {
    #[error("database error: {0}")]
    Db(#[from] postgres::Error),
    #[error("{table} row {record_id} not found")]
    RowNotFound { table: Table, record_id: i32 },
    #[error("{0}")]
    InvalidImage(#[from] ImageError),
    #[error("photo of {size} bytes exceeds limit of {max} bytes")]
    Oversize { size: usize, max: usize },
    #[error("dangling photo reference: {table} row {record_id} points at missing large object {object_id}")]
    DanglingPhoto {
        table: Table,
        record_id: i32,
        object_id: u32,
    },
    #[error("operation requires the large_object strategy")]
    WrongStrategy,
    #[error("another orphan vacuum is in progress")]
    VacuumBusy,
}

/// Photo operations for one deployment strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhotoStore {
    strategy: StorageStrategy,
    max_bytes: usize,
    chunk_bytes: usize,
}

impl PhotoStore {
    pub fn new(strategy: StorageStrategy) -> Self {
        Self {
            strategy,
            max_bytes: DEFAULT_MAX_PHOTO_BYTES,
            chunk_bytes: DEFAULT_CHUNK_BYTES,
        }
    }

    pub fn with_max_bytes(mut self, max_bytes: usize) -> Self {
        self.max_bytes = max_bytes;
        self
    }

    pub fn with_chunk_bytes(mut self, chunk_bytes: usize) -> Self {
        self.chunk_bytes = chunk_bytes.max(1);
        self
    }

    pub fn strategy(&self) -> StorageStrategy {
        self.strategy
    }

    pub fn max_bytes(&self) -> usize {
        self.max_bytes
    }

    /// Writes `blob` as the photo of `(table, record_id)`, replacing any
    /// previous photo. A replaced large object is unlinked in the same
    /// transaction.
    pub fn store_photo(
        &self,
        client: &mut Client,
        table: Table,
        record_id: i32,
        blob: &ImageBlob,
    ) -> Result<PhotoRef, StorageError> {
        if blob.len() > self.max_bytes {
            return Err(StorageError::Oversize {
                size: blob.len(),
                max: self.max_bytes,
            });
        }
        let mut tx = client.transaction()?;
        let object_id = match self.strategy {
            StorageStrategy::LargeObject => {
                let previous = lock_row(&mut tx, table, record_id)?;
                let oid: u32 = tx.query_one("SELECT lo_create(0)", &[])?.get(0);
                let mut offset = 0i64;
                for chunk in blob.bytes().chunks(self.chunk_bytes) {
                    tx.execute("SELECT lo_put($1, $2, $3)", &[&oid, &offset, &chunk])?;
                    offset += chunk.len() as i64;
                }
                tx.execute(
                    &format!(
                        "UPDATE {table} SET {PHOTO_COLUMN} = $1::oid WHERE {} = $2",
                        table.id_column()
                    ),
                    &[&oid, &record_id],
                )?;
                if let Some(old) = previous.filter(|&old| old != oid) {
                    unlink_if_exists(&mut tx, old)?;
                }
                Some(oid)
            }
            StorageStrategy::InlineBytes => {
                lock_row_inline(&mut tx, table, record_id)?;
                // A bytea value travels as one bind parameter.
                tx.execute(
                    &format!(
                        "UPDATE {table} SET {PHOTO_COLUMN} = $1 WHERE {} = $2",
                        table.id_column()
                    ),
                    &[&blob.bytes(), &record_id],
                )?;
                None
            }
        };
        tx.commit()?;
        Ok(PhotoRef {
            strategy: self.strategy,
            table,
            record_id,
            object_id,
        })
    }

    /// Returns the stored photo, `None` when the row has none.
    pub fn fetch_photo(
        &self,
        client: &mut Client,
        table: Table,
        record_id: i32,
    ) -> Result<Option<ImageBlob>, StorageError> {
        // One snapshot for the column read and every chunk read, so a
        // concurrent replacement cannot unlink the object mid-read.
        let mut tx = client
            .build_transaction()
            .isolation_level(IsolationLevel::RepeatableRead)
            .read_only(true)
            .start()?;
        let bytes = match self.strategy {
            StorageStrategy::LargeObject => {
                let row = tx.query_opt(
                    &format!(
                        "SELECT {PHOTO_COLUMN}::oid,
                                EXISTS (SELECT 1 FROM pg_largeobject_metadata m WHERE m.oid = t.{PHOTO_COLUMN})
                         FROM {table} t WHERE {} = $1",
                        table.id_column()
                    ),
                    &[&record_id],
                )?;
                let row = row.ok_or(StorageError::RowNotFound { table, record_id })?;
                let Some(oid) = row.get::<_, Option<u32>>(0) else {
                    return Ok(None);
                };
                if !row.get::<_, bool>(1) {
                    return Err(StorageError::DanglingPhoto {
                        table,
                        record_id,
                        object_id: oid,
                    });
                }
                read_large_object(&mut tx, oid, self.chunk_bytes)?
            }
            StorageStrategy::InlineBytes => {
                let row = tx.query_opt(
                    &format!(
                        "SELECT {PHOTO_COLUMN} FROM {table} WHERE {} = $1",
                        table.id_column()
                    ),
                    &[&record_id],
                )?;
                let row = row.ok_or(StorageError::RowNotFound { table, record_id })?;
                match row.get::<_, Option<Vec<u8>>>(0) {
                    Some(b) => b,
                    None => return Ok(None),
                }
            }
        };
        tx.commit()?;
        Ok(Some(ImageBlob::probe(bytes)?))
    }

    /// Clears the photo; under `LargeObject` the object is unlinked too.
    /// Returns `false` when the row had no photo.
    pub fn delete_photo(
        &self,
        client: &mut Client,
        table: Table,
        record_id: i32,
    ) -> Result<bool, StorageError> {
        let mut tx = client.transaction()?;
        let had_photo = match self.strategy {
            StorageStrategy::LargeObject => {
                let previous = lock_row(&mut tx, table, record_id)?;
                if let Some(old) = previous {
                    tx.execute(
                        &format!(
                            "UPDATE {table} SET {PHOTO_COLUMN} = NULL WHERE {} = $1",
                            table.id_column()
                        ),
                        &[&record_id],
                    )?;
                    unlink_if_exists(&mut tx, old)?;
                }
                previous.is_some()
            }
            StorageStrategy::InlineBytes => {
                let had = lock_row_inline(&mut tx, table, record_id)?;
                if had {
                    tx.execute(
                        &format!(
                            "UPDATE {table} SET {PHOTO_COLUMN} = NULL WHERE {} = $1",
                            table.id_column()
                        ),
                        &[&record_id],
                    )?;
                }
                had
            }
        };
        tx.commit()?;
        Ok(had_photo)
    }

    /// Large objects present in the catalog but referenced by no photo column.
    pub fn list_orphans(&self, client: &mut Client) -> Result<BTreeSet<u32>, StorageError> {
        if self.strategy != StorageStrategy::LargeObject {
            return Err(StorageError::WrongStrategy);
        }
        query_orphans(client)
    }

    /// Unlinks every orphan and returns how many were reclaimed.
    ///
    /// Objects created by uncommitted transactions are invisible here, so an
    /// in-flight store is never affected.
    pub fn vacuum_orphans(&self, client: &mut Client) -> Result<u64, StorageError> {
        if self.strategy != StorageStrategy::LargeObject {
            return Err(StorageError::WrongStrategy);
        }
        let got: bool = client
            .query_one("SELECT pg_try_advisory_lock($1)", &[&VACUUM_LOCK_KEY])?
            .get(0);
        if !got {
            return Err(StorageError::VacuumBusy);
        }
        let result = (|| -> Result<u64, StorageError> {
            let mut tx = client.transaction()?;
            let orphans = query_orphans_in(&mut tx)?;
            let mut reclaimed = 0u64;
            for oid in orphans {
                if unlink_if_exists(&mut tx, oid)? {
                    reclaimed += 1;
                }
            }
            tx.commit()?;
            Ok(reclaimed)
        })();
        let unlock = client.execute("SELECT pg_advisory_unlock($1)", &[&VACUUM_LOCK_KEY]);
        let reclaimed = result?;
        unlock?;
        if reclaimed > 0 {
            log::info!("vacuum reclaimed {reclaimed} orphaned large objects");
        }
        Ok(reclaimed)
    }
}

/// Locks the row and returns its current large-object id (if any).
fn lock_row(
    tx: &mut Transaction<'_>,
    table: Table,
    record_id: i32,
) -> Result<Option<u32>, StorageError> {
    let row = tx.query_opt(
        &format!(
            "SELECT {PHOTO_COLUMN}::oid FROM {table} WHERE {} = $1 FOR UPDATE",
            table.id_column()
        ),
        &[&record_id],
    )?;
    match row {
        Some(r) => Ok(r.get::<_, Option<u32>>(0)),
        None => Err(StorageError::RowNotFound { table, record_id }),
    }
}

/// Locks the row and reports whether it has a photo.
fn lock_row_inline(
    tx: &mut Transaction<'_>,
    table: Table,
    record_id: i32,
) -> Result<bool, StorageError> {
    let row = tx.query_opt(
        &format!(
            "SELECT {PHOTO_COLUMN} IS NOT NULL FROM {table} WHERE {} = $1 FOR UPDATE",
            table.id_column()
        ),
        &[&record_id],
    )?;
    match row {
        Some(r) => Ok(r.get(0)),
        None => Err(StorageError::RowNotFound { table, record_id }),
    }
}

fn unlink_if_exists(tx: &mut Transaction<'_>, oid: u32) -> Result<bool, postgres::Error> {
    let n = tx.execute(
        "SELECT lo_unlink(oid) FROM pg_largeobject_metadata WHERE oid = $1",
        &[&oid],
    )?;
    Ok(n > 0)
}

fn read_large_object(
    tx: &mut Transaction<'_>,
    oid: u32,
    chunk: usize,
) -> Result<Vec<u8>, postgres::Error> {
    let mut out = Vec::new();
    let mut offset = 0i64;
    loop {
        let part: Vec<u8> = tx
            .query_one("SELECT lo_get($1, $2, $3)", &[&oid, &offset, &(chunk as i32)])?
            .get(0);
        let n = part.len();
        out.extend_from_slice(&part);
        if n < chunk {
            return Ok(out);
        }
        offset += n as i64;
    }
}

fn orphan_sql() -> String {
    let refs: Vec<String> = Table::ALL
        .iter()
        .map(|t| {
            format!(
                "NOT EXISTS (SELECT 1 FROM {t} WHERE {PHOTO_COLUMN}::oid = m.oid)"
            )
        })
        .collect();
    format!(
        "SELECT m.oid FROM pg_largeobject_metadata m WHERE {} ORDER BY m.oid",
        refs.join(" AND ")
    )
}

fn query_orphans(client: &mut Client) -> Result<BTreeSet<u32>, StorageError> {
    let rows = client.query(&orphan_sql(), &[])?;
    Ok(rows.iter().map(|r| r.get::<_, u32>(0)).collect())
}

fn query_orphans_in(tx: &mut Transaction<'_>) -> Result<BTreeSet<u32>, StorageError> {
    let rows = tx.query(&orphan_sql(), &[])?;
    Ok(rows.iter().map(|r| r.get::<_, u32>(0)).collect())
}
