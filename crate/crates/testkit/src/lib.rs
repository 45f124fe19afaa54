//! Shared test fixtures: throwaway databases, catalog queries, an
//! independent Code 39 decoder and image builders.
//!
//! Nothing here depends on `personnel-core`, so the checks it provides do
//! not share code with the implementation under test.

pub mod code39;
pub mod crop;
pub mod db;
pub mod images;

pub use db::{large_objects, referenced_lo_oids, TestDb};

use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
