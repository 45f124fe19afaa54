//! Personnel records (employees and students) with photos kept in
//! PostgreSQL, either as server-side large objects behind an `lo` domain
//! column or inline as `bytea`.
//!
//! Modules:
//! - [`schema`]: DDL generation and versioned migrations
//! - [`storage`]: photo store/fetch/delete and orphan vacuum
//! - [`records`]: validated CRUD and CSV import/export
//! - [`imaging`]: image validation, auto-crop, resize
//! - [`idcard`]: Code 39 barcodes and ID-card rendering
//! - [`bench`]: large-object vs inline storage benchmark

pub mod bench;
pub mod config;
pub mod idcard;
pub mod imaging;
pub mod par;
pub mod payload;
pub mod records;
pub mod schema;
pub mod storage;
pub mod table;

pub use config::ConnectionConfig;
pub use imaging::{CropBox, ImageBlob, ImageFormat};
pub use records::{EmployeeRecord, Record, StudentRecord};
pub use storage::{PhotoRef, PhotoStore, StorageStrategy};
pub use table::Table;
