//! HTTP/JSON API over the personnel records, photo storage and ID-card
//! modules, plus the pieces the `personnel` CLI is built from.

pub mod api;
pub mod auth;
pub mod error;
pub mod pool;
pub mod settings;

pub use api::{build_state, router, serve, AppState, ServeError};
pub use error::ApiError;
pub use settings::Settings;
