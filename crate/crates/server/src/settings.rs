//! Server settings: a TOML file plus environment overrides.
//!
//! ```toml
//! strategy = "large_object"
//!
//! [database]
//! host = "127.0.0.1"
//! database = "personnel"
//!
//! [server]
//! bind = "127.0.0.1:8080"
//! admin_user = "admin"
//! admin_password = "change-me"
//!
//! [idcard]
//! employee_layout = "employee-card.layout"
//! ```

use std::path::{Path, PathBuf};

use personnel_core::config::ConfigError;
use personnel_core::idcard::{CardLayout, LayoutError};
use personnel_core::{ConnectionConfig, StorageStrategy, Table};
use serde::Deserialize;

pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 16 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum SettingsError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed settings file {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error(transparent)]
    Database(#[from] ConfigError),
    #[error("environment variable {name} has invalid value {value:?}")]
    BadEnv { name: &'static str, value: String },
    #[error("card layout {path}: {source}")]
    Layout { path: PathBuf, source: LayoutError },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub strategy: StorageStrategy,
    pub database: ConnectionConfig,
    pub server: ServerSettings,
    pub idcard: IdcardSettings,
}

#[derive(Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSettings {
    pub bind: String,
    pub admin_user: String,
    /// Login is refused while unset.
    pub admin_password: Option<String>,
    pub session_ttl_secs: u64,
    pub max_upload_bytes: usize,
    pub pool_size: u32,
}

impl Default for ServerSettings {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".to_owned(),
            admin_user: "admin".to_owned(),
            admin_password: None,
            session_ttl_secs: 8 * 3600,
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
            pool_size: 16,
        }
    }
}

impl std::fmt::Debug for ServerSettings {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ServerSettings")
            .field("bind", &self.bind)
            .field("admin_user", &self.admin_user)
            .field("admin_password", &self.admin_password.as_ref().map(|_| "***"))
            .field("session_ttl_secs", &self.session_ttl_secs)
            .field("max_upload_bytes", &self.max_upload_bytes)
            .field("pool_size", &self.pool_size)
            .finish()
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdcardSettings {
    pub employee_layout: Option<PathBuf>,
    pub student_layout: Option<PathBuf>,
}

impl Settings {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self, SettingsError> {
        toml::from_str(text).map_err(|source| SettingsError::Parse {
            path: path.to_owned(),
            source,
        })
    }

    /// Reads `path` (defaults when `None`) and applies the environment.
    pub fn load(path: Option<&Path>) -> Result<Self, SettingsError> {
        let base = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| SettingsError::Read {
                    path: p.to_owned(),
                    source,
                })?;
                Self::from_toml_str(&text, p)?
            }
            None => Self::default(),
        };
        base.with_env_overrides(|k| std::env::var(k).ok())
    }

    /// `PERSONNEL_DB_*`, `PERSONNEL_STRATEGY`, `PERSONNEL_BIND` and
    /// `PERSONNEL_ADMIN_PASSWORD`.
    pub fn with_env_overrides(
        mut self,
        lookup: impl Fn(&str) -> Option<String>,
    ) -> Result<Self, SettingsError> {
        self.database = self.database.with_env_overrides(&lookup)?;
        if let Some(v) = lookup("PERSONNEL_STRATEGY") {
            self.strategy = v.parse().map_err(|_| SettingsError::BadEnv {
                name: "PERSONNEL_STRATEGY",
                value: v.clone(),
            })?;
        }
        if let Some(v) = lookup("PERSONNEL_BIND") {
            self.server.bind = v;
        }
        if let Some(v) = lookup("PERSONNEL_ADMIN_PASSWORD") {
            self.server.admin_password = Some(v);
        }
        Ok(self)
    }

    /// The configured card layout for `table`, or the built-in default.
    pub fn layout(&self, table: Table) -> Result<CardLayout, SettingsError> {
        let (path, default) = match table {
            Table::Employees => (&self.idcard.employee_layout, CardLayout::default_employee()),
            Table::Students => (&self.idcard.student_layout, CardLayout::default_student()),
        };
        let Some(path) = path else { return Ok(default) };
        let text = std::fs::read_to_string(path).map_err(|source| SettingsError::Read {
            path: path.clone(),
            source,
        })?;
        CardLayout::parse(&text).map_err(|source| SettingsError::Layout {
            path: path.clone(),
            source,
        })
    }
}
