//! Database connection settings.
//!
//! Settings come from a TOML file, from `PERSONNEL_DB_*` environment
//! variables, or both (environment wins).

use std::env;
use std::fmt;
use std::path::Path;

use postgres::{Client, NoTls};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("environment variable {name} has invalid value {value:?}")]
    BadEnv { name: &'static str, value: String },
    #[error("connection failure: {0}")]
    Connect(#[from] postgres::Error),
    #[error("tls setup failed: {0}")]
    Tls(#[from] native_tls::Error),
}

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConnectionConfig {
    pub host: String,
    pub port: u16,
    pub database: String,
    pub user: String,
    pub password: Option<String>,
    pub tls: bool,
}

impl Default for ConnectionConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".to_owned(),
            port: 5432,
            database: "personnel".to_owned(),
            user: "postgres".to_owned(),
            password: None,
            tls: false,
        }
    }
}

// Keeps the password out of logs.
impl fmt::Debug for ConnectionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConnectionConfig")
            .field("host", &self.host)
            .field("port", &self.port)
            .field("database", &self.database)
            .field("user", &self.user)
            .field("password", &self.password.as_ref().map(|_| "***"))
            .field("tls", &self.tls)
            .finish()
    }
}

impl ConnectionConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Defaults overridden by any `PERSONNEL_DB_*` variables that are set.
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::default().with_env_overrides(|k| env::var(k).ok())
    }

    /// Applies `PERSONNEL_DB_{HOST,PORT,NAME,USER,PASSWORD,TLS}` from `lookup`.
    pub fn with_env_overrides(
        mut self,
        lookup: impl Fn(&str) -> Option<String>,
    ) -> Result<Self, ConfigError> {
        if let Some(v) = lookup("PERSONNEL_DB_HOST") {
            self.host = v;
        }
        if let Some(v) = lookup("PERSONNEL_DB_PORT") {
            self.port = v.parse().map_err(|_| ConfigError::BadEnv {
                name: "PERSONNEL_DB_PORT",
                value: v.clone(),
            })?;
        }
        if let Some(v) = lookup("PERSONNEL_DB_NAME") {
            self.database = v;
        }
        if let Some(v) = lookup("PERSONNEL_DB_USER") {
            self.user = v;
        }
        if let Some(v) = lookup("PERSONNEL_DB_PASSWORD") {
            self.password = Some(v);
        }
        if let Some(v) = lookup("PERSONNEL_DB_TLS") {
            self.tls = match v.to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" | "on" => true,
                "0" | "false" | "no" | "off" => false,
                _ => {
                    return Err(ConfigError::BadEnv {
                        name: "PERSONNEL_DB_TLS",
                        value: v,
                    })
                }
            };
        }
        Ok(self)
    }

    pub fn with_database(&self, database: impl Into<String>) -> Self {
        Self {
            database: database.into(),
            ..self.clone()
        }
    }

    pub fn to_pg_config(&self) -> postgres::Config {
        let mut cfg = postgres::Config::new();
        cfg.host(&self.host)
            .port(self.port)
            .dbname(&self.database)
            .user(&self.user)
            .application_name("personnel");
        if let Some(pw) = &self.password {
            cfg.password(pw);
        }
        cfg.ssl_mode(if self.tls {
            postgres::config::SslMode::Require
        } else {
            postgres::config::SslMode::Disable
        });
        cfg
    }

    pub fn connect(&self) -> Result<Client, ConfigError> {
        let cfg = self.to_pg_config();
        if self.tls {
            let connector = native_tls::TlsConnector::new()?;
            Ok(cfg.connect(postgres_native_tls::MakeTlsConnector::new(connector))?)
        } else {
            Ok(cfg.connect(NoTls)?)
        }
    }
}
