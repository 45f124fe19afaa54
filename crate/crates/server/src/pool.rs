//! r2d2 connection manager over [`ConnectionConfig`].

use personnel_core::config::ConfigError;
use personnel_core::ConnectionConfig;
use postgres::Client;

#[derive(Debug, Clone)]
pub struct PgManager {
    config: ConnectionConfig,
}

impl PgManager {
    pub fn new(config: ConnectionConfig) -> Self {
        Self { config }
    }
}

impl r2d2::ManageConnection for PgManager {
    type Connection = Client;
    type Error = ConfigError;

    fn connect(&self) -> Result<Client, ConfigError> {
        self.config.connect()
    }

    fn is_valid(&self, conn: &mut Client) -> Result<(), ConfigError> {
        Ok(conn.simple_query("")?).map(|_| ())
    }

    fn has_broken(&self, conn: &mut Client) -> bool {
        conn.is_closed()
    }
}

pub type Pool = r2d2::Pool<PgManager>;
