#![allow(dead_code)]

use std::sync::mpsc;
use std::thread::JoinHandle;

use personnel_core::{schema, ConnectionConfig, StorageStrategy};
use personnel_server::{build_state, serve, Settings};
use personnel_testkit::TestDb;
use reqwest::blocking::{Client, RequestBuilder};

pub const PASSWORD: &str = "s3cret";

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

pub fn settings(db: &TestDb, strategy: StorageStrategy) -> Settings {
    let mut s = Settings {
        strategy,
        database: config(db),
        ..Settings::default()
    };
    s.server.admin_password = Some(PASSWORD.to_owned());
    s.server.pool_size = 12;
    s
}

/// A migrated database and an in-process server on an ephemeral port.
pub struct TestServer {
    pub base: String,
    pub http: Client,
    pub token: String,
    shutdown: Option<mpsc::Sender<()>>,
    thread: Option<JoinHandle<()>>,
    pub db: TestDb,
}

impl TestServer {
    pub fn start(strategy: StorageStrategy) -> Option<Self> {
        Self::start_with(strategy, |_| {})
    }

    pub fn start_with(strategy: StorageStrategy, tweak: impl FnOnce(&mut Settings)) -> Option<Self> {
        let Some(db) = TestDb::try_new() else {
            eprintln!("skipping: no PostgreSQL server reachable");
            return None;
        };
        schema::migrate(&mut db.client(), strategy, schema::Target::Latest).expect("migrate");
        let mut s = settings(&db, strategy);
        tweak(&mut s);
        let can_login = s.server.admin_password.is_some();
        let state = build_state(&s).expect("build state");
        let (tx, rx) = mpsc::channel::<()>();
        let (addr_tx, addr_rx) = mpsc::channel();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .expect("runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.expect("bind");
                addr_tx.send(listener.local_addr().expect("addr")).expect("send addr");
                let stop = async move {
                    let _ = tokio::task::spawn_blocking(move || rx.recv()).await;
                };
                serve(listener, state, stop).await.expect("serve");
            });
        });
        let addr = addr_rx.recv().expect("server address");
        let http = Client::builder()
            .timeout(std::time::Duration::from_secs(120))
            .build()
            .expect("http client");
        let base = format!("http://{addr}");
        let token = if can_login { login(&http, &base) } else { String::new() };
        Some(Self {
            base,
            http,
            token,
            shutdown: Some(tx),
            thread: Some(thread),
            db,
        })
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn get(&self, path: &str) -> RequestBuilder {
        self.http.get(self.url(path)).bearer_auth(&self.token)
    }

    pub fn post(&self, path: &str) -> RequestBuilder {
        self.http.post(self.url(path)).bearer_auth(&self.token)
    }

    pub fn put(&self, path: &str) -> RequestBuilder {
        self.http.put(self.url(path)).bearer_auth(&self.token)
    }

    pub fn delete(&self, path: &str) -> RequestBuilder {
        self.http.delete(self.url(path)).bearer_auth(&self.token)
    }

    /// Signals shutdown and waits for in-flight requests to drain.
    pub fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            t.join().expect("server thread");
        }
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        self.stop();
    }
}

pub fn login(http: &Client, base: &str) -> String {
    let resp = http
        .post(format!("{base}/api/login"))
        .json(&serde_json::json!({"username": "admin", "password": PASSWORD}))
        .send()
        .expect("login");
    assert_eq!(resp.status(), 200);
    let body: serde_json::Value = resp.json().expect("login json");
    body["token"].as_str().expect("token").to_owned()
}

pub fn employee_json() -> serde_json::Value {
    serde_json::to_value(personnel_core::records::sample_employee()).expect("json")
}
