//! HTTP routes, shared state and the server loop.

use std::collections::HashMap;
use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

use axum::body::{to_bytes, Body, Bytes};
use axum::extract::{DefaultBodyLimit, Path, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use personnel_core::idcard::{render_card, CardLayout};
use personnel_core::imaging::{
    auto_crop_box, normalize_badge_photo, Aspect, BADGE_ASPECT, BADGE_HEIGHT, BADGE_WIDTH,
};
use personnel_core::records::{
    self, validation_rules, EmployeeFilter, Page, RecordError, StudentFilter, PAGE_LIMIT_MAX,
};
use personnel_core::schema::{self, SchemaError};
use personnel_core::{
    CropBox, EmployeeRecord, PhotoStore, Record, StorageStrategy, StudentRecord, Table,
};
use postgres::Client;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::auth::{credentials_match, SessionStore, SessionToken};
use crate::error::ApiError;
use crate::pool::{PgManager, Pool};
use crate::settings::{Settings, SettingsError};

const JSON_BODY_LIMIT: usize = 1024 * 1024;
const DEFAULT_PAGE_LIMIT: u32 = 50;
const POOL_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Settings(#[from] SettingsError),
    #[error("database pool: {0}")]
    Pool(#[from] r2d2::Error),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("database is not ready: {0}")]
    NotReady(String),
    #[error("server io: {0}")]
    Io(#[from] std::io::Error),
}

struct Inner {
    pool: Option<Pool>,
    store: PhotoStore,
    sessions: SessionStore,
    admin_user: String,
    admin_password: Option<String>,
    max_upload_bytes: usize,
    employee_layout: CardLayout,
    student_layout: CardLayout,
}

impl Inner {
    fn pool(&self) -> &Pool {
        self.pool.as_ref().expect("pool present until drop")
    }
}

/// Sync clients must not be closed on a runtime thread.
impl Drop for Inner {
    fn drop(&mut self) {
        if let Some(pool) = self.pool.take() {
            let _ = std::thread::spawn(move || drop(pool)).join();
        }
    }
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn strategy(&self) -> StorageStrategy {
        self.0.store.strategy()
    }

    fn layout(&self, table: Table) -> &CardLayout {
        match table {
            Table::Employees => &self.0.employee_layout,
            Table::Students => &self.0.student_layout,
        }
    }

    /// Runs blocking database work on the blocking pool.
    async fn db<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Client, &PhotoStore) -> Result<T, ApiError> + Send + 'static,
    {
        let inner = self.0.clone();
        tokio::task::spawn_blocking(move || {
            let mut conn = inner.pool().get()?;
            f(&mut conn, &inner.store)
        })
        .await
        .map_err(|e| ApiError::internal("worker failed", e))?
    }
}

/// Connects, checks that the schema is fully migrated for the configured
/// strategy, and loads card layouts.
pub fn build_state(settings: &Settings) -> Result<AppState, ServeError> {
    let employee_layout = settings.layout(Table::Employees)?;
    let student_layout = settings.layout(Table::Students)?;
    let pool = r2d2::Pool::builder()
        .max_size(settings.server.pool_size.max(1))
        .connection_timeout(POOL_TIMEOUT)
        .build(PgManager::new(settings.database.clone()))?;
    {
        let mut conn = pool.get()?;
        let report = schema::verify_schema(&mut conn, settings.strategy)?;
        if let Some(deployed) = report.strategy {
            if deployed != settings.strategy {
                return Err(SchemaError::StrategyMismatch {
                    deployed,
                    requested: settings.strategy,
                }
                .into());
            }
        }
        if !report.is_complete() {
            return Err(ServeError::NotReady(format!(
                "missing {}; run `personnel migrate`",
                report.missing_objects.join(", ")
            )));
        }
        let latest = schema::generate_ddl(settings.strategy).len() as u32;
        if report.current_version() != latest {
            return Err(ServeError::NotReady(format!(
                "schema at version {}, latest is {latest}; run `personnel migrate`",
                report.current_version()
            )));
        }
    }
    Ok(AppState(Arc::new(Inner {
        pool: Some(pool),
        store: PhotoStore::new(settings.strategy).with_max_bytes(settings.server.max_upload_bytes),
        sessions: SessionStore::new(Duration::from_secs(settings.server.session_ttl_secs)),
        admin_user: settings.server.admin_user.clone(),
        admin_password: settings.server.admin_password.clone(),
        max_upload_bytes: settings.server.max_upload_bytes,
        employee_layout,
        student_layout,
    })))
}

pub fn router(state: AppState) -> Router {
    let protected = Router::new()
        .route("/api/logout", post(logout))
        .merge(record_routes::<EmployeeRecord>())
        .merge(record_routes::<StudentRecord>())
        .route("/api/admin/vacuum-orphans", post(vacuum_orphans))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_session));
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/login", post(login))
        .route("/api/meta/validation", get(meta_validation))
        .route("/api/meta/autocrop", get(meta_autocrop))
        .merge(protected)
        .layer(DefaultBodyLimit::disable())
        .with_state(state)
}

fn record_routes<R: ApiRecord>() -> Router<AppState> {
    let base = format!("/api/{}", R::TABLE.slug());
    Router::new()
        .route(&base, get(list_records::<R>).post(create_record::<R>))
        .route(
            &format!("{base}/{{id}}"),
            get(get_record::<R>).put(update_record::<R>).delete(delete_record::<R>),
        )
        .route(
            &format!("{base}/{{id}}/photo"),
            get(get_photo::<R>).put(put_photo::<R>).delete(delete_photo::<R>),
        )
        .route(&format!("{base}/{{id}}/idcard.png"), get(get_idcard::<R>))
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}

/// Record types exposed over HTTP, with their list filters.
pub trait ApiRecord: Record {
    const FILTER_KEYS: &'static [&'static str];
    fn parse_filter(q: &HashMap<String, String>) -> Result<Self::Filter, ApiError>;
}

impl ApiRecord for EmployeeRecord {
    const FILTER_KEYS: &'static [&'static str] = &["dept", "designation", "employment_type"];

    fn parse_filter(q: &HashMap<String, String>) -> Result<EmployeeFilter, ApiError> {
        Ok(EmployeeFilter {
            dept: q.get("dept").cloned(),
            designation: q.get("designation").cloned(),
            employment_type: q.get("employment_type").cloned(),
        })
    }
}

impl ApiRecord for StudentRecord {
    const FILTER_KEYS: &'static [&'static str] = &["branch", "session", "semester"];

    fn parse_filter(q: &HashMap<String, String>) -> Result<StudentFilter, ApiError> {
        let semester = q
            .get("semester")
            .map(|s| {
                s.parse::<i32>().map_err(|_| {
                    ApiError::bad_request(format!("semester {s:?} is not an integer"))
                        .with_field("semester")
                })
            })
            .transpose()?;
        Ok(StudentFilter {
            branch: q.get("branch").cloned(),
            session: q.get("session").cloned(),
            semester,
        })
    }
}

async fn healthz(State(state): State<AppState>) -> Result<Json<serde_json::Value>, ApiError> {
    let strategy = state.strategy();
    state
        .db(|c, _| {
            c.simple_query("SELECT 1")
                .map_err(|e| ApiError::internal("database error", e))
        })
        .await?;
    Ok(Json(json!({"status": "ok", "strategy": strategy})))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LoginRequest {
    username: String,
    password: String,
}

async fn login(State(state): State<AppState>, body: Body) -> Result<Json<SessionToken>, ApiError> {
    let req: LoginRequest = read_json(body).await?;
    let ok = match &state.0.admin_password {
        Some(expected) => {
            credentials_match(&req.username, &state.0.admin_user)
                & credentials_match(&req.password, expected)
        }
        None => false,
    };
    if !ok {
        return Err(ApiError::unauthorized("invalid credentials"));
    }
    Ok(Json(state.0.sessions.issue()))
}

fn bearer(req: &Request) -> Option<&str> {
    req.headers()
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::trim)
}

async fn require_session(State(state): State<AppState>, req: Request, next: Next) -> Response {
    match bearer(&req) {
        Some(token) if state.0.sessions.check(token) => next.run(req).await,
        Some(_) => ApiError::unauthorized("session expired or unknown").into_response(),
        None => ApiError::unauthorized("missing bearer token").into_response(),
    }
}

async fn logout(State(state): State<AppState>, req: Request) -> StatusCode {
    if let Some(token) = bearer(&req) {
        state.0.sessions.revoke(token);
    }
    StatusCode::NO_CONTENT
}

async fn read_body(body: Body, limit: usize) -> Result<Bytes, ApiError> {
    to_bytes(body, limit).await.map_err(|e| {
        let mut cause: Option<&(dyn std::error::Error + 'static)> = Some(&e);
        let mut too_large = false;
        while let Some(c) = cause {
            too_large |= c.is::<http_body_util::LengthLimitError>();
            cause = c.source();
        }
        if too_large {
            ApiError::payload_too_large(limit)
        } else {
            ApiError::bad_request(format!("cannot read body: {e}"))
        }
    })
}

async fn read_json<T: serde::de::DeserializeOwned>(body: Body) -> Result<T, ApiError> {
    let bytes = read_body(body, JSON_BODY_LIMIT).await?;
    parse_json(&bytes)
}

/// Decodes JSON, naming the offending field on failure.
pub fn parse_json<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let err = ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "validation_failed",
            e.inner().to_string(),
        );
        if path == "." {
            err
        } else {
            err.with_field(path)
        }
    })
}

#[derive(Serialize)]
struct ListResponse<R> {
    items: Vec<R>,
    total: u64,
    page: u64,
    limit: u32,
}

fn parse_u64(q: &HashMap<String, String>, key: &str) -> Result<Option<u64>, ApiError> {
    q.get(key)
        .map(|v| {
            v.parse::<u64>().map_err(|_| {
                ApiError::new(StatusCode::BAD_REQUEST, "bad_page", format!("{key} {v:?} is not a non-negative integer"))
                    .with_field(key)
            })
        })
        .transpose()
}

async fn list_records<R: ApiRecord>(
    State(state): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<ListResponse<R>>, ApiError> {
    if let Some(k) = q
        .keys()
        .find(|k| !R::FILTER_KEYS.contains(&k.as_str()) && *k != "page" && *k != "limit")
    {
        return Err(ApiError::bad_request(format!("unknown query parameter {k:?}")).with_field(k.clone()));
    }
    let filter = R::parse_filter(&q)?;
    let page_no = parse_u64(&q, "page")?.unwrap_or(1);
    let limit = parse_u64(&q, "limit")?.unwrap_or(DEFAULT_PAGE_LIMIT as u64);
    if page_no == 0 {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_page", "page starts at 1").with_field("page"));
    }
    let limit = u32::try_from(limit)
        .ok()
        .filter(|l| (1..=PAGE_LIMIT_MAX).contains(l))
        .ok_or_else(|| ApiError::from(RecordError::BadPage(limit.min(u32::MAX as u64) as u32)).with_field("limit"))?;
    let page = Page::new((page_no - 1).saturating_mul(limit as u64), limit)?;
    let listing = state
        .db(move |c, _| Ok(records::list::<R>(c, &filter, page)?))
        .await?;
    Ok(Json(ListResponse {
        items: listing.items,
        total: listing.total,
        page: page_no,
        limit,
    }))
}

async fn create_record<R: ApiRecord>(
    State(state): State<AppState>,
    body: Body,
) -> Result<Response, ApiError> {
    let rec: R = read_json(body).await?;
    let stored = rec.clone();
    let id = state.db(move |c, _| Ok(records::create(c, &rec)?)).await?;
    let location = format!("/api/{}/{id}", R::TABLE.slug());
    let mut resp = (StatusCode::CREATED, Json(stored)).into_response();
    if let Ok(v) = HeaderValue::from_str(&location) {
        resp.headers_mut().insert(header::LOCATION, v);
    }
    Ok(resp)
}

fn missing<R: Record>(id: i32) -> ApiError {
    ApiError::not_found(format!("no {} with id {id}", R::TABLE.slug()))
}

async fn get_record<R: ApiRecord>(
    State(state): State<AppState>,
    Path(id): Path<i32>,
) -> Result<Json<R>, ApiError> {
    state
        .db(move |c, _| records::get::<R>(c, id)?.ok_or_else(|| missing::<R>(id)))
        .await
        .map(Json)
}

async fn update_record<R: ApiRecord>(
    State(state): State<AppState>,
    Path(id): Path<i32>,
    body: Body,
) -> Result<Json<R>, ApiError> {
    let rec: R = read_json(body).await?;
    if rec.id() != id {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "id_mismatch",
            format!("body id {} does not match path id {id}", rec.id()),
        )
        .with_field(R::TABLE.id_column()));
    }
    let stored = rec.clone();
    let found = state.db(move |c, _| Ok(records::update(c, &rec)?)).await?;
    if !found {
        return Err(missing::<R>(id));
    }
    Ok(Json(stored))
}

async fn delete_record<R: ApiRecord>(
    State(state): State<AppState>,
    Path(id): Path<i32>,
) -> Result<StatusCode, ApiError> {
    let found = state.db(move |c, _| Ok(records::delete::<R>(c, id)?)).await?;
    if found {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(missing::<R>(id))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CropQuery {
    x: Option<u32>,
    y: Option<u32>,
    w: Option<u32>,
    h: Option<u32>,
}

impl CropQuery {
    fn crop_box(&self) -> Result<Option<CropBox>, ApiError> {
        match (self.x, self.y, self.w, self.h) {
            (None, None, None, None) => Ok(None),
            (Some(x), Some(y), Some(w), Some(h)) if w > 0 && h > 0 => Ok(Some(CropBox::new(x, y, w, h))),
            (Some(_), Some(_), Some(_), Some(_)) => Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "crop_out_of_bounds",
                "crop width and height must be positive",
            )),
            _ => Err(ApiError::bad_request("crop needs all of x, y, w, h or none")),
        }
    }
}

#[derive(Serialize)]
struct PhotoStored {
    record_id: i32,
    strategy: StorageStrategy,
    object_id: Option<u32>,
    format: personnel_core::ImageFormat,
    width: u32,
    height: u32,
    size_bytes: usize,
}

async fn put_photo<R: ApiRecord>(
    State(state): State<AppState>,
    Path(id): Path<i32>,
    Query(crop): Query<CropQuery>,
    body: Body,
) -> Result<Json<PhotoStored>, ApiError> {
    let bx = crop.crop_box()?;
    let bytes = read_body(body, state.0.max_upload_bytes).await?;
    let stored = state
        .db(move |c, store| {
            let blob = normalize_badge_photo(bytes.to_vec(), bx)?;
            let r = store.store_photo(c, R::TABLE, id, &blob)?;
            Ok(PhotoStored {
                record_id: id,
                strategy: r.strategy,
                object_id: r.object_id,
                format: blob.format(),
                width: blob.width(),
                height: blob.height(),
                size_bytes: blob.len(),
            })
        })
        .await?;
    Ok(Json(stored))
}

async fn get_photo<R: ApiRecord>(
    State(state): State<AppState>,
    Path(id): Path<i32>,
) -> Result<Response, ApiError> {
    let blob = state
        .db(move |c, store| {
            store
                .fetch_photo(c, R::TABLE, id)?
                .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "no_photo", format!("record {id} has no photo")))
        })
        .await?;
    Ok(([(header::CONTENT_TYPE, blob.format().mime())], blob.into_bytes()).into_response())
}

async fn delete_photo<R: ApiRecord>(
    State(state): State<AppState>,
    Path(id): Path<i32>,
) -> Result<StatusCode, ApiError> {
    let had = state
        .db(move |c, store| Ok(store.delete_photo(c, R::TABLE, id)?))
        .await?;
    if had {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::new(StatusCode::NOT_FOUND, "no_photo", format!("record {id} has no photo")))
    }
}

async fn get_idcard<R: ApiRecord>(
    State(state): State<AppState>,
    Path(id): Path<i32>,
) -> Result<Response, ApiError> {
    let layout = state.layout(R::TABLE).clone();
    let card = state
        .db(move |c, store| {
            let rec = records::get::<R>(c, id)?.ok_or_else(|| missing::<R>(id))?;
            let photo = store.fetch_photo(c, R::TABLE, id)?;
            Ok(render_card(&rec, photo.as_ref(), &layout)?)
        })
        .await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], card.into_bytes()).into_response())
}

async fn vacuum_orphans(State(state): State<AppState>) -> Result<Json<serde_json::Value>, ApiError> {
    let reclaimed = state.db(|c, store| Ok(store.vacuum_orphans(c)?)).await?;
    Ok(Json(json!({ "reclaimed": reclaimed })))
}

async fn meta_validation(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({
        "employees": validation_rules(Table::Employees),
        "students": validation_rules(Table::Students),
        "photo": {
            "formats": ["png", "jpeg"],
            "max_bytes": state.0.max_upload_bytes,
            "aspect": BADGE_ASPECT.to_string(),
            "width": BADGE_WIDTH,
            "height": BADGE_HEIGHT,
        },
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AutocropQuery {
    w: Option<String>,
    h: Option<String>,
    aspect: Option<String>,
}

async fn meta_autocrop(Query(q): Query<AutocropQuery>) -> Result<Json<CropBox>, ApiError> {
    let dim = |name: &str, v: Option<String>| -> Result<u32, ApiError> {
        let v = v.ok_or_else(|| ApiError::bad_request(format!("{name} is required")).with_field(name))?;
        v.parse::<u32>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| ApiError::bad_request(format!("{name} {v:?} is not a positive integer")).with_field(name))
    };
    let (w, h) = (dim("w", q.w)?, dim("h", q.h)?);
    let aspect = match q.aspect {
        Some(a) => a
            .parse::<Aspect>()
            .map_err(|e| ApiError::bad_request(e).with_field("aspect"))?,
        None => BADGE_ASPECT,
    };
    Ok(Json(auto_crop_box(w, h, aspect)))
}
