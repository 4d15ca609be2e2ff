//! HTTP project service under `/api/v1`.
//!
//! Projects live in a directory tree rooted at `GUIDEFILL_DATA_DIR`. Fills of
//! images up to [`SYNC_PIXEL_LIMIT`] pixels answer inline; larger ones run in
//! the background and are polled through the result endpoint.

mod error;
pub mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use tokio::sync::RwLock;

use guidefill::engine::FillReport;
use guidefill::grid::{ImageBuffer, LabelMask};
use guidefill::guide::SplineSet;
use guidefill::io;
use guidefill::pipeline::{guide_field, run_pipeline, PipelineError, PipelineParams};

pub use error::ServiceError;
use store::{result_key, sha256_hex, Manifest, ResultEntry, Store};

pub const DATA_DIR_ENV: &str = "GUIDEFILL_DATA_DIR";
pub const SYNC_PIXEL_LIMIT: usize = 2_000_000;
const BODY_LIMIT: usize = 512 * 1024 * 1024;

/// Encoded output of one fill.
#[derive(Clone, Debug)]
pub struct FillArtifacts {
    pub png: Vec<u8>,
    pub sha256: String,
    pub report: FillReport,
    pub splines: SplineSet,
}

/// The fill both front ends run: splines (given or detected), guide field,
/// transport fill, PNG encoding.
pub fn fill_to_png(
    image: &ImageBuffer,
    mask: &LabelMask,
    splines: Option<&SplineSet>,
    params: &PipelineParams,
) -> Result<FillArtifacts, PipelineError> {
    let out = run_pipeline(image, mask, splines, params)?;
    let png = io::encode_png(&out.outcome.image).expect("fill output has 1 to 4 channels");
    Ok(FillArtifacts { sha256: sha256_hex(&png), png, report: out.outcome.report, splines: out.splines })
}

#[derive(Clone, Debug)]
enum Job {
    Pending,
    Failed(StatusCode, String),
}

struct Inner {
    store: Store,
    locks: Mutex<HashMap<String, Arc<RwLock<()>>>>,
    jobs: Mutex<HashMap<String, Job>>,
    sync_limit: usize,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            inner: Arc::new(Inner {
                store: Store::new(root),
                locks: Mutex::new(HashMap::new()),
                jobs: Mutex::new(HashMap::new()),
                sync_limit: SYNC_PIXEL_LIMIT,
            }),
        }
    }

    /// Root from `GUIDEFILL_DATA_DIR`, defaulting to `./guidefill-data`.
    pub fn from_env() -> Self {
        Self::new(std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("guidefill-data")))
    }

    /// Largest pixel count filled inline.
    pub fn with_sync_limit(self, pixels: usize) -> Self {
        let inner = Arc::try_unwrap(self.inner).unwrap_or_else(|_| panic!("sync limit must be set before the state is shared"));
        Self { inner: Arc::new(Inner { sync_limit: pixels, ..inner }) }
    }

    pub fn store(&self) -> &Store {
        &self.inner.store
    }

    fn lock_for(&self, id: &str) -> Arc<RwLock<()>> {
        let mut locks = self.inner.locks.lock().expect("lock table poisoned");
        locks.entry(id.to_string()).or_default().clone()
    }

    fn job(&self, id: &str) -> Option<Job> {
        self.inner.jobs.lock().expect("job table poisoned").get(id).cloned()
    }

    fn set_job(&self, id: &str, job: Option<Job>) {
        let mut jobs = self.inner.jobs.lock().expect("job table poisoned");
        match job {
            Some(j) => jobs.insert(id.to_string(), j),
            None => jobs.remove(id),
        };
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/projects", post(create_project))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/splines", get(get_splines).put(put_splines))
        .route("/projects/{id}/inpaint", post(inpaint))
        .route("/projects/{id}/result", get(get_result))
        .route("/projects/{id}/guide-field", get(get_guide_field));
    Router::new().nest("/api/v1", api).layer(DefaultBodyLimit::max(BODY_LIMIT)).with_state(state)
}

pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

fn links(id: &str) -> serde_json::Value {
    let base = format!("/api/v1/projects/{id}");
    serde_json::json!({
        "splines": format!("{base}/splines"),
        "inpaint": format!("{base}/inpaint"),
        "result": format!("{base}/result"),
        "guide_field": format!("{base}/guide-field"),
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ServiceError::Internal(e.to_string()))?
}

#[derive(Deserialize)]
struct MaskUpload {
    name: String,
    /// Base64 PGM or PNG.
    data: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateProject {
    /// Base64 PNG.
    image: String,
    masks: Vec<MaskUpload>,
}

fn decode_b64(field: &str, text: &str) -> Result<Vec<u8>, ServiceError> {
    base64::engine::general_purpose::STANDARD
        .decode(text.trim())
        .map_err(|e| ServiceError::BadRequest(format!("{field} is not valid base64: {e}")))
}

async fn create_project(State(st): State<AppState>, body: Bytes) -> Result<Response, ServiceError> {
    let req: CreateProject = serde_json::from_slice(&body).map_err(|e| ServiceError::BadRequest(format!("malformed project upload: {e}")))?;
    let image = decode_b64("image", &req.image)?;
    let masks = req
        .masks
        .iter()
        .map(|m| Ok((m.name.clone(), decode_b64(&format!("mask {:?}", m.name), &m.data)?)))
        .collect::<Result<Vec<_>, ServiceError>>()?;
    let state = st.clone();
    let manifest = blocking(move || state.store().create(&image, &masks)).await?;
    let body = serde_json::json!({
        "id": manifest.id,
        "width": manifest.width,
        "height": manifest.height,
        "masks": manifest.masks,
        "links": links(&manifest.id),
    });
    Ok((StatusCode::CREATED, [(header::LOCATION, format!("/api/v1/projects/{}", manifest.id))], Json(body)).into_response())
}

async fn get_project(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<Manifest>, ServiceError> {
    let lock = st.lock_for(&id);
    let _guard = lock.read().await;
    Ok(Json(st.store().manifest(&id)?))
}

#[derive(Deserialize, Default)]
struct MaskQuery {
    mask: Option<String>,
}

async fn get_splines(State(st): State<AppState>, Path(id): Path<String>, Query(q): Query<MaskQuery>) -> Result<Response, ServiceError> {
    let guard = st.lock_for(&id).read_owned().await;
    let state = st.clone();
    let bytes = blocking(move || {
        let _guard = guard;
        let manifest = state.store().manifest(&id)?;
        let mask = manifest.mask_name(q.mask.as_deref())?;
        state.store().current_splines(&id, mask)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn put_splines(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Json<serde_json::Value>, ServiceError> {
    let guard = st.lock_for(&id).write_owned().await;
    let state = st.clone();
    let count = blocking(move || {
        let _guard = guard;
        state.store().manifest(&id)?;
        state.store().put_splines(&id, &body)
    })
    .await?;
    Ok(Json(serde_json::json!({ "splines": count })))
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct InpaintRequest {
    mask: Option<String>,
    params: PipelineParams,
    /// `key=value` strings applied after `params`.
    overrides: Vec<String>,
}

#[derive(Serialize)]
struct InpaintDone {
    status: &'static str,
    cached: bool,
    sha256: String,
    unfillable: bool,
    result: String,
    report: serde_json::Value,
}

fn compute(state: &AppState, id: &str, mask_name: &str, user: Option<Vec<u8>>, params: &PipelineParams, key: String) -> Result<InpaintDone, ServiceError> {
    let store = state.store();
    let image = store.image(id)?;
    let mask = store.mask(id, mask_name)?;
    let splines = user.as_deref().map(SplineSet::from_json).transpose()?;
    let art = fill_to_png(&image, &mask, splines.as_ref(), params)?;
    let report = serde_json::to_value(&art.report).expect("report serializes");
    let report_bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
    let unfillable = art.report.unfillable();
    let mut manifest = store.manifest(id)?;
    let entry = ResultEntry { key, sha256: art.sha256.clone(), mask: mask_name.to_string(), unfillable };
    store.save_result(&mut manifest, entry, &art.png, &report_bytes)?;
    Ok(InpaintDone { status: "done", cached: false, sha256: art.sha256, unfillable, result: format!("/api/v1/projects/{id}/result"), report })
}

async fn inpaint(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ServiceError> {
    let req: InpaintRequest = if body.iter().all(u8::is_ascii_whitespace) {
        InpaintRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ServiceError::BadRequest(format!("malformed inpaint request: {e}")))?
    };
    let mut params = req.params;
    params.apply(req.overrides.iter().map(String::as_str)).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    params.fill.validate().map_err(|e| ServiceError::BadRequest(e.to_string()))?;

    let guard = st.lock_for(&id).write_owned().await;
    let manifest = st.store().manifest(&id)?;
    let mask_name = manifest.mask_name(req.mask.as_deref())?.to_string();
    let user = st.store().user_splines(&id)?;
    let key = result_key(&mask_name, user.as_deref(), &params);
    if let Some(entry) = manifest.result.as_ref().filter(|r| r.key == key) {
        let done = InpaintDone {
            status: "done",
            cached: true,
            sha256: entry.sha256.clone(),
            unfillable: entry.unfillable,
            result: format!("/api/v1/projects/{id}/result"),
            report: st.store().report(&id)?,
        };
        return Ok(Json(done).into_response());
    }

    if manifest.pixels() > st.inner.sync_limit {
        st.set_job(&id, Some(Job::Pending));
        let state = st.clone();
        let job_id = id.clone();
        tokio::spawn(async move {
            let worker = state.clone();
            let jid = job_id.clone();
            let outcome = blocking(move || {
                let _guard = guard;
                compute(&worker, &jid, &mask_name, user, &params, key)
            })
            .await;
            match outcome {
                Ok(_) => state.set_job(&job_id, None),
                Err(e) => state.set_job(&job_id, Some(Job::Failed(e.status(), e.to_string()))),
            }
        });
        let poll = format!("/api/v1/projects/{id}/result");
        let body = serde_json::json!({ "status": "pending", "poll": poll });
        return Ok((StatusCode::ACCEPTED, [(header::LOCATION, poll)], Json(body)).into_response());
    }

    let state = st.clone();
    st.set_job(&id, None);
    let done = blocking(move || {
        let _guard = guard;
        compute(&state, &id, &mask_name, user, &params, key)
    })
    .await?;
    Ok(Json(done).into_response())
}

async fn get_result(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    match st.job(&id) {
        Some(Job::Pending) => {
            let body = serde_json::json!({ "status": "pending", "poll": format!("/api/v1/projects/{id}/result") });
            return Ok((StatusCode::ACCEPTED, Json(body)).into_response());
        }
        Some(Job::Failed(status, message)) => {
            return Ok((status, Json(serde_json::json!({ "status": "failed", "error": message }))).into_response());
        }
        None => {}
    }
    let lock = st.lock_for(&id);
    let _guard = lock.read().await;
    let manifest = st.store().manifest(&id)?;
    let entry = manifest.result.ok_or_else(|| ServiceError::NoResult(id.clone()))?;
    let png = st.store().result_png(&id)?;
    Ok(([(header::CONTENT_TYPE, "image/png".to_string()), (header::HeaderName::from_static("x-result-sha256"), entry.sha256)], png).into_response())
}

#[derive(Deserialize)]
#[serde(default)]
struct FieldQuery {
    mask: Option<String>,
    step: usize,
    eta: Option<f64>,
}

impl Default for FieldQuery {
    fn default() -> Self {
        Self { mask: None, step: 8, eta: None }
    }
}

async fn get_guide_field(State(st): State<AppState>, Path(id): Path<String>, Query(q): Query<FieldQuery>) -> Result<Json<serde_json::Value>, ServiceError> {
    if q.step == 0 {
        return Err(ServiceError::BadRequest("step must be at least 1".into()));
    }
    if q.eta.is_some_and(|e| !(e.is_finite() && e > 0.0)) {
        return Err(ServiceError::BadRequest("eta must be positive".into()));
    }
    let guard = st.lock_for(&id).read_owned().await;
    let state = st.clone();
    blocking(move || {
        let _guard = guard;
        let store = state.store();
        let manifest = store.manifest(&id)?;
        let mask_name = manifest.mask_name(q.mask.as_deref())?;
        let splines = SplineSet::from_json(&store.current_splines(&id, mask_name)?)?;
        let mask = store.mask(&id, mask_name)?;
        let mut params = PipelineParams::default();
        if let Some(eta) = q.eta {
            params.detect.eta = eta;
        }
        let field = guide_field(&mask, &splines, &params);
        let grid = field.downsample(q.step);
        Ok(Json(serde_json::json!({
            "width": field.width(),
            "height": field.height(),
            "step": q.step,
            "rows": grid.len(),
            "cols": grid.first().map_or(0, Vec::len),
            "vectors": grid,
        })))
    })
    .await
}
