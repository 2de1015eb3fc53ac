use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dosefind_core::bayes::MtdSelection;
use dosefind_core::table::{DecisionTable, MAX_TABLE_N};
use dosefind_core::{DesignSpec, StopReason};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, OwnedSemaphorePermit, RwLock, Semaphore};

use crate::error::{ApiError, FieldError};
use crate::jobs::{JobState, SimulationJob, SimulationRequest};
use crate::session::{now_ms, DecisionView, Session, Status, TrialConfig, TrialView};
use crate::store::Store;
use dosefind_core::DesignRegistry;

pub(crate) struct Inner {
    pub store: Store,
    pub registry: DesignRegistry,
    pub sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    pub jobs: RwLock<HashMap<String, SimulationJob>>,
    pub workers: Arc<Semaphore>,
}

/// Shared handle given to every handler.
#[derive(Clone)]
pub struct AppState {
    pub(crate) inner: Arc<Inner>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/trials", post(create_trial))
        .route("/trials/{id}", get(get_trial))
        .route("/trials/{id}/cohorts", post(record_cohort))
        .route("/trials/{id}/finalize", post(finalize_trial))
        .route("/designs", get(list_designs))
        .route("/designs/{name}/table", get(decision_table))
        .route("/simulations", post(start_simulation))
        .route("/simulations/{id}", get(get_simulation))
        .with_state(state)
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("invalid JSON body: {e}")))
}

fn storage(e: std::io::Error) -> ApiError {
    ApiError::Storage(e.to_string())
}

fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

impl AppState {
    async fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.inner
            .sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::TrialNotFound(id.to_string()))
    }

    /// Runs a job once a worker slot frees up, persisting each transition.
    pub(crate) fn spawn_job(&self, id: String) {
        let state = self.clone();
        let workers = self.inner.workers.clone();
        tokio::spawn(async move {
            let permit: OwnedSemaphorePermit = match workers.acquire_owned().await {
                Ok(p) => p,
                Err(_) => return,
            };
            let Some(request) = state.set_job(&id, JobState::Running).await else {
                return;
            };
            let outcome = tokio::task::spawn_blocking(move || request.run())
                .await
                .unwrap_or_else(|e| Err(format!("worker panicked: {e}")));
            let next = match outcome {
                Ok(result) => JobState::Done { result },
                Err(error) => JobState::Failed { error },
            };
            state.set_job(&id, next).await;
            drop(permit);
        });
    }

    async fn set_job(&self, id: &str, next: JobState) -> Option<SimulationRequest> {
        let mut jobs = self.inner.jobs.write().await;
        let job = jobs.get_mut(id)?;
        job.state = next;
        if let Err(e) = self.inner.store.write_job(id, job) {
            tracing::error!(job = id, "could not persist job: {e}");
        }
        Some(job.request.clone())
    }
}

async fn create_trial(State(app): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let config: TrialConfig = parse(&body)?;
    let id = new_id();
    let session = Session::create(&app.inner.registry, id.clone(), config)?;
    app.inner
        .store
        .append(&id, &session.events()[0])
        .map_err(storage)?;
    let view = session.view();
    app.inner
        .sessions
        .write()
        .await
        .insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_trial(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<TrialView>, ApiError> {
    let session = app.session(&id).await?;
    let view = session.lock().await.view();
    Ok(Json(view))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CohortEntry {
    dlt_count: u32,
    cohort_size: u32,
}

#[derive(Debug, Serialize)]
struct CohortResponse {
    decision: DecisionView,
    stop_reason: Option<StopReason>,
    trial: TrialView,
}

async fn record_cohort(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<CohortResponse>, ApiError> {
    let entry: CohortEntry = parse(&body)?;
    let session = app.session(&id).await?;
    let mut s = session.lock().await;
    let pending = s.plan_cohort(entry.cohort_size, entry.dlt_count)?;
    app.inner.store.append(&id, &pending.event).map_err(storage)?;
    s.commit(pending);
    let trial = s.view();
    let last = trial.history.last().expect("cohort just recorded");
    Ok(Json(CohortResponse {
        decision: last.decision.clone(),
        stop_reason: last.stop_reason,
        trial,
    }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FinalizeRequest {
    #[serde(default)]
    operator_override: bool,
}

#[derive(Debug, Serialize)]
struct FinalizeResponse {
    id: String,
    status: Status,
    selection: MtdSelection,
    mtd: Option<usize>,
    stop_reason: Option<StopReason>,
}

async fn finalize_trial(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<FinalizeResponse>, ApiError> {
    let req: FinalizeRequest = if body.iter().all(u8::is_ascii_whitespace) {
        FinalizeRequest::default()
    } else {
        parse(&body)?
    };
    let session = app.session(&id).await?;
    let mut s = session.lock().await;
    if let Some(pending) = s.plan_finalize(req.operator_override)? {
        app.inner.store.append(&id, &pending.event).map_err(storage)?;
        s.commit(pending);
    }
    let selection = s.selection().ok_or_else(|| ApiError::Internal("no selection".into()))?;
    Ok(Json(FinalizeResponse {
        id,
        status: s.status(),
        selection,
        mtd: selection.dose(),
        stop_reason: s.state().stop_reason(),
    }))
}

#[derive(Debug, Serialize)]
struct DesignInfo {
    name: &'static str,
    summary: &'static str,
}

async fn list_designs(State(app): State<AppState>) -> Json<Vec<DesignInfo>> {
    Json(
        app.inner
            .registry
            .describe()
            .into_iter()
            .map(|(name, summary)| DesignInfo { name, summary })
            .collect(),
    )
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableQuery {
    pt: f64,
    #[serde(default = "default_eps")]
    eps_lo: f64,
    #[serde(default = "default_eps")]
    eps_hi: f64,
    #[serde(default = "default_max_n")]
    max_n: u32,
    #[serde(default = "default_doses")]
    n_doses: usize,
    #[serde(default)]
    format: TableFormat,
}

fn default_eps() -> f64 {
    0.05
}

fn default_max_n() -> u32 {
    15
}

fn default_doses() -> usize {
    6
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum TableFormat {
    #[default]
    Json,
    Csv,
}

async fn decision_table(
    State(app): State<AppState>,
    Path(name): Path<String>,
    query: Result<Query<TableQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let canonical = app
        .inner
        .registry
        .resolve(&name)
        .map_err(|e| ApiError::UnknownDesign(e.to_string()))?;
    if q.max_n == 0 || q.max_n > MAX_TABLE_N {
        let message = format!("max_n must lie in 1..={MAX_TABLE_N}");
        return Err(ApiError::InvalidConfig {
            errors: vec![FieldError {
                field: "max_n".into(),
                message: message.clone(),
            }],
            message,
        });
    }
    let spec = DesignSpec::new(canonical, q.pt, q.eps_lo, q.eps_hi, q.n_doses);
    let table = DecisionTable::build_with(&app.inner.registry, &spec, q.max_n)
        .map_err(ApiError::config)?;
    Ok(match q.format {
        TableFormat::Json => Json(table).into_response(),
        TableFormat::Csv => (
            [(header::CONTENT_TYPE, "text/csv; charset=utf-8")],
            table.to_csv(),
        )
            .into_response(),
    })
}

async fn start_simulation(State(app): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: SimulationRequest = parse(&body)?;
    let id = new_id();
    let job = SimulationJob {
        id: id.clone(),
        submitted_at_ms: now_ms(),
        request,
        state: JobState::Queued,
    };
    app.inner.store.write_job(&id, &job).map_err(storage)?;
    app.inner.jobs.write().await.insert(id.clone(), job.clone());
    app.spawn_job(id);
    Ok((StatusCode::ACCEPTED, Json(job)).into_response())
}

async fn get_simulation(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SimulationJob>, ApiError> {
    app.inner
        .jobs
        .read()
        .await
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or(ApiError::SimulationNotFound(id))
}
