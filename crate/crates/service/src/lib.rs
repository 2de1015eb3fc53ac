//! HTTP service for conducting trials cohort by cohort and running
//! simulation jobs.
//!
//! Each trial is an append-only JSON-lines log under `<data>/trials`. On
//! startup every log is replayed through its design, and a log whose stored
//! decisions differ from the recomputed ones stops the service.

mod api;
pub mod error;
pub mod jobs;
pub mod session;
pub mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use dosefind_core::DesignRegistry;
use tokio::sync::{Mutex, RwLock, Semaphore};

pub use api::{router, AppState};
pub use error::ApiError;
use jobs::{JobState, SimulationJob};
use session::{Session, TrialEvent};
use store::Store;

pub const ENV_DATA_DIR: &str = "DOSEFIND_DATA_DIR";
pub const ENV_BIND: &str = "DOSEFIND_BIND";
pub const ENV_WORKERS: &str = "DOSEFIND_WORKERS";

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub bind: SocketAddr,
    /// Simulation jobs allowed to run at once.
    pub workers: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("{0}: {1}")]
    Env(&'static str, String),
    #[error("data directory: {0}")]
    Io(#[from] std::io::Error),
    #[error("replaying {path}: {reason}")]
    Replay { path: PathBuf, reason: String },
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            data_dir: PathBuf::from("dosefind-data"),
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            workers: 2,
        }
    }
}

impl ServiceConfig {
    /// Defaults overridden by `DOSEFIND_DATA_DIR`, `DOSEFIND_BIND` and
    /// `DOSEFIND_WORKERS`.
    pub fn from_env() -> Result<Self, StartupError> {
        let mut cfg = ServiceConfig::default();
        if let Ok(dir) = std::env::var(ENV_DATA_DIR) {
            cfg.data_dir = dir.into();
        }
        if let Ok(bind) = std::env::var(ENV_BIND) {
            cfg.bind = bind
                .parse()
                .map_err(|e| StartupError::Env(ENV_BIND, format!("{bind:?}: {e}")))?;
        }
        if let Ok(w) = std::env::var(ENV_WORKERS) {
            cfg.workers = match w.parse() {
                Ok(n) if n > 0 => n,
                _ => return Err(StartupError::Env(ENV_WORKERS, format!("{w:?} is not a positive integer"))),
            };
        }
        Ok(cfg)
    }
}

impl AppState {
    /// Opens the data directory, replays every trial log and requeues
    /// unfinished simulation jobs. Must run inside a Tokio runtime.
    pub async fn open(cfg: &ServiceConfig) -> Result<AppState, StartupError> {
        let store = Store::open(&cfg.data_dir)?;
        let registry = DesignRegistry::standard();
        let mut sessions = HashMap::new();
        for path in store.trial_logs()? {
            let events: Vec<TrialEvent> = Store::read_log(&path)?;
            let session = Session::replay(&registry, events).map_err(|reason| {
                StartupError::Replay {
                    path: path.clone(),
                    reason,
                }
            })?;
            sessions.insert(session.id().to_string(), Arc::new(Mutex::new(session)));
        }
        let mut jobs = HashMap::new();
        let mut unfinished = Vec::new();
        for path in store.job_files()? {
            let mut job: SimulationJob = Store::read_job(&path)?;
            if !job.state.is_finished() {
                job.state = JobState::Queued;
                unfinished.push(job.id.clone());
            }
            jobs.insert(job.id.clone(), job);
        }
        let state = AppState {
            inner: Arc::new(api::Inner {
                store,
                registry,
                sessions: RwLock::new(sessions),
                jobs: RwLock::new(jobs),
                workers: Arc::new(Semaphore::new(cfg.workers)),
            }),
        };
        for id in unfinished {
            state.spawn_job(id);
        }
        Ok(state)
    }
}

/// Binds `cfg.bind` and serves until Ctrl-C.
pub async fn serve(cfg: ServiceConfig) -> Result<(), StartupError> {
    let state = AppState::open(&cfg).await?;
    let listener = tokio::net::TcpListener::bind(cfg.bind).await?;
    tracing::info!(addr = %cfg.bind, data = %cfg.data_dir.display(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
