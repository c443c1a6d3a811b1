//! Patient/session HTTP service: stores uploads on disk, runs the analysis
//! pipeline on them and serves the results as versioned JSON.
//!
//! | Method | Path | |
//! |---|---|---|
//! | POST | `/patients` | `{"display_name": ..}` → patient |
//! | GET | `/patients` | all patients |
//! | GET | `/patients/{id}/sessions` | a patient's sessions |
//! | POST | `/patients/{id}/sessions` | multipart `audio` + optional `transcript` → session |
//! | GET | `/sessions/{id}` | session record and status |
//! | GET | `/sessions/{id}/analysis?emotions=happy,sad` | filtered analysis view |
//! | GET | `/sessions/{id}/audio` | the uploaded WAV |
//! | GET | `/palette` | emotion colors |

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::Router;

pub mod engine;
pub mod error;
pub mod routes;
pub mod store;

pub use engine::Engine;
pub use error::ServiceError;
pub use routes::{router, AppState, PALETTE};
pub use store::{Patient, SessionRecord, SessionStatus, Store};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub store_dir: PathBuf,
    pub deferred: bool,
    pub id_seed: u64,
    pub max_upload_bytes: usize,
}

impl ServiceConfig {
    pub fn new(store_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            store_dir: store_dir.into(),
            deferred: false,
            id_seed: 0,
            max_upload_bytes: 256 * 1024 * 1024,
        }
    }
}

/// Opens the store and builds the router.
pub fn app(config: &ServiceConfig, engine: Engine) -> Result<Router, ServiceError> {
    let store = Store::open(&config.store_dir, config.id_seed)?;
    let state = AppState {
        store: Arc::new(store),
        engine: Arc::new(engine),
        deferred: config.deferred,
    };
    Ok(router(state, config.max_upload_bytes))
}

pub async fn serve(config: &ServiceConfig, engine: Engine, addr: SocketAddr) -> Result<(), ServiceError> {
    let app = app(config, engine)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app).await?;
    Ok(())
}
