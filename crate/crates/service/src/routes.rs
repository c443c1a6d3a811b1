use std::collections::BTreeMap;
use std::sync::Arc;

use affect_core::audio_io::parse_wav;
use affect_core::pipeline::transcript::TimedTranscript;
use affect_core::pipeline::{filter_view, AnalysisView, SCHEMA_VERSION};
use affect_core::{EmotionLabel, EmotionSet};
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

use crate::engine::Engine;
use crate::error::ServiceError;
use crate::store::{Patient, SessionRecord, SessionStatus, Store};

/// Segment and span colors, in canonical emotion order.
pub const PALETTE: [(EmotionLabel, &str); 8] = [
    (EmotionLabel::Neutral, "#9E9E9E"),
    (EmotionLabel::Calm, "#4DB6AC"),
    (EmotionLabel::Happy, "#FFD54F"),
    (EmotionLabel::Sad, "#5C6BC0"),
    (EmotionLabel::Angry, "#E53935"),
    (EmotionLabel::Fearful, "#8E24AA"),
    (EmotionLabel::Disgust, "#7CB342"),
    (EmotionLabel::Surprised, "#FB8C00"),
];

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub engine: Arc<Engine>,
    /// Return from uploads before analysis finishes.
    pub deferred: bool,
}

pub fn router(state: AppState, max_upload_bytes: usize) -> Router {
    Router::new()
        .route("/patients", get(list_patients).post(create_patient))
        .route("/patients/{id}/sessions", get(list_sessions).post(upload_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/analysis", get(get_analysis))
        .route("/sessions/{id}/audio", get(get_audio))
        .route("/palette", get(palette))
        .layer(DefaultBodyLimit::max(max_upload_bytes))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

#[derive(Deserialize)]
struct NewPatient {
    display_name: String,
}

#[derive(Serialize)]
struct PatientList {
    schema_version: u32,
    patients: Vec<Patient>,
}

#[derive(Serialize)]
struct SessionList {
    schema_version: u32,
    patient_id: String,
    sessions: Vec<SessionRecord>,
}

#[derive(Serialize)]
struct Palette {
    schema_version: u32,
    emotions: Vec<EmotionLabel>,
    colors: BTreeMap<EmotionLabel, &'static str>,
}

async fn create_patient(
    State(state): State<AppState>,
    body: Result<Json<NewPatient>, axum::extract::rejection::JsonRejection>,
) -> Result<(StatusCode, Json<Patient>), ServiceError> {
    let Json(body) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let patient = state.store.create_patient(&body.display_name)?;
    Ok((StatusCode::CREATED, Json(patient)))
}

async fn list_patients(State(state): State<AppState>) -> Json<PatientList> {
    Json(PatientList {
        schema_version: SCHEMA_VERSION,
        patients: state.store.patients(),
    })
}

async fn list_sessions(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionList>, ServiceError> {
    let sessions = state.store.sessions(&id)?;
    Ok(Json(SessionList {
        schema_version: SCHEMA_VERSION,
        patient_id: id,
        sessions,
    }))
}

/// Multipart fields: `audio` (WAV, required) and `transcript`
/// (`.words.json` content, optional).
async fn upload_session(
    State(state): State<AppState>,
    Path(patient_id): Path<String>,
    mut multipart: Multipart,
) -> Result<(StatusCode, Json<SessionRecord>), ServiceError> {
    state.store.patient(&patient_id)?;
    let mut audio = None;
    let mut transcript = None;
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| ServiceError::BadRequest(e.body_text()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field
            .bytes()
            .await
            .map_err(|e| ServiceError::BadRequest(e.body_text()))?;
        match name.as_str() {
            "audio" => audio = Some(bytes),
            "transcript" => transcript = Some(bytes),
            other => return Err(ServiceError::BadRequest(format!("unexpected field `{other}`"))),
        }
    }
    let audio = audio.ok_or_else(|| ServiceError::BadRequest("missing `audio` field".into()))?;
    let clip = parse_wav(&audio).map_err(|e| ServiceError::MalformedAudio(e.to_string()))?;
    let transcript = transcript
        .map(|t| TimedTranscript::parse_json(&t))
        .transpose()
        .map_err(|e| ServiceError::MalformedTranscript(e.to_string()))?;

    let store = state.store.clone();
    let record = {
        let transcript = transcript.clone();
        tokio::task::spawn_blocking(move || store.begin_session(&patient_id, &audio, transcript.as_ref()))
            .await
            .expect("store task")?
    };

    let store = state.store.clone();
    let engine = state.engine.clone();
    let id = record.id.clone();
    let process = move || {
        let outcome = engine.analyze(&clip, transcript).map_err(|e| e.to_string());
        store.finish_session(&id, outcome)
    };
    if state.deferred {
        tokio::task::spawn_blocking(process);
        Ok((StatusCode::ACCEPTED, Json(record)))
    } else {
        let record = tokio::task::spawn_blocking(process).await.expect("analysis task")?;
        Ok((StatusCode::CREATED, Json(record)))
    }
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionRecord>, ServiceError> {
    Ok(Json(state.store.session(&id)?.record))
}

#[derive(Deserialize)]
struct AnalysisQuery {
    emotions: Option<String>,
}

/// The session's analysis as a view; items whose emotion is outside
/// `?emotions=a,b` are marked hidden. No filter keeps everything visible.
async fn get_analysis(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<AnalysisQuery>,
) -> Result<Json<AnalysisView>, ServiceError> {
    let keep = match query.emotions.as_deref() {
        None => EmotionSet::all(),
        Some(list) => EmotionSet::parse_list(list).map_err(|e| ServiceError::BadRequest(e.to_string()))?,
    };
    let slot = state.store.session(&id)?;
    let analysis = match (&slot.record.status, slot.analysis) {
        (SessionStatus::Ready, Some(a)) => a,
        (status, _) => {
            return Err(ServiceError::NotReady {
                id,
                state: status.name().to_string(),
            })
        }
    };
    let view = filter_view(&analysis, keep).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    Ok(Json(view))
}

async fn get_audio(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let record = state.store.session(&id)?.record;
    let bytes = tokio::fs::read(state.store.audio_path(&record)).await?;
    Ok(([(header::CONTENT_TYPE, "audio/wav")], bytes).into_response())
}

async fn palette() -> Json<Palette> {
    Json(Palette {
        schema_version: SCHEMA_VERSION,
        emotions: EmotionLabel::ALL.to_vec(),
        colors: PALETTE.iter().copied().collect(),
    })
}
