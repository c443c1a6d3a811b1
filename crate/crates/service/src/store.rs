//! On-disk patient/session store with an in-memory index.
//!
//! Layout:
//!
//! ```text
//! <root>/<patient>/patient.json
//! <root>/<patient>/<session>/meta.json
//! <root>/<patient>/<session>/audio.wav
//! <root>/<patient>/<session>/audio.words.json   (uploaded transcript, optional)
//! <root>/<patient>/<session>/analysis.json      (once ready)
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use affect_core::pipeline::transcript::TimedTranscript;
use affect_core::pipeline::{SessionAnalysis, SCHEMA_VERSION};
use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

pub const PATIENT_FILE: &str = "patient.json";
pub const META_FILE: &str = "meta.json";
pub const AUDIO_FILE: &str = "audio.wav";
pub const TRANSCRIPT_FILE: &str = "audio.words.json";
pub const ANALYSIS_FILE: &str = "analysis.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patient {
    pub schema_version: u32,
    pub id: String,
    pub display_name: String,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum SessionStatus {
    Processing,
    Ready,
    Failed { reason: String },
}

impl SessionStatus {
    pub fn name(&self) -> &'static str {
        match self {
            SessionStatus::Processing => "processing",
            SessionStatus::Ready => "ready",
            SessionStatus::Failed { .. } => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub schema_version: u32,
    pub id: String,
    pub patient_id: String,
    pub uploaded_at: String,
    /// Audio file name inside the session directory.
    pub audio: String,
    pub has_transcript: bool,
    pub status: SessionStatus,
}

/// A session and, once ready, its immutable analysis.
#[derive(Debug, Clone)]
pub struct SessionSlot {
    pub record: SessionRecord,
    pub analysis: Option<Arc<SessionAnalysis>>,
}

#[derive(Default)]
struct Index {
    patients: BTreeMap<String, Patient>,
    sessions: HashMap<String, SessionSlot>,
    by_patient: HashMap<String, Vec<String>>,
}

pub struct Store {
    root: PathBuf,
    index: RwLock<Index>,
    /// Serializes every mutation, on disk and in the index.
    writer: Mutex<u64>,
}

fn storage<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> ServiceError + '_ {
    move |e| ServiceError::Storage(format!("{}: {e}", path.display()))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ServiceError> {
    let dir = path.parent().expect("store paths have a parent");
    let mut tmp = tempfile::Builder::new()
        .prefix(".tmp-")
        .tempfile_in(dir)
        .map_err(storage(path))?;
    tmp.write_all(bytes).map_err(storage(path))?;
    tmp.as_file().sync_all().map_err(storage(path))?;
    tmp.persist(path).map_err(storage(path))?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ServiceError> {
    let bytes = std::fs::read(path).map_err(storage(path))?;
    serde_json::from_slice(&bytes).map_err(storage(path))
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec_pretty(value).expect("store types serialize")
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn subdirs(dir: &Path) -> Result<Vec<PathBuf>, ServiceError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(storage(dir))? {
        let entry = entry.map_err(storage(dir))?;
        let name = entry.file_name();
        if entry.file_type().map_err(storage(dir))?.is_dir() && !name.to_string_lossy().starts_with('.') {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

impl Store {
    /// Opens (creating if needed) the store at `root` and loads every record.
    /// IDs issued by this instance count up from `id_seed`.
    pub fn open(root: impl Into<PathBuf>, id_seed: u64) -> Result<Self, ServiceError> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(storage(&root))?;
        let mut index = Index::default();
        for pdir in subdirs(&root)? {
            let patient_file = pdir.join(PATIENT_FILE);
            if !patient_file.exists() {
                continue;
            }
            let patient: Patient = read_json(&patient_file)?;
            let mut slots = Vec::new();
            for sdir in subdirs(&pdir)? {
                let meta = sdir.join(META_FILE);
                if !meta.exists() {
                    continue;
                }
                let record: SessionRecord = read_json(&meta)?;
                let analysis = if record.status == SessionStatus::Ready {
                    let path = sdir.join(ANALYSIS_FILE);
                    let analysis: SessionAnalysis = read_json(&path)?;
                    analysis.validate().map_err(storage(&path))?;
                    Some(Arc::new(analysis))
                } else {
                    None
                };
                slots.push(SessionSlot { record, analysis });
            }
            slots.sort_by(|a, b| (&a.record.uploaded_at, &a.record.id).cmp(&(&b.record.uploaded_at, &b.record.id)));
            let ids = slots.iter().map(|s| s.record.id.clone()).collect();
            for s in slots {
                index.sessions.insert(s.record.id.clone(), s);
            }
            index.by_patient.insert(patient.id.clone(), ids);
            index.patients.insert(patient.id.clone(), patient);
        }
        Ok(Store {
            root,
            index: RwLock::new(index),
            writer: Mutex::new(id_seed),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// `<prefix>-<UTC timestamp>-<counter>`; skips any ID already in use.
    fn next_id(&self, counter: &mut u64, prefix: &str) -> String {
        let index = self.index.read().expect("index lock");
        loop {
            let id = format!("{prefix}-{}-{:06}", Utc::now().format("%Y%m%dT%H%M%S"), *counter);
            *counter += 1;
            if !index.patients.contains_key(&id) && !index.sessions.contains_key(&id) {
                return id;
            }
        }
    }

    pub fn create_patient(&self, display_name: &str) -> Result<Patient, ServiceError> {
        let name = display_name.trim();
        if name.is_empty() {
            return Err(ServiceError::BadRequest("display_name must not be empty".into()));
        }
        let mut counter = self.writer.lock().expect("writer lock");
        let patient = Patient {
            schema_version: SCHEMA_VERSION,
            id: self.next_id(&mut counter, "p"),
            display_name: name.to_string(),
            created_at: now(),
        };
        let dir = self.root.join(&patient.id);
        std::fs::create_dir_all(&dir).map_err(storage(&dir))?;
        write_atomic(&dir.join(PATIENT_FILE), &to_json(&patient))?;
        let mut index = self.index.write().expect("index lock");
        index.by_patient.insert(patient.id.clone(), Vec::new());
        index.patients.insert(patient.id.clone(), patient.clone());
        Ok(patient)
    }

    /// All patients, oldest first.
    pub fn patients(&self) -> Vec<Patient> {
        let index = self.index.read().expect("index lock");
        let mut all: Vec<Patient> = index.patients.values().cloned().collect();
        all.sort_by(|a, b| (&a.created_at, &a.id).cmp(&(&b.created_at, &b.id)));
        all
    }

    pub fn patient(&self, id: &str) -> Result<Patient, ServiceError> {
        let index = self.index.read().expect("index lock");
        index
            .patients
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownPatient(id.to_string()))
    }

    /// A patient's sessions in upload order.
    pub fn sessions(&self, patient_id: &str) -> Result<Vec<SessionRecord>, ServiceError> {
        let index = self.index.read().expect("index lock");
        let ids = index
            .by_patient
            .get(patient_id)
            .ok_or_else(|| ServiceError::UnknownPatient(patient_id.to_string()))?;
        Ok(ids.iter().map(|id| index.sessions[id].record.clone()).collect())
    }

    pub fn session(&self, id: &str) -> Result<SessionSlot, ServiceError> {
        let index = self.index.read().expect("index lock");
        index
            .sessions
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub fn session_dir(&self, record: &SessionRecord) -> PathBuf {
        self.root.join(&record.patient_id).join(&record.id)
    }

    pub fn audio_path(&self, record: &SessionRecord) -> PathBuf {
        self.session_dir(record).join(&record.audio)
    }

    /// Stores the uploaded audio (and transcript) and records the session as
    /// processing.
    pub fn begin_session(
        &self,
        patient_id: &str,
        wav: &[u8],
        transcript: Option<&TimedTranscript>,
    ) -> Result<SessionRecord, ServiceError> {
        let mut counter = self.writer.lock().expect("writer lock");
        if !self.index.read().expect("index lock").patients.contains_key(patient_id) {
            return Err(ServiceError::UnknownPatient(patient_id.to_string()));
        }
        let record = SessionRecord {
            schema_version: SCHEMA_VERSION,
            id: self.next_id(&mut counter, "s"),
            patient_id: patient_id.to_string(),
            uploaded_at: now(),
            audio: AUDIO_FILE.to_string(),
            has_transcript: transcript.is_some(),
            status: SessionStatus::Processing,
        };
        let dir = self.session_dir(&record);
        std::fs::create_dir_all(&dir).map_err(storage(&dir))?;
        write_atomic(&dir.join(AUDIO_FILE), wav)?;
        if let Some(t) = transcript {
            write_atomic(&dir.join(TRANSCRIPT_FILE), &to_json(t))?;
        }
        write_atomic(&dir.join(META_FILE), &to_json(&record))?;
        let mut index = self.index.write().expect("index lock");
        index
            .by_patient
            .get_mut(patient_id)
            .expect("patient checked above")
            .push(record.id.clone());
        index.sessions.insert(
            record.id.clone(),
            SessionSlot {
                record: record.clone(),
                analysis: None,
            },
        );
        Ok(record)
    }

    /// The transcript uploaded with a session, if any.
    pub fn uploaded_transcript(&self, record: &SessionRecord) -> Result<Option<TimedTranscript>, ServiceError> {
        if !record.has_transcript {
            return Ok(None);
        }
        let path = self.session_dir(record).join(TRANSCRIPT_FILE);
        read_json(&path).map(Some)
    }

    /// Records the outcome of a processing session. The analysis file is in
    /// place before the status turns ready.
    pub fn finish_session(
        &self,
        id: &str,
        outcome: Result<SessionAnalysis, String>,
    ) -> Result<SessionRecord, ServiceError> {
        let _guard = self.writer.lock().expect("writer lock");
        let mut record = self.session(id)?.record;
        let dir = self.session_dir(&record);
        let analysis = match outcome {
            Ok(a) => {
                write_atomic(&dir.join(ANALYSIS_FILE), &to_json(&a))?;
                record.status = SessionStatus::Ready;
                Some(Arc::new(a))
            }
            Err(reason) => {
                record.status = SessionStatus::Failed { reason };
                None
            }
        };
        write_atomic(&dir.join(META_FILE), &to_json(&record))?;
        let mut index = self.index.write().expect("index lock");
        index.sessions.insert(
            id.to_string(),
            SessionSlot {
                record: record.clone(),
                analysis,
            },
        );
        Ok(record)
    }
}
