//! Timed transcripts and the transcriber integration point.
//!
//! No speech recognizer ships with the crate. [`SidecarTranscriber`] reads
//! word timings from a `<name>.words.json` file next to the audio, which is
//! the format any external recognizer client is expected to produce:
//!
//! ```json
//! [{"text": "hello", "start_s": 0.12, "end_s": 0.48}, ...]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::AudioClip;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranscriptError {
    #[error("transcriber unavailable: {0}")]
    TranscriberUnavailable(String),
    #[error("invalid word timings: {0}")]
    InvalidTimings(String),
    #[error("malformed transcript: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Word {
    pub text: String,
    pub start_s: f64,
    pub end_s: f64,
}

impl Word {
    pub fn new(text: impl Into<String>, start_s: f64, end_s: f64) -> Self {
        Word {
            text: text.into(),
            start_s,
            end_s,
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start_s + self.end_s)
    }
}

/// Words in time order with nonoverlapping `[start_s, end_s]` intervals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimedTranscript {
    pub words: Vec<Word>,
}

impl TimedTranscript {
    pub fn new(words: Vec<Word>) -> Result<Self, TranscriptError> {
        let t = TimedTranscript { words };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), TranscriptError> {
        let mut prev: Option<&Word> = None;
        for (i, w) in self.words.iter().enumerate() {
            if !(w.start_s.is_finite() && w.end_s.is_finite()) || w.start_s < 0.0 || w.end_s < w.start_s {
                return Err(TranscriptError::InvalidTimings(format!(
                    "word {i} `{}` has interval [{}, {}]",
                    w.text, w.start_s, w.end_s
                )));
            }
            if let Some(p) = prev {
                if w.start_s < p.end_s {
                    return Err(TranscriptError::InvalidTimings(format!(
                        "word {i} `{}` starts at {} before word {} ends at {}",
                        w.text,
                        w.start_s,
                        i - 1,
                        p.end_s
                    )));
                }
            }
            prev = Some(w);
        }
        Ok(())
    }

    pub fn parse_json(bytes: &[u8]) -> Result<Self, TranscriptError> {
        let words: Vec<Word> = serde_json::from_slice(bytes).map_err(|e| TranscriptError::Malformed(e.to_string()))?;
        Self::new(words)
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }
}

/// Anything that turns audio into timed words.
pub trait Transcriber: Send + Sync {
    fn transcribe(&self, clip: &AudioClip) -> Result<TimedTranscript, TranscriptError>;
}

/// Runs `asr` and checks its output against the transcript invariants.
pub fn transcribe(clip: &AudioClip, asr: &dyn Transcriber) -> Result<TimedTranscript, TranscriptError> {
    let t = asr.transcribe(clip)?;
    t.validate()?;
    Ok(t)
}

/// `a/b/session.wav` -> `a/b/session.words.json`.
pub fn sidecar_path(audio: &Path) -> PathBuf {
    audio.with_extension("words.json")
}

pub fn read_sidecar(path: &Path) -> Result<TimedTranscript, TranscriptError> {
    let bytes =
        std::fs::read(path).map_err(|e| TranscriptError::TranscriberUnavailable(format!("{}: {e}", path.display())))?;
    TimedTranscript::parse_json(&bytes)
}

/// Mock recognizer backed by a `.words.json` sidecar file.
#[derive(Debug, Clone)]
pub struct SidecarTranscriber {
    path: PathBuf,
}

impl SidecarTranscriber {
    pub fn new(sidecar: impl Into<PathBuf>) -> Self {
        SidecarTranscriber { path: sidecar.into() }
    }

    /// Looks for the sidecar that belongs to `audio`.
    pub fn for_audio(audio: &Path) -> Self {
        Self::new(sidecar_path(audio))
    }
}

impl Transcriber for SidecarTranscriber {
    fn transcribe(&self, _clip: &AudioClip) -> Result<TimedTranscript, TranscriptError> {
        read_sidecar(&self.path)
    }
}

/// Returns a fixed transcript regardless of audio, e.g. one uploaded alongside it.
#[derive(Debug, Clone, Default)]
pub struct StaticTranscriber(pub TimedTranscript);

impl Transcriber for StaticTranscriber {
    fn transcribe(&self, _clip: &AudioClip) -> Result<TimedTranscript, TranscriptError> {
        Ok(self.0.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip() -> AudioClip {
        AudioClip::new(vec![0.0; 16], 16000).unwrap()
    }

    #[test]
    fn sidecar_with_three_words() {
        let dir = tempfile::tempdir().unwrap();
        let wav = dir.path().join("s.wav");
        std::fs::write(
            sidecar_path(&wav),
            r#"[{"text":"I","start_s":0.0,"end_s":0.2},{"text":"am","start_s":0.3,"end_s":0.5},{"text":"fine","start_s":0.5,"end_s":0.9}]"#,
        )
        .unwrap();
        let t = transcribe(&clip(), &SidecarTranscriber::for_audio(&wav)).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.words[2].text, "fine");
    }

    #[test]
    fn missing_sidecar_is_unavailable() {
        let dir = tempfile::tempdir().unwrap();
        let r = transcribe(&clip(), &SidecarTranscriber::for_audio(&dir.path().join("none.wav")));
        assert!(matches!(r, Err(TranscriptError::TranscriberUnavailable(_))));
    }

    #[test]
    fn overlapping_words_rejected() {
        let json = br#"[{"text":"a","start_s":0.0,"end_s":1.0},{"text":"b","start_s":0.5,"end_s":1.5}]"#;
        assert!(matches!(
            TimedTranscript::parse_json(json),
            Err(TranscriptError::InvalidTimings(_))
        ));
        let backwards = br#"[{"text":"a","start_s":1.0,"end_s":0.5}]"#;
        assert!(matches!(
            TimedTranscript::parse_json(backwards),
            Err(TranscriptError::InvalidTimings(_))
        ));
    }

    #[test]
    fn static_output_is_validated() {
        let bad = TimedTranscript {
            words: vec![Word::new("x", 2.0, 3.0), Word::new("y", 1.0, 1.5)],
        };
        assert!(transcribe(&clip(), &StaticTranscriber(bad)).is_err());
    }

    #[test]
    fn sidecar_path_replaces_extension() {
        assert_eq!(sidecar_path(Path::new("a/b/s.wav")), PathBuf::from("a/b/s.words.json"));
    }
}
