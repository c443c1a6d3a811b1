//! Synthetic tone corpus: each emotion is a jittered sine (plus a weak
//! second harmonic and noise) at its own pitch. Small, separable, and fully
//! determined by a seed.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::audio_io::{write_wav, AudioClip};
use crate::corpus::{manifest_to_csv, DatasetTag, ManifestEntry};
use crate::emotion::EmotionLabel;
use crate::pipeline::transcript::{sidecar_path, TimedTranscript, Word};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("io: {0}")]
    Io(String),
}

fn io_err(path: &Path, e: std::io::Error) -> FixtureError {
    FixtureError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureConfig {
    pub clips_per_emotion: usize,
    pub clip_seconds: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            clips_per_emotion: 24,
            clip_seconds: 1.0,
            sample_rate: 16000,
            seed: 2019,
        }
    }
}

/// Base pitch of each emotion's tone, in Hz.
pub fn tone_frequency(e: EmotionLabel) -> f64 {
    const FREQS: [f64; 8] = [220.0, 330.0, 495.0, 740.0, 1110.0, 1665.0, 2500.0, 3750.0];
    FREQS[e.index()]
}

pub fn synth_tone(e: EmotionLabel, seconds: f64, rate: u32, rng: &mut impl Rng) -> AudioClip {
    let f = tone_frequency(e) * rng.gen_range(0.97..1.03);
    let amp = rng.gen_range(0.2..0.6);
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let n = (seconds * rate as f64).round() as usize;
    let w = std::f64::consts::TAU * f / rate as f64;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64;
            amp * ((w * t + phase).sin() + 0.3 * (2.0 * w * t + phase).sin()) / 1.3 + rng.gen_range(-0.01..0.01)
        })
        .collect();
    AudioClip::from_clamped(samples, rate).expect("positive rate")
}

/// Writes `<emotion>-<nn>.wav` clips and `manifest.csv` into `out_dir`.
/// Manifest paths are relative to `out_dir`.
pub fn generate_corpus(out_dir: &Path, config: &FixtureConfig) -> Result<Vec<ManifestEntry>, FixtureError> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut entries = Vec::new();
    for e in EmotionLabel::ALL {
        for i in 0..config.clips_per_emotion {
            let name = format!("{}-{:02}.wav", e.as_str(), i);
            let clip = synth_tone(e, config.clip_seconds, config.sample_rate, &mut rng);
            let path = out_dir.join(&name);
            std::fs::write(&path, write_wav(&clip)).map_err(|err| io_err(&path, err))?;
            entries.push(ManifestEntry {
                filepath: PathBuf::from(name),
                emotion: e,
                actor_id: format!("{:02}", i % 4 + 1),
                dataset: DatasetTag::Other,
            });
        }
    }
    let manifest = out_dir.join("manifest.csv");
    std::fs::write(&manifest, manifest_to_csv(&entries)).map_err(|e| io_err(&manifest, e))?;
    Ok(entries)
}

/// Emotions of the 10 s demo session, one per second.
pub const SESSION_PLAN: [EmotionLabel; 10] = [
    EmotionLabel::Happy,
    EmotionLabel::Happy,
    EmotionLabel::Happy,
    EmotionLabel::Happy,
    EmotionLabel::Sad,
    EmotionLabel::Sad,
    EmotionLabel::Sad,
    EmotionLabel::Angry,
    EmotionLabel::Angry,
    EmotionLabel::Angry,
];

/// Concatenated one-second tones following `plan`.
pub fn session_clip(plan: &[EmotionLabel], rate: u32, seed: u64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for e in plan {
        samples.extend_from_slice(synth_tone(*e, 1.0, rate, &mut rng).samples());
    }
    AudioClip::new(samples, rate).expect("tones are in range")
}

/// A word every 0.6 s, drawn from the lexicon group of the emotion playing
/// at that moment.
pub fn session_transcript(plan: &[EmotionLabel]) -> TimedTranscript {
    let vocab = |e: EmotionLabel| -> &'static [&'static str] {
        match e {
            EmotionLabel::Happy => &["glad", "today", "great", "fun"],
            EmotionLabel::Sad => &["lonely", "and", "tired", "again"],
            EmotionLabel::Angry => &["that", "was", "unfair", "mad"],
            _ => &["okay", "so"],
        }
    };
    let duration = plan.len() as f64;
    let mut words = Vec::new();
    let mut i = 0;
    loop {
        let start = i as f64 * 0.6 + 0.05;
        let end = start + 0.4;
        if end > duration {
            break;
        }
        let e = plan[((start + end) / 2.0) as usize];
        let v = vocab(e);
        words.push(Word::new(v[i % v.len()], start, end));
        i += 1;
    }
    TimedTranscript::new(words).expect("generated timings are ordered")
}

/// Writes `session.wav` and `session.words.json` into `out_dir`, returning the WAV path.
pub fn write_session(out_dir: &Path, seed: u64) -> Result<PathBuf, FixtureError> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let wav = out_dir.join("session.wav");
    let clip = session_clip(&SESSION_PLAN, 16000, seed);
    std::fs::write(&wav, write_wav(&clip)).map_err(|e| io_err(&wav, e))?;
    let sidecar = sidecar_path(&wav);
    let json = serde_json::to_string_pretty(&session_transcript(&SESSION_PLAN)).expect("serializable");
    std::fs::write(&sidecar, json).map_err(|e| io_err(&sidecar, e))?;
    Ok(wav)
}
