//! Session analysis: fixed-window emotion timeline, per-emotion totals,
//! waveform envelope and emotion-tagged transcript spans.

pub mod transcript;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::{AudioClip, AudioError};
use crate::dataset::{DatasetError, Featurizer};
use crate::emotion::{EmotionDistribution, EmotionLabel, EmotionSet, NUM_EMOTIONS};
use crate::nn::{Arch, Model, NnError};
use transcript::{transcribe, TimedTranscript, Transcriber, TranscriptError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("clip has no samples")]
    EmptyClip,
    #[error("emotion filter is empty")]
    EmptyFilter,
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("invalid analysis: {0}")]
    InvalidAnalysis(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub window_s: f64,
    pub hop_s: f64,
    pub bins_per_second: u32,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            window_s: 3.0,
            hop_s: 1.0,
            bins_per_second: 20,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.window_s > 0.0 && self.window_s.is_finite()) || !(self.hop_s > 0.0 && self.hop_s.is_finite()) {
            return Err(PipelineError::InvalidConfig("window and hop must be positive".into()));
        }
        if self.bins_per_second == 0 {
            return Err(PipelineError::InvalidConfig("bins_per_second must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_s: f64,
    pub end_s: f64,
    pub distribution: EmotionDistribution,
    pub top: EmotionLabel,
}

impl Segment {
    pub fn new(start_s: f64, end_s: f64, distribution: EmotionDistribution) -> Self {
        Segment {
            start_s,
            end_s,
            top: distribution.top(),
            distribution,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start_s <= t && t < self.end_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSpan {
    pub text: String,
    pub start_s: f64,
    pub end_s: f64,
    pub emotion: EmotionLabel,
}

/// Segment counts per emotion, serialized as a map in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EmotionCounts(pub [u64; NUM_EMOTIONS]);

impl EmotionCounts {
    pub fn get(&self, e: EmotionLabel) -> u64 {
        self.0[e.index()]
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}

impl Serialize for EmotionCounts {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(NUM_EMOTIONS))?;
        for e in EmotionLabel::ALL {
            map.serialize_entry(e.as_str(), &self.0[e.index()])?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for EmotionCounts {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<EmotionLabel, u64>::deserialize(deserializer)?;
        let mut counts = [0; NUM_EMOTIONS];
        for (e, c) in map {
            counts[e.index()] = c;
        }
        Ok(EmotionCounts(counts))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeBin {
    pub min: f64,
    pub max: f64,
    pub emotion: EmotionLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub bins_per_second: u32,
    pub bins: Vec<EnvelopeBin>,
}

/// Everything the dashboard renders for one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionAnalysis {
    pub schema_version: u32,
    pub duration_s: f64,
    pub window_s: f64,
    pub hop_s: f64,
    pub segments: Vec<Segment>,
    pub summary: EmotionCounts,
    pub envelope: Envelope,
    pub spans: Vec<TranscriptSpan>,
}

impl SessionAnalysis {
    /// Checks the structural invariants: segments tile the duration on the
    /// hop grid, summary totals match, tops are argmaxes, envelope covers the
    /// duration.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidAnalysis(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {}", self.schema_version));
        }
        let expected = segment_bounds(self.duration_s, self.window_s, self.hop_s)?;
        if expected.len() != self.segments.len() {
            return bad(format!("{} segments, expected {}", self.segments.len(), expected.len()));
        }
        for (i, (seg, (s, e))) in self.segments.iter().zip(&expected).enumerate() {
            if (seg.start_s - s).abs() > 1e-9 || (seg.end_s - e).abs() > 1e-9 {
                return bad(format!(
                    "segment {i} is [{}, {}), expected [{s}, {e})",
                    seg.start_s, seg.end_s
                ));
            }
            if seg.top != seg.distribution.top() {
                return bad(format!("segment {i} top is not the argmax"));
            }
        }
        if self.summary != summarize(&self.segments) {
            return bad("summary does not match segments".into());
        }
        let bins = (self.duration_s * self.envelope.bins_per_second as f64 - 1e-9)
            .ceil()
            .max(0.0) as usize;
        if self.envelope.bins.len() != bins {
            return bad(format!("{} envelope bins, expected {bins}", self.envelope.bins.len()));
        }
        Ok(())
    }
}

fn segment_bounds(duration_s: f64, window_s: f64, hop_s: f64) -> Result<Vec<(f64, f64)>, PipelineError> {
    if duration_s.is_nan() || duration_s <= 0.0 {
        return Err(PipelineError::EmptyClip);
    }
    if !(window_s > 0.0 && hop_s > 0.0) {
        return Err(PipelineError::InvalidConfig("window and hop must be positive".into()));
    }
    if duration_s < window_s {
        return Ok(vec![(0.0, duration_s)]);
    }
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let start = k as f64 * hop_s;
        if start >= duration_s {
            break;
        }
        out.push((start, (start + window_s).min(duration_s)));
        k += 1;
    }
    Ok(out)
}

/// Windows of `window_s` starting every `hop_s` while the start lies inside
/// the clip; each is truncated at the clip end. A clip shorter than one
/// window yields the single segment `[0, duration)`.
pub fn segment_audio(clip: &AudioClip, window_s: f64, hop_s: f64) -> Result<Vec<(f64, f64)>, PipelineError> {
    if clip.is_empty() {
        return Err(PipelineError::EmptyClip);
    }
    segment_bounds(clip.duration_s(), window_s, hop_s)
}

fn sample_index(t: f64, rate: u32, len: usize) -> usize {
    ((t * rate as f64).round() as usize).min(len)
}

/// Featurizes and classifies every window. `clip` must already be at the
/// featurizer's pipeline rate. Fused models see the words whose midpoint
/// falls inside the window.
pub fn classify_segments(
    model: &Model,
    featurizer: &Featurizer,
    clip: &AudioClip,
    segments: &[(f64, f64)],
    transcript: &TimedTranscript,
) -> Result<Vec<Segment>, PipelineError> {
    let rate = clip.sample_rate();
    segments
        .iter()
        .map(|&(start, end)| {
            let samples = clip.slice(
                sample_index(start, rate, clip.len()),
                sample_index(end, rate, clip.len()),
            );
            let words: Vec<&str> = if model.spec().arch == Arch::Fused {
                transcript
                    .words
                    .iter()
                    .filter(|w| (start..end).contains(&w.midpoint()))
                    .map(|w| w.text.as_str())
                    .collect()
            } else {
                Vec::new()
            };
            let input = featurizer.featurize(model.spec(), samples, &words)?;
            Ok(Segment::new(start, end, model.predict(&input)?))
        })
        .collect()
}

/// The latest-starting segment containing `t`; the last segment when `t` is
/// past every segment.
pub fn segment_at(segments: &[Segment], t: f64) -> Option<&Segment> {
    segments
        .iter()
        .rev()
        .find(|s| s.contains(t))
        .or_else(|| segments.last().filter(|s| t >= s.end_s))
        .or_else(|| segments.first())
}

/// Tags each word with the emotion of the segment containing its midpoint
/// and merges runs of equal emotion into spans.
pub fn align(segments: &[Segment], transcript: &TimedTranscript) -> Vec<TranscriptSpan> {
    let mut spans: Vec<TranscriptSpan> = Vec::new();
    if segments.is_empty() {
        return spans;
    }
    for word in &transcript.words {
        let emotion = segment_at(segments, word.midpoint()).expect("segments nonempty").top;
        match spans.last_mut() {
            Some(span) if span.emotion == emotion => {
                span.text.push(' ');
                span.text.push_str(&word.text);
                span.end_s = word.end_s;
            }
            _ => spans.push(TranscriptSpan {
                text: word.text.clone(),
                start_s: word.start_s,
                end_s: word.end_s,
                emotion,
            }),
        }
    }
    spans
}

/// Number of segments whose top emotion is each label.
pub fn summarize(segments: &[Segment]) -> EmotionCounts {
    let mut counts = EmotionCounts::default();
    for s in segments {
        counts.0[s.top.index()] += 1;
    }
    counts
}

/// `ceil(duration * bins_per_second)` bins of min/max amplitude, each tagged
/// with the emotion of the segment covering the bin midpoint. Empty bins
/// report `(0, 0)`.
pub fn waveform_envelope(clip: &AudioClip, segments: &[Segment], bins_per_second: u32) -> Envelope {
    let n = clip.len() as u64;
    let rate = clip.sample_rate() as u64;
    let bps = bins_per_second.max(1) as u64;
    let count = (n * bps).div_ceil(rate);
    let samples = clip.samples();
    let bins = (0..count)
        .map(|i| {
            let lo = (i * rate / bps).min(n) as usize;
            let hi = ((i + 1) * rate / bps).min(n) as usize;
            let chunk = &samples[lo..hi];
            let (min, max) = if chunk.is_empty() {
                (0.0, 0.0)
            } else {
                chunk
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)))
            };
            let mid = (i as f64 + 0.5) / bps as f64;
            let emotion = segment_at(segments, mid).map_or(EmotionLabel::Neutral, |s| s.top);
            EnvelopeBin { min, max, emotion }
        })
        .collect();
    Envelope {
        bins_per_second: bps as u32,
        bins,
    }
}

/// Full analysis of one recording: resample, window, classify, transcribe,
/// align, summarize and build the envelope.
pub fn analyze_session(
    clip: &AudioClip,
    model: &Model,
    featurizer: &Featurizer,
    asr: &dyn Transcriber,
    config: &SessionConfig,
) -> Result<SessionAnalysis, PipelineError> {
    config.validate()?;
    if clip.is_empty() {
        return Err(PipelineError::EmptyClip);
    }
    let clip = featurizer.prepare(clip)?;
    let transcript = transcribe(&clip, asr)?;
    let bounds = segment_audio(&clip, config.window_s, config.hop_s)?;
    let segments = classify_segments(model, featurizer, &clip, &bounds, &transcript)?;
    let spans = align(&segments, &transcript);
    let envelope = waveform_envelope(&clip, &segments, config.bins_per_second);
    Ok(SessionAnalysis {
        schema_version: SCHEMA_VERSION,
        duration_s: clip.duration_s(),
        window_s: config.window_s,
        hop_s: config.hop_s,
        summary: summarize(&segments),
        segments,
        envelope,
        spans,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marked<T> {
    #[serde(flatten)]
    pub item: T,
    pub hidden: bool,
}

/// An analysis with items outside the emotion filter marked hidden.
/// The summary and envelope are passed through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisView {
    pub schema_version: u32,
    pub filter: EmotionSet,
    pub duration_s: f64,
    pub window_s: f64,
    pub hop_s: f64,
    pub segments: Vec<Marked<Segment>>,
    pub summary: EmotionCounts,
    pub envelope: Envelope,
    pub spans: Vec<Marked<TranscriptSpan>>,
}

impl AnalysisView {
    pub fn hidden_count(&self) -> usize {
        self.segments.iter().filter(|s| s.hidden).count() + self.spans.iter().filter(|s| s.hidden).count()
    }

    /// Narrows the filter to `keep ∩ current`. Applying the same set twice is
    /// the same as applying it once.
    pub fn filter(&self, keep: EmotionSet) -> Result<AnalysisView, PipelineError> {
        let keep = keep.intersection(self.filter);
        if keep.is_empty() {
            return Err(PipelineError::EmptyFilter);
        }
        let mut view = self.clone();
        view.filter = keep;
        for s in &mut view.segments {
            s.hidden = !keep.contains(s.item.top);
        }
        for s in &mut view.spans {
            s.hidden = !keep.contains(s.item.emotion);
        }
        Ok(view)
    }
}

pub fn filter_view(analysis: &SessionAnalysis, keep: EmotionSet) -> Result<AnalysisView, PipelineError> {
    if keep.is_empty() {
        return Err(PipelineError::EmptyFilter);
    }
    Ok(AnalysisView {
        schema_version: analysis.schema_version,
        filter: keep,
        duration_s: analysis.duration_s,
        window_s: analysis.window_s,
        hop_s: analysis.hop_s,
        segments: analysis
            .segments
            .iter()
            .map(|s| Marked {
                hidden: !keep.contains(s.top),
                item: s.clone(),
            })
            .collect(),
        summary: analysis.summary,
        envelope: analysis.envelope.clone(),
        spans: analysis
            .spans
            .iter()
            .map(|s| Marked {
                hidden: !keep.contains(s.emotion),
                item: s.clone(),
            })
            .collect(),
    })
}
