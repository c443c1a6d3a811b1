use std::sync::Arc;

use affect_core::audio_io::AudioClip;
use affect_core::dataset::Featurizer;
use affect_core::nn::Model;
use affect_core::pipeline::transcript::{StaticTranscriber, TimedTranscript, Transcriber};
use affect_core::pipeline::{analyze_session, PipelineError, SessionAnalysis, SessionConfig};

/// The model and settings every upload is analyzed with.
pub struct Engine {
    model: Model,
    featurizer: Featurizer,
    session: SessionConfig,
    transcriber: Option<Arc<dyn Transcriber>>,
}

impl Engine {
    pub fn new(model: Model, featurizer: Featurizer, session: SessionConfig) -> Self {
        Engine {
            model,
            featurizer,
            session,
            transcriber: None,
        }
    }

    /// Recognizer used for uploads that arrive without a transcript.
    pub fn with_transcriber(mut self, transcriber: Arc<dyn Transcriber>) -> Self {
        self.transcriber = Some(transcriber);
        self
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// An uploaded transcript wins; otherwise the configured recognizer runs;
    /// with neither, the analysis has no transcript spans.
    pub fn analyze(
        &self,
        clip: &AudioClip,
        uploaded: Option<TimedTranscript>,
    ) -> Result<SessionAnalysis, PipelineError> {
        let fallback;
        let asr: &dyn Transcriber = match (uploaded, &self.transcriber) {
            (Some(t), _) => {
                fallback = StaticTranscriber(t);
                &fallback
            }
            (None, Some(real)) => real.as_ref(),
            (None, None) => {
                fallback = StaticTranscriber(TimedTranscript::default());
                &fallback
            }
        };
        analyze_session(clip, &self.model, &self.featurizer, asr, &self.session)
    }
}
