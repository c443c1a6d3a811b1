//! Glue between audio, features and models: turns clips (plus optional
//! transcripts) into the input tensor each architecture expects.

use std::path::Path;

use thiserror::Error;

use crate::audio_io::{parse_wav, resample, AudioClip, AudioError};
use crate::corpus::ManifestEntry;
use crate::features::{fuse, pool, text_features, FeatureConfig, FeatureError, Lexicon, MfccExtractor};
use crate::nn::{Arch, ModelSpec, NnError, Sample, Tensor};
use crate::pipeline::transcript::{read_sidecar, sidecar_path, TranscriptError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Audio { path: String, source: AudioError },
    #[error("{path}: io: {message}")]
    Io { path: String, message: String },
    #[error("{path}: transcript: {source}")]
    Transcript { path: String, source: TranscriptError },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Everything needed to featurize audio for one of the three architectures.
#[derive(Debug, Clone)]
pub struct Featurizer {
    extractor: MfccExtractor,
    lexicon: Lexicon,
}

impl Default for Featurizer {
    fn default() -> Self {
        Featurizer::new(FeatureConfig::default(), Lexicon::default()).expect("default config is valid")
    }
}

impl Featurizer {
    pub fn new(config: FeatureConfig, lexicon: Lexicon) -> Result<Self, FeatureError> {
        Ok(Featurizer {
            extractor: MfccExtractor::new(config)?,
            lexicon,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        self.extractor.config()
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    /// The default topology for `arch` sized to this featurizer's outputs.
    pub fn default_spec(&self, arch: Arch) -> ModelSpec {
        let cfg = self.config();
        match arch {
            Arch::Dnn => ModelSpec::default_dnn(cfg.pooled_len()),
            Arch::Cnn => ModelSpec::default_cnn(cfg.matrix_cols()),
            Arch::Fused => ModelSpec::default_fused(cfg.pooled_len() + self.lexicon.len()),
        }
    }

    /// Resamples to the pipeline rate if needed.
    pub fn prepare(&self, clip: &AudioClip) -> Result<AudioClip, AudioError> {
        resample(clip, self.config().pipeline_rate_hz)
    }

    /// Input tensor for `spec` from samples already at the pipeline rate.
    ///
    /// DNN: pooled MFCC vector. FUSED: pooled vector followed by lexicon
    /// features of `words`. CNN: the `[frames, coefficients]` matrix, with
    /// the last frame repeated when the clip is shorter than the network's
    /// receptive field.
    pub fn featurize<S: AsRef<str>>(
        &self,
        spec: &ModelSpec,
        samples: &[f64],
        words: &[S],
    ) -> Result<Tensor, DatasetError> {
        let matrix = self.extractor.extract_samples(samples)?;
        let tensor = match spec.arch {
            Arch::Dnn => Tensor::vector(pool(&matrix)?.0),
            Arch::Fused => {
                let audio = pool(&matrix)?;
                let text = text_features(words, &self.lexicon);
                Tensor::vector(fuse(&audio, &text).0)
            }
            Arch::Cnn => {
                let (rows, cols) = (matrix.rows(), matrix.cols());
                let need = spec.min_frames().max(rows);
                let mut data = matrix.into_data();
                let last = data[(rows - 1) * cols..].to_vec();
                for _ in rows..need {
                    data.extend_from_slice(&last);
                }
                Tensor::matrix(need, cols, data)?
            }
        };
        Ok(tensor)
    }
}

pub fn read_clip(path: &Path) -> Result<AudioClip, DatasetError> {
    let bytes = std::fs::read(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_wav(&bytes).map_err(|source| DatasetError::Audio {
        path: path.display().to_string(),
        source,
    })
}

/// Featurizes every manifest entry. Fused models read the entry's
/// `.words.json` sidecar when present and use an empty transcript otherwise.
pub fn build_samples(
    entries: &[ManifestEntry],
    featurizer: &Featurizer,
    spec: &ModelSpec,
) -> Result<Vec<Sample>, DatasetError> {
    entries
        .iter()
        .map(|entry| {
            let clip = featurizer
                .prepare(&read_clip(&entry.filepath)?)
                .map_err(|source| DatasetError::Audio {
                    path: entry.filepath.display().to_string(),
                    source,
                })?;
            let words: Vec<String> = if spec.arch == Arch::Fused {
                let sidecar = sidecar_path(&entry.filepath);
                if sidecar.exists() {
                    read_sidecar(&sidecar)
                        .map_err(|source| DatasetError::Transcript {
                            path: sidecar.display().to_string(),
                            source,
                        })?
                        .words
                        .into_iter()
                        .map(|w| w.text)
                        .collect()
                } else {
                    Vec::new()
                }
            } else {
                Vec::new()
            };
            let input = featurizer.featurize(spec, clip.samples(), &words)?;
            Ok(Sample {
                input,
                label: entry.emotion,
            })
        })
        .collect()
}
