//! MFCC front-end, pooling and text features.
//!
//! Per frame: Hamming window, magnitude spectrum, mel filterbank,
//! `log(max(e, 1e-10))`, orthonormal DCT-II, first `num_cepstra`
//! coefficients. An extra last column holds `log(max(sum x^2, 1e-10))` of the
//! unwindowed frame.

mod dft;
mod mel;
mod text;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::AudioClip;

pub use dft::{dft_magnitude, naive_dft_magnitude};
pub use mel::{dct_ii, hz_to_mel, mel_center_frequencies, mel_edges_hz, mel_filterbank, mel_to_hz};
pub use text::{normalize_word, text_features, Lexicon};

pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("fft size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("frame of {frame_len} samples does not fit fft size {fft_size}")]
    FrameTooLong { frame_len: usize, fft_size: usize },
    #[error("clip is sampled at {actual} Hz, expected {expected} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
    #[error("feature matrix has no rows")]
    EmptyMatrix,
    #[error("lexicon line {line}: {reason}")]
    Lexicon { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub frame_len_ms: f64,
    pub hop_ms: f64,
    pub fft_size: usize,
    pub num_mel_filters: usize,
    pub num_cepstra: usize,
    pub pipeline_rate_hz: u32,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            frame_len_ms: 25.0,
            hop_ms: 10.0,
            fft_size: 512,
            num_mel_filters: 26,
            num_cepstra: 13,
            pipeline_rate_hz: 16000,
            fmin_hz: 0.0,
            fmax_hz: 8000.0,
        }
    }
}

impl FeatureConfig {
    pub fn frame_len_samples(&self) -> usize {
        (self.frame_len_ms * self.pipeline_rate_hz as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.hop_ms * self.pipeline_rate_hz as f64 / 1000.0).round() as usize
    }

    /// Columns of the frame matrix: cepstra plus log-energy.
    pub fn matrix_cols(&self) -> usize {
        self.num_cepstra + 1
    }

    /// Length of a pooled audio vector.
    pub fn pooled_len(&self) -> usize {
        2 * self.matrix_cols()
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |msg: String| Err(FeatureError::InvalidConfig(msg));
        if self.pipeline_rate_hz == 0 {
            return bad("pipeline rate must be positive".into());
        }
        if !self.fft_size.is_power_of_two() {
            return Err(FeatureError::NotPowerOfTwo(self.fft_size));
        }
        if self.frame_len_samples() < 2 || self.hop_samples() < 1 {
            return bad("frame must span at least 2 samples and hop at least 1".into());
        }
        if self.fft_size < self.frame_len_samples() {
            return bad(format!(
                "fft size {} is shorter than the frame ({} samples)",
                self.fft_size,
                self.frame_len_samples()
            ));
        }
        if !(self.fmin_hz >= 0.0 && self.fmin_hz < self.fmax_hz) {
            return bad("need 0 <= fmin < fmax".into());
        }
        if self.fmax_hz > self.pipeline_rate_hz as f64 / 2.0 {
            return bad(format!("fmax {} exceeds Nyquist", self.fmax_hz));
        }
        if self.num_mel_filters == 0 || self.num_cepstra == 0 || self.num_cepstra > self.num_mel_filters {
            return bad("need 1 <= num_cepstra <= num_mel_filters".into());
        }
        Ok(())
    }
}

/// Row-major frames x coefficients matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Option<Self> {
        (rows * cols == data.len()).then_some(FeatureMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Splits `samples` into frames of `frame_len` every `hop` samples.
///
/// Signals shorter than one frame yield a single zero-padded frame.
pub fn frame_signal(samples: &[f64], frame_len: usize, hop: usize) -> Vec<Vec<f64>> {
    assert!(frame_len >= 1 && hop >= 1, "frame_len and hop must be positive");
    if samples.len() < frame_len {
        let mut frame = samples.to_vec();
        frame.resize(frame_len, 0.0);
        return vec![frame];
    }
    let count = (samples.len() - frame_len) / hop + 1;
    (0..count)
        .map(|i| samples[i * hop..i * hop + frame_len].to_vec())
        .collect()
}

/// Number of frames `frame_signal` produces for `n` samples.
pub fn frame_count(n: usize, frame_len: usize, hop: usize) -> usize {
    if n < frame_len {
        1
    } else {
        (n - frame_len) / hop + 1
    }
}

/// Symmetric Hamming window, `0.54 - 0.46 cos(2 pi k / (n - 1))`.
pub fn hamming(n: usize) -> Vec<f64> {
    assert!(n >= 2, "hamming window needs n >= 2");
    let denom = (n - 1) as f64;
    (0..n)
        .map(|k| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * k as f64 / denom).cos())
        .collect()
}

/// Precomputed window and filterbank for repeated MFCC extraction.
#[derive(Debug, Clone)]
pub struct MfccExtractor {
    config: FeatureConfig,
    window: Vec<f64>,
    filterbank: Vec<Vec<f64>>,
}

impl MfccExtractor {
    pub fn new(config: FeatureConfig) -> Result<Self, FeatureError> {
        config.validate()?;
        Ok(MfccExtractor {
            window: hamming(config.frame_len_samples()),
            filterbank: mel_filterbank(&config),
            config,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    /// MFCC matrix of raw samples assumed to be at the pipeline rate.
    pub fn extract_samples(&self, samples: &[f64]) -> Result<FeatureMatrix, FeatureError> {
        let cfg = &self.config;
        let frames = frame_signal(samples, cfg.frame_len_samples(), cfg.hop_samples());
        let cols = cfg.matrix_cols();
        let mut data = Vec::with_capacity(frames.len() * cols);
        let mut windowed = vec![0.0; self.window.len()];
        for frame in &frames {
            for ((w, x), out) in self.window.iter().zip(frame).zip(windowed.iter_mut()) {
                *out = w * x;
            }
            let spectrum = dft_magnitude(&windowed, cfg.fft_size)?;
            let log_mel: Vec<f64> = self
                .filterbank
                .iter()
                .map(|filter| {
                    let e: f64 = filter.iter().zip(&spectrum).map(|(w, m)| w * m).sum();
                    e.max(LOG_FLOOR).ln()
                })
                .collect();
            data.extend(dct_ii(&log_mel).into_iter().take(cfg.num_cepstra));
            let energy: f64 = frame.iter().map(|x| x * x).sum();
            data.push(energy.max(LOG_FLOOR).ln());
        }
        Ok(FeatureMatrix {
            rows: frames.len(),
            cols,
            data,
        })
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<FeatureMatrix, FeatureError> {
        if clip.sample_rate() != self.config.pipeline_rate_hz {
            return Err(FeatureError::SampleRateMismatch {
                expected: self.config.pipeline_rate_hz,
                actual: clip.sample_rate(),
            });
        }
        self.extract_samples(clip.samples())
    }
}

/// MFCC frame matrix of a clip already resampled to `config.pipeline_rate_hz`.
pub fn mfcc(clip: &AudioClip, config: &FeatureConfig) -> Result<FeatureMatrix, FeatureError> {
    MfccExtractor::new(config.clone())?.extract(clip)
}

/// Per-column mean followed by per-column population standard deviation.
pub fn pool(matrix: &FeatureMatrix) -> Result<FeatureVector, FeatureError> {
    if matrix.rows == 0 {
        return Err(FeatureError::EmptyMatrix);
    }
    let n = matrix.rows as f64;
    let mut means = vec![0.0; matrix.cols];
    for r in 0..matrix.rows {
        for (m, x) in means.iter_mut().zip(matrix.row(r)) {
            *m += x;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut vars = vec![0.0; matrix.cols];
    for r in 0..matrix.rows {
        for ((v, x), m) in vars.iter_mut().zip(matrix.row(r)).zip(&means) {
            *v += (x - m) * (x - m);
        }
    }
    means.extend(vars.into_iter().map(|v| (v / n).sqrt()));
    Ok(FeatureVector(means))
}

/// Audio features first, then text features.
pub fn fuse(audio: &FeatureVector, text: &FeatureVector) -> FeatureVector {
    let mut out = audio.0.clone();
    out.extend_from_slice(&text.0);
    FeatureVector(out)
}
