//! Speech emotion recognition engine.
//!
//! The crate covers the whole offline path from a WAV recording to a
//! [`pipeline::SessionAnalysis`]:
//!
//! * [`audio_io`] decodes 16-bit PCM RIFF/WAVE into normalized mono clips.
//! * [`features`] computes MFCC frame matrices, pooled vectors and lexicon text features.
//! * [`nn`] holds the from-scratch DNN / 1D-CNN classifiers, training and the model file format.
//! * [`corpus`] ingests labeled manifests and produces stratified splits.
//! * [`evalmetrics`] builds confusion matrices and per-emotion error reports.
//! * [`pipeline`] segments a session, classifies windows and aligns the transcript.
//! * [`fixtures`] synthesizes a small tone corpus used by tests and demos.

pub mod audio_io;
pub mod corpus;
pub mod dataset;
pub mod emotion;
pub mod evalmetrics;
pub mod features;
pub mod fixtures;
pub mod nn;
pub mod pipeline;

pub use audio_io::AudioClip;
pub use emotion::{EmotionDistribution, EmotionLabel, EmotionSet, NUM_EMOTIONS};
