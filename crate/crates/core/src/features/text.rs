//! Lexicon-count text features for the fused audio+text model.

use std::path::Path;

use crate::emotion::{EmotionLabel, NUM_EMOTIONS};

use super::{FeatureError, FeatureVector};

const DEFAULT_LEXICON: &str = include_str!("../../data/affect_lexicon.txt");

/// Eight word groups, one per emotion, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    groups: Vec<Vec<String>>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::parse(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }
}

impl Lexicon {
    /// Parses `emotion: word, word, ...` lines. Blank lines and `#` comments
    /// are ignored. Emotions not listed get an empty group.
    pub fn parse(text: &str) -> Result<Self, FeatureError> {
        let mut groups: Vec<Option<Vec<String>>> = vec![None; NUM_EMOTIONS];
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (label, words) = line.split_once(':').ok_or_else(|| FeatureError::Lexicon {
                line: line_no,
                reason: "expected `emotion: word, word, ...`".into(),
            })?;
            let emotion: EmotionLabel = label.parse().map_err(|_| FeatureError::Lexicon {
                line: line_no,
                reason: format!("unknown emotion `{}`", label.trim()),
            })?;
            let slot = &mut groups[emotion.index()];
            if slot.is_some() {
                return Err(FeatureError::Lexicon {
                    line: line_no,
                    reason: format!("duplicate group for {emotion}"),
                });
            }
            *slot = Some(words.split(',').map(normalize_word).filter(|w| !w.is_empty()).collect());
        }
        Ok(Lexicon {
            groups: groups.into_iter().map(Option::unwrap_or_default).collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let text = std::fs::read_to_string(path).map_err(|e| FeatureError::Lexicon {
            line: 0,
            reason: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn group(&self, emotion: EmotionLabel) -> &[String] {
        &self.groups[emotion.index()]
    }
}

/// Lowercases and strips surrounding punctuation.
pub fn normalize_word(word: &str) -> String {
    word.trim()
        .trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
        .to_lowercase()
}

/// Entry `k` is the share of transcript words that belong to group `k`.
pub fn text_features<S: AsRef<str>>(transcript: &[S], lexicon: &Lexicon) -> FeatureVector {
    let mut counts = vec![0.0; lexicon.len()];
    for word in transcript {
        let w = normalize_word(word.as_ref());
        for (k, group) in lexicon.groups.iter().enumerate() {
            if group.contains(&w) {
                counts[k] += 1.0;
            }
        }
    }
    let denom = transcript.len().max(1) as f64;
    FeatureVector(counts.into_iter().map(|c| c / denom).collect())
}
