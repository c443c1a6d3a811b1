//! The eight-emotion label space shared by every module.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

pub const NUM_EMOTIONS: usize = 8;

/// Canonical emotion labels. The discriminant is the canonical index used for
/// model outputs, colors and report rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionLabel {
    Neutral = 0,
    Calm = 1,
    Happy = 2,
    Sad = 3,
    Angry = 4,
    Fearful = 5,
    Disgust = 6,
    Surprised = 7,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; NUM_EMOTIONS] = [
        EmotionLabel::Neutral,
        EmotionLabel::Calm,
        EmotionLabel::Happy,
        EmotionLabel::Sad,
        EmotionLabel::Angry,
        EmotionLabel::Fearful,
        EmotionLabel::Disgust,
        EmotionLabel::Surprised,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Lowercase canonical name, as used in manifests and JSON.
    pub fn as_str(self) -> &'static str {
        match self {
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Calm => "calm",
            EmotionLabel::Happy => "happy",
            EmotionLabel::Sad => "sad",
            EmotionLabel::Angry => "angry",
            EmotionLabel::Fearful => "fearful",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Surprised => "surprised",
        }
    }

    /// Capitalized name used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            EmotionLabel::Neutral => "Neutral",
            EmotionLabel::Calm => "Calm",
            EmotionLabel::Happy => "Happy",
            EmotionLabel::Sad => "Sad",
            EmotionLabel::Angry => "Angry",
            EmotionLabel::Fearful => "Fearful",
            EmotionLabel::Disgust => "Disgust",
            EmotionLabel::Surprised => "Surprised",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown emotion `{0}`")]
pub struct UnknownEmotion(pub String);

impl FromStr for EmotionLabel {
    type Err = UnknownEmotion;

    /// Case-insensitive match against the canonical names.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let needle = s.trim();
        Self::ALL
            .iter()
            .copied()
            .find(|e| e.as_str().eq_ignore_ascii_case(needle))
            .ok_or_else(|| UnknownEmotion(s.to_string()))
    }
}

/// A subset of the label space, stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct EmotionSet(u8);

impl EmotionSet {
    pub const fn empty() -> Self {
        EmotionSet(0)
    }

    pub const fn all() -> Self {
        EmotionSet(0xFF)
    }

    pub fn insert(&mut self, e: EmotionLabel) {
        self.0 |= 1 << e.index();
    }

    pub fn remove(&mut self, e: EmotionLabel) {
        self.0 &= !(1 << e.index());
    }

    pub fn contains(self, e: EmotionLabel) -> bool {
        self.0 & (1 << e.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn intersection(self, other: EmotionSet) -> EmotionSet {
        EmotionSet(self.0 & other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = EmotionLabel> {
        EmotionLabel::ALL.into_iter().filter(move |e| self.contains(*e))
    }

    /// Parses a comma-separated list such as `happy,sad`.
    pub fn parse_list(s: &str) -> Result<Self, UnknownEmotion> {
        let mut set = EmotionSet::empty();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            set.insert(part.parse()?);
        }
        Ok(set)
    }
}

impl FromIterator<EmotionLabel> for EmotionSet {
    fn from_iter<I: IntoIterator<Item = EmotionLabel>>(iter: I) -> Self {
        let mut set = EmotionSet::empty();
        for e in iter {
            set.insert(e);
        }
        set
    }
}

impl Serialize for EmotionSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for EmotionSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let labels = Vec::<EmotionLabel>::deserialize(deserializer)?;
        Ok(labels.into_iter().collect())
    }
}

/// Probability vector over the eight emotions in canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmotionDistribution([f64; NUM_EMOTIONS]);

impl EmotionDistribution {
    /// Wraps probabilities that are already normalized. Returns `None` when an
    /// entry is negative or non-finite or the sum is off by more than 1e-6.
    pub fn new(probs: [f64; NUM_EMOTIONS]) -> Option<Self> {
        let valid = probs.iter().all(|p| p.is_finite() && *p >= 0.0);
        let sum: f64 = probs.iter().sum();
        (valid && (sum - 1.0).abs() <= 1e-6).then_some(EmotionDistribution(probs))
    }

    pub fn uniform() -> Self {
        EmotionDistribution([1.0 / NUM_EMOTIONS as f64; NUM_EMOTIONS])
    }

    pub fn probs(&self) -> &[f64; NUM_EMOTIONS] {
        &self.0
    }

    pub fn prob(&self, e: EmotionLabel) -> f64 {
        self.0[e.index()]
    }

    /// Most likely emotion; ties go to the lower canonical index.
    pub fn top(&self) -> EmotionLabel {
        let mut best = 0;
        for (i, p) in self.0.iter().enumerate().skip(1) {
            if *p > self.0[best] {
                best = i;
            }
        }
        EmotionLabel::ALL[best]
    }
}

impl Serialize for EmotionDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(NUM_EMOTIONS))?;
        for e in EmotionLabel::ALL {
            map.serialize_entry(e.as_str(), &self.0[e.index()])?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for EmotionDistribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct DistVisitor;

        impl<'de> Visitor<'de> for DistVisitor {
            type Value = EmotionDistribution;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map from emotion name to probability")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut probs = [f64::NAN; NUM_EMOTIONS];
                while let Some((key, value)) = access.next_entry::<EmotionLabel, f64>()? {
                    probs[key.index()] = value;
                }
                if probs.iter().any(|p| p.is_nan()) {
                    return Err(de::Error::custom("distribution must list all eight emotions"));
                }
                EmotionDistribution::new(probs)
                    .ok_or_else(|| de::Error::custom("entries must be nonnegative and sum to 1"))
            }
        }

        deserializer.deserialize_map(DistVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_matches_indices() {
        for (i, e) in EmotionLabel::ALL.iter().enumerate() {
            assert_eq!(e.index(), i);
            assert_eq!(EmotionLabel::from_index(i), Some(*e));
        }
        assert_eq!(EmotionLabel::from_index(8), None);
    }

    #[test]
    fn parse_is_case_insensitive() {
        assert_eq!("HaPpY".parse::<EmotionLabel>().unwrap(), EmotionLabel::Happy);
        assert!("joyful".parse::<EmotionLabel>().is_err());
    }

    #[test]
    fn top_breaks_ties_toward_lower_index() {
        assert_eq!(EmotionDistribution::uniform().top(), EmotionLabel::Neutral);
        let mut p = [0.0; 8];
        p[3] = 0.5;
        p[5] = 0.5;
        assert_eq!(EmotionDistribution::new(p).unwrap().top(), EmotionLabel::Sad);
    }

    #[test]
    fn set_parse_and_serde() {
        let set = EmotionSet::parse_list("happy, sad").unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.contains(EmotionLabel::Happy));
        let json = serde_json::to_string(&set).unwrap();
        assert_eq!(json, r#"["happy","sad"]"#);
        assert_eq!(serde_json::from_str::<EmotionSet>(&json).unwrap(), set);
    }

    #[test]
    fn distribution_json_round_trip() {
        let mut p = [0.0; 8];
        p[2] = 0.75;
        p[7] = 0.25;
        let d = EmotionDistribution::new(p).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.starts_with(r#"{"neutral":0.0"#));
        assert_eq!(serde_json::from_str::<EmotionDistribution>(&json).unwrap(), d);
    }
}
