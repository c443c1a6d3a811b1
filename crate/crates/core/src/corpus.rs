//! Labeled corpus manifests, dataset-specific label decoding and stratified splits.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::emotion::EmotionLabel;
use crate::emotion::NUM_EMOTIONS;

pub const MANIFEST_HEADER: [&str; 4] = ["filepath", "emotion", "actor_id", "dataset"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorpusError {
    #[error("line {line}: unknown emotion `{value}`")]
    UnknownEmotion { line: usize, value: String },
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("not a RAVDESS filename: `{0}`")]
    BadFilename(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetTag {
    Ravdess,
    Tess,
    Other,
}

impl DatasetTag {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetTag::Ravdess => "ravdess",
            DatasetTag::Tess => "tess",
            DatasetTag::Other => "other",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ravdess" => Some(DatasetTag::Ravdess),
            "tess" => Some(DatasetTag::Tess),
            "other" => Some(DatasetTag::Other),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ManifestEntry {
    pub filepath: PathBuf,
    pub emotion: EmotionLabel,
    pub actor_id: String,
    pub dataset: DatasetTag,
}

/// Parses manifest CSV text. Line numbers in errors are 1-based and count the header.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or(CorpusError::MalformedRow {
            line: 1,
            reason: "missing header".into(),
        })?
        .map_err(|e| CorpusError::MalformedRow {
            line: 1,
            reason: e.to_string(),
        })?;
    if header.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(CorpusError::MalformedRow {
            line: 1,
            reason: format!("header must be `{}`", MANIFEST_HEADER.join(",")),
        });
    }

    let mut entries = Vec::new();
    for record in records {
        let record = record.map_err(|e| CorpusError::MalformedRow {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 4 {
            return Err(CorpusError::MalformedRow {
                line,
                reason: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let filepath = &record[0];
        if filepath.is_empty() {
            return Err(CorpusError::MalformedRow {
                line,
                reason: "empty filepath".into(),
            });
        }
        let emotion = record[1].parse().map_err(|_| CorpusError::UnknownEmotion {
            line,
            value: record[1].to_string(),
        })?;
        let dataset = DatasetTag::parse(&record[3]).ok_or_else(|| CorpusError::MalformedRow {
            line,
            reason: format!("unknown dataset `{}`", &record[3]),
        })?;
        entries.push(ManifestEntry {
            filepath: PathBuf::from(filepath),
            emotion,
            actor_id: record[2].to_string(),
            dataset,
        });
    }
    Ok(entries)
}

/// Reads a manifest file. Relative file paths are resolved against the
/// manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut entries = parse_manifest(&text)?;
    for e in &mut entries {
        if e.filepath.is_relative() {
            e.filepath = base.join(&e.filepath);
        }
    }
    Ok(entries)
}

pub fn manifest_to_csv(entries: &[ManifestEntry]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MANIFEST_HEADER).expect("in-memory write");
    for e in entries {
        w.write_record([
            e.filepath.to_string_lossy().as_ref(),
            e.emotion.as_str(),
            e.actor_id.as_str(),
            e.dataset.as_str(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Decodes `MM-VV-EE-II-SS-RR-AA.wav`: field 3 is the emotion code 01..08
/// (neutral, calm, happy, sad, angry, fearful, disgust, surprised) and field 7
/// the actor.
pub fn decode_ravdess_filename(name: &str) -> Result<(EmotionLabel, String), CorpusError> {
    let bad = || CorpusError::BadFilename(name.to_string());
    let file = Path::new(name).file_name().and_then(|f| f.to_str()).ok_or_else(bad)?;
    let stem = file
        .strip_suffix(".wav")
        .or_else(|| file.strip_suffix(".WAV"))
        .ok_or_else(bad)?;
    let fields: Vec<&str> = stem.split('-').collect();
    if fields.len() != 7
        || !fields
            .iter()
            .all(|f| f.len() == 2 && f.bytes().all(|b| b.is_ascii_digit()))
    {
        return Err(bad());
    }
    let code: usize = fields[2].parse().map_err(|_| bad())?;
    let emotion = code.checked_sub(1).and_then(EmotionLabel::from_index).ok_or_else(bad)?;
    Ok((emotion, fields[6].to_string()))
}

/// Maps a TESS emotion name onto the canonical label set. TESS has no calm.
pub fn harmonize_tess(raw: &str) -> Result<EmotionLabel, CorpusError> {
    let key = raw.trim().to_ascii_lowercase().replace(['_', '-'], " ");
    let label = match key.as_str() {
        "anger" | "angry" => EmotionLabel::Angry,
        "disgust" => EmotionLabel::Disgust,
        "fear" => EmotionLabel::Fearful,
        "happiness" | "happy" => EmotionLabel::Happy,
        "pleasant surprise" | "ps" => EmotionLabel::Surprised,
        "sadness" | "sad" => EmotionLabel::Sad,
        "neutral" => EmotionLabel::Neutral,
        _ => {
            return Err(CorpusError::UnknownEmotion {
                line: 0,
                value: raw.to_string(),
            })
        }
    };
    Ok(label)
}

/// Per-emotion stratified split.
///
/// Each emotion's entries are shuffled with a seeded generator; emotion `e`
/// sends `floor(f * n_e)` entries to train, then the emotions with the
/// largest fractional remainders (lower canonical index on ties) get one more
/// until the train total equals `round(f * n)`.
pub fn stratified_split(
    entries: &[ManifestEntry],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<ManifestEntry>, Vec<ManifestEntry>), CorpusError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(train_fraction));
    }
    if entries.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut groups: Vec<Vec<&ManifestEntry>> = vec![Vec::new(); NUM_EMOTIONS];
    for e in entries {
        groups[e.emotion.index()].push(e);
    }

    let mut quota: Vec<usize> = groups
        .iter()
        .map(|g| (train_fraction * g.len() as f64).floor() as usize)
        .collect();
    let target = (train_fraction * entries.len() as f64).round() as usize;
    let mut by_remainder: Vec<usize> = (0..NUM_EMOTIONS).collect();
    let remainder = |i: usize| train_fraction * groups[i].len() as f64 - quota[i] as f64;
    let rems: Vec<f64> = (0..NUM_EMOTIONS).map(remainder).collect();
    by_remainder.sort_by(|a, b| rems[*b].total_cmp(&rems[*a]).then(a.cmp(b)));
    let mut assigned: usize = quota.iter().sum();
    for i in by_remainder.iter().copied().cycle().take(NUM_EMOTIONS * 2) {
        if assigned >= target {
            break;
        }
        if quota[i] < groups[i].len() {
            quota[i] += 1;
            assigned += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(target);
    let mut test = Vec::with_capacity(entries.len() - target);
    for (group, q) in groups.iter_mut().zip(&quota) {
        group.shuffle(&mut rng);
        train.extend(group[..*q].iter().map(|e| (*e).clone()));
        test.extend(group[*q..].iter().map(|e| (*e).clone()));
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_row() {
        let entries = parse_manifest("filepath,emotion,actor_id,dataset\na.wav,happy,01,ravdess\n").unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].emotion, EmotionLabel::Happy);
        assert_eq!(entries[0].actor_id, "01");
        assert_eq!(entries[0].dataset, DatasetTag::Ravdess);
    }

    #[test]
    fn manifest_errors_report_lines() {
        let err = parse_manifest("filepath,emotion,actor_id,dataset\nb.wav,sad,02,tess\na.wav,joyful,01,ravdess\n")
            .unwrap_err();
        assert_eq!(
            err,
            CorpusError::UnknownEmotion {
                line: 3,
                value: "joyful".into()
            }
        );
        let err = parse_manifest("filepath,emotion,actor_id,dataset\na.wav,happy\n").unwrap_err();
        assert!(matches!(err, CorpusError::MalformedRow { line: 2, .. }));
        assert!(matches!(
            parse_manifest("path,emotion\n").unwrap_err(),
            CorpusError::MalformedRow { line: 1, .. }
        ));
    }

    #[test]
    fn manifest_case_insensitive_emotions() {
        let entries = parse_manifest("filepath,emotion,actor_id,dataset\nx.wav,SURPRISED,7,other\n").unwrap();
        assert_eq!(entries[0].emotion, EmotionLabel::Surprised);
    }

    #[test]
    fn csv_round_trip() {
        let text = "filepath,emotion,actor_id,dataset\na.wav,happy,01,ravdess\nb c.wav,calm,02,other\n";
        let entries = parse_manifest(text).unwrap();
        assert_eq!(parse_manifest(&manifest_to_csv(&entries)).unwrap(), entries);
    }

    #[test]
    fn ravdess_names() {
        assert_eq!(
            decode_ravdess_filename("03-01-05-01-01-01-12.wav").unwrap(),
            (EmotionLabel::Angry, "12".to_string())
        );
        assert_eq!(
            decode_ravdess_filename("03-01-01-01-01-01-01.wav").unwrap(),
            (EmotionLabel::Neutral, "01".to_string())
        );
        assert_eq!(
            decode_ravdess_filename("Actor_08/03-01-08-02-02-01-08.wav").unwrap(),
            (EmotionLabel::Surprised, "08".to_string())
        );
        for bad in [
            "not-a-ravdess-name.wav",
            "03-01-09-01-01-01-12.wav",
            "03-01-00-01-01-01-12.wav",
            "03-01-05-01-01-01.wav",
            "03-01-05-01-01-01-12.mp3",
        ] {
            assert!(
                matches!(decode_ravdess_filename(bad), Err(CorpusError::BadFilename(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn tess_harmonization() {
        assert_eq!(harmonize_tess("pleasant surprise").unwrap(), EmotionLabel::Surprised);
        assert_eq!(harmonize_tess("neutral").unwrap(), EmotionLabel::Neutral);
        assert_eq!(harmonize_tess("Anger").unwrap(), EmotionLabel::Angry);
        assert_eq!(harmonize_tess("fear").unwrap(), EmotionLabel::Fearful);
        assert!(matches!(
            harmonize_tess("calm"),
            Err(CorpusError::UnknownEmotion { .. })
        ));
    }

    fn synthetic(per_emotion: usize) -> Vec<ManifestEntry> {
        EmotionLabel::ALL
            .iter()
            .flat_map(|e| {
                (0..per_emotion).map(move |i| ManifestEntry {
                    filepath: PathBuf::from(format!("{e}-{i}.wav")),
                    emotion: *e,
                    actor_id: format!("{:02}", i % 24 + 1),
                    dataset: DatasetTag::Other,
                })
            })
            .collect()
    }

    #[test]
    fn single_emotion_split() {
        let entries: Vec<_> = synthetic(10)
            .into_iter()
            .filter(|e| e.emotion == EmotionLabel::Sad)
            .collect();
        let (train, test) = stratified_split(&entries, 0.7, 1).unwrap();
        assert_eq!((train.len(), test.len()), (7, 3));
    }

    #[test]
    fn remainders_fill_to_rounded_total() {
        // 8 emotions x 3 entries, 0.5 -> floors of 1 each (8), target 12
        let (train, test) = stratified_split(&synthetic(3), 0.5, 9).unwrap();
        assert_eq!(train.len(), 12);
        assert_eq!(test.len(), 12);
        for e in EmotionLabel::ALL {
            let n = train.iter().filter(|x| x.emotion == e).count();
            assert!(n == 1 || n == 2);
        }
    }

    #[test]
    fn split_errors() {
        assert_eq!(stratified_split(&[], 0.7, 0).unwrap_err(), CorpusError::EmptyCorpus);
        assert!(matches!(
            stratified_split(&synthetic(2), 1.0, 0),
            Err(CorpusError::InvalidFraction(_))
        ));
        assert!(matches!(
            stratified_split(&synthetic(2), 0.0, 0),
            Err(CorpusError::InvalidFraction(_))
        ));
    }
}
