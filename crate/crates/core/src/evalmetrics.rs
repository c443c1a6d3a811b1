//! Confusion matrices and the per-emotion detection error report.
//!
//! A "detection" of emotion `e` is a prediction of `e`. The error of `e` is
//! the share of its detections whose true label differs, i.e. the false
//! discovery rate `(column_sum - diagonal) / column_sum`. It is undefined
//! when `e` was never predicted.

use serde::Serialize;
use thiserror::Error;

use crate::emotion::{EmotionLabel, NUM_EMOTIONS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("{predictions} predictions but {truths} truths")]
    LengthMismatch { predictions: usize, truths: usize },
}

/// Rows are true emotions, columns predicted emotions, both in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_EMOTIONS]; NUM_EMOTIONS],
}

impl ConfusionMatrix {
    pub fn get(&self, truth: EmotionLabel, predicted: EmotionLabel) -> u64 {
        self.counts[truth.index()][predicted.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Number of times `e` was predicted.
    pub fn detections(&self, e: EmotionLabel) -> u64 {
        self.counts.iter().map(|row| row[e.index()]).sum()
    }

    pub fn false_detections(&self, e: EmotionLabel) -> u64 {
        self.detections(e) - self.get(e, e)
    }

    pub fn correct(&self) -> u64 {
        (0..NUM_EMOTIONS).map(|i| self.counts[i][i]).sum()
    }

    /// Overall top-1 accuracy, `None` for an empty matrix.
    pub fn overall_accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.correct() as f64 / total as f64)
    }

    /// Plain-text dump for debugging.
    pub fn render(&self) -> String {
        let mut out = String::from("truth\\pred");
        for e in EmotionLabel::ALL {
            out.push('\t');
            out.push_str(e.as_str());
        }
        out.push('\n');
        for t in EmotionLabel::ALL {
            out.push_str(t.as_str());
            for p in EmotionLabel::ALL {
                out.push_str(&format!("\t{}", self.get(t, p)));
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion(predictions: &[EmotionLabel], truths: &[EmotionLabel]) -> Result<ConfusionMatrix, MetricsError> {
    if predictions.len() != truths.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    let mut m = ConfusionMatrix::default();
    for (p, t) in predictions.iter().zip(truths) {
        m.counts[t.index()][p.index()] += 1;
    }
    Ok(m)
}

/// Per-emotion error, `None` where the emotion was never detected.
pub type EmotionRates = [Option<f64>; NUM_EMOTIONS];

pub fn per_emotion_error(m: &ConfusionMatrix) -> EmotionRates {
    EmotionLabel::ALL.map(|e| {
        let detections = m.detections(e);
        (detections > 0).then(|| m.false_detections(e) as f64 / detections as f64)
    })
}

pub fn accuracy(m: &ConfusionMatrix) -> EmotionRates {
    per_emotion_error(m).map(|err| err.map(|e| 1.0 - e))
}

/// Rounds a rate to an integer percentage, half away from zero. The small
/// bias absorbs binary representation error (0.285 * 100 = 28.4999...).
pub fn percent(rate: f64) -> i64 {
    (rate * 100.0 + 0.5 + 1e-9).floor() as i64
}

pub const UNDEFINED_MARK: &str = "—";

fn cell(rate: Option<f64>) -> String {
    rate.map_or_else(|| UNDEFINED_MARK.to_string(), |r| percent(r).to_string())
}

/// Tab-separated error table: header, then one row per emotion in canonical order.
pub fn render_error_table(dnn: &EmotionRates, cnn: &EmotionRates) -> String {
    let mut out = String::from("Emotion\tDNN (Err %)\tCNN (Err %)\n");
    for e in EmotionLabel::ALL {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            e.title(),
            cell(dnn[e.index()]),
            cell(cnn[e.index()])
        ));
    }
    out
}

/// `emotion,dnn_err,cnn_err` with rates as fractions; undefined is an empty field.
pub fn render_error_csv(dnn: &EmotionRates, cnn: &EmotionRates) -> String {
    let field = |r: Option<f64>| r.map_or_else(String::new, |v| v.to_string());
    let mut out = String::from("emotion,dnn_err,cnn_err\n");
    for e in EmotionLabel::ALL {
        out.push_str(&format!(
            "{},{},{}\n",
            e.as_str(),
            field(dnn[e.index()]),
            field(cnn[e.index()])
        ));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
struct ReportRow {
    emotion: EmotionLabel,
    dnn_err: Option<f64>,
    cnn_err: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct Report {
    schema_version: u32,
    rows: Vec<ReportRow>,
}

/// JSON form of the error report; undefined rates are `null`.
pub fn render_error_json(dnn: &EmotionRates, cnn: &EmotionRates) -> String {
    let report = Report {
        schema_version: 1,
        rows: EmotionLabel::ALL
            .iter()
            .map(|e| ReportRow {
                emotion: *e,
                dnn_err: dnn[e.index()],
                cnn_err: cnn[e.index()],
            })
            .collect(),
    };
    serde_json::to_string_pretty(&report).expect("report serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use EmotionLabel::*;

    #[test]
    fn confusion_counts() {
        let m = confusion(&[Happy, Happy, Sad], &[Happy, Sad, Sad]).unwrap();
        assert_eq!(m.get(Happy, Happy), 1);
        assert_eq!(m.get(Sad, Happy), 1);
        assert_eq!(m.get(Sad, Sad), 1);
        assert_eq!(m.total(), 3);
        assert_eq!(confusion(&[], &[]).unwrap(), ConfusionMatrix::default());
        assert!(confusion(&[Happy], &[]).is_err());
    }

    #[test]
    fn diagonal_has_zero_error() {
        let labels: Vec<_> = EmotionLabel::ALL.to_vec();
        let m = confusion(&labels, &labels).unwrap();
        assert!(per_emotion_error(&m).iter().all(|e| *e == Some(0.0)));
        assert!(accuracy(&m).iter().all(|a| *a == Some(1.0)));
    }

    #[test]
    fn ten_detections_three_wrong() {
        let mut m = ConfusionMatrix::default();
        m.counts[Angry.index()][Angry.index()] = 7;
        m.counts[Sad.index()][Angry.index()] = 2;
        m.counts[Calm.index()][Angry.index()] = 1;
        let err = per_emotion_error(&m);
        assert!((err[Angry.index()].unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(err[Neutral.index()], None);
    }

    #[test]
    fn undefined_renders_as_dash() {
        let mut dnn = [Some(0.0); 8];
        dnn[Calm.index()] = None;
        let table = render_error_table(&dnn, &[Some(0.0); 8]);
        assert!(table.contains("\nCalm\t—\t0\n"));
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(percent(0.125), 13);
        assert_eq!(percent(0.285), 29);
        assert_eq!(percent(0.23), 23);
        assert_eq!(percent(0.0449), 4);
        assert_eq!(percent(1.0), 100);
    }

    #[test]
    fn csv_and_json_forms() {
        let mut dnn = [Some(0.5); 8];
        dnn[0] = None;
        let csv = render_error_csv(&dnn, &[Some(0.25); 8]);
        assert!(csv.starts_with("emotion,dnn_err,cnn_err\nneutral,,0.25\ncalm,0.5,0.25\n"));
        let json: serde_json::Value = serde_json::from_str(&render_error_json(&dnn, &[None; 8])).unwrap();
        assert_eq!(json["rows"][0]["emotion"], "neutral");
        assert!(json["rows"][0]["dnn_err"].is_null());
        assert_eq!(json["rows"][1]["dnn_err"], 0.5);
    }
}
