//! Event scoring and thresholded detection over thumbnails.
//!
//! Scoring is delegated to a [`ScoreBackend`]; detection itself is a plain
//! filter over the resulting probability table.

mod backend;
mod centroid;
mod exec;

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::packager::Genre;

pub use backend::{ScoreBackend, ScorefileBackend};
pub use centroid::{block_features, CentroidBackend, CentroidModel, FEATURE_DIMS};
pub use exec::{ExecBackend, ScoreRequest, ScoreResponse};

/// Allowed deviation of a probability row's sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub thumb_index: u64,
    pub probs: Vec<f64>,
}

/// Class probabilities per thumbnail, columns in `class_labels` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionTable {
    class_labels: Vec<String>,
    rows: Vec<ScoreRow>,
}

impl DetectionTable {
    pub fn new(class_labels: Vec<String>, rows: Vec<ScoreRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for label in &class_labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::Validation(format!("duplicate class label {label:?}")));
            }
        }
        let mut indices = HashSet::new();
        for row in &rows {
            check_row(row, class_labels.len()).map_err(Error::Validation)?;
            if !indices.insert(row.thumb_index) {
                return Err(Error::Validation(format!(
                    "duplicate row for thumbnail {}",
                    row.thumb_index
                )));
            }
        }
        Ok(Self { class_labels, rows })
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.class_labels.iter().position(|l| l == label)
    }

    /// Row count and indices must fit a title of `total_thumbs` thumbnails.
    pub fn check_against(&self, total_thumbs: u64) -> Result<()> {
        if self.rows.len() as u64 > total_thumbs {
            return Err(Error::Validation(format!(
                "{} score rows for a title with {total_thumbs} thumbnails",
                self.rows.len()
            )));
        }
        if let Some(r) = self.rows.iter().find(|r| r.thumb_index >= total_thumbs) {
            return Err(Error::Validation(format!(
                "score row for thumbnail {} beyond the title's {total_thumbs}",
                r.thumb_index
            )));
        }
        Ok(())
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["thumb_index".to_string()];
        header.extend(self.class_labels.iter().cloned());
        w.write_record(&header).map_err(csv_io)?;
        for row in &self.rows {
            let mut rec = vec![row.thumb_index.to_string()];
            rec.extend(row.probs.iter().map(|p| p.to_string()));
            w.write_record(&rec).map_err(csv_io)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn store_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).at(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::io("<csv>", std::io::Error::other(e))
}

fn check_row(row: &ScoreRow, width: usize) -> std::result::Result<(), String> {
    if row.probs.len() != width {
        return Err(format!(
            "row for thumbnail {} has {} scores, expected {width}",
            row.thumb_index,
            row.probs.len()
        ));
    }
    if let Some(p) = row.probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(format!(
            "row for thumbnail {} has probability {p} outside [0, 1]",
            row.thumb_index
        ));
    }
    let sum: f64 = row.probs.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(format!(
            "row for thumbnail {} sums to {sum}, not 1",
            row.thumb_index
        ));
    }
    Ok(())
}

/// Read a scorefile: header `thumb_index,<label>,...`, one row per thumbnail.
/// Columns may appear in any order but must name exactly `expected_labels`;
/// the table comes back in `expected_labels` order.
pub fn load_scorefile(path: &Path, expected_labels: &[String]) -> Result<DetectionTable> {
    let f = std::fs::File::open(path).at(path)?;
    read_scorefile(f, expected_labels)
}

pub fn read_scorefile(input: impl std::io::Read, expected_labels: &[String]) -> Result<DetectionTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_format(&e, 1))?,
        None => {
            return Err(Error::Format {
                line: 1,
                message: "empty scorefile".into(),
            })
        }
    };
    if header.get(0) != Some("thumb_index") {
        return Err(Error::Format {
            line: 1,
            message: "first column must be thumb_index".into(),
        });
    }
    let columns: Vec<&str> = header.iter().skip(1).collect();
    let mut column_of = Vec::with_capacity(expected_labels.len());
    for label in expected_labels {
        match columns.iter().position(|c| c == label) {
            Some(c) => column_of.push(c),
            None => {
                return Err(Error::Format {
                    line: 1,
                    message: format!("missing label column {label:?}"),
                })
            }
        }
    }
    if let Some(extra) = columns.iter().find(|c| !expected_labels.iter().any(|l| l == *c)) {
        return Err(Error::Format {
            line: 1,
            message: format!("unknown label {extra:?}"),
        });
    }
    if columns.len() != expected_labels.len() {
        return Err(Error::Format {
            line: 1,
            message: "duplicate label column".into(),
        });
    }

    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_format(&e, line))?;
        let bad = |message: String| Error::Format { line, message };
        if rec.len() != columns.len() + 1 {
            return Err(bad(format!("expected {} fields, found {}", columns.len() + 1, rec.len())));
        }
        let thumb_index: u64 = rec[0]
            .parse()
            .map_err(|_| bad(format!("bad thumb_index {:?}", &rec[0])))?;
        if !seen.insert(thumb_index) {
            return Err(bad(format!("duplicate thumb_index {thumb_index}")));
        }
        let raw: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|_| bad(format!("bad probability {v:?}"))))
            .collect::<Result<_>>()?;
        let row = ScoreRow {
            thumb_index,
            probs: column_of.iter().map(|&c| raw[c]).collect(),
        };
        check_row(&row, expected_labels.len()).map_err(bad)?;
        rows.push(row);
    }
    DetectionTable::new(expected_labels.to_vec(), rows)
}

fn csv_format(e: &csv::Error, line: usize) -> Error {
    Error::Format {
        line: e.position().map_or(line, |p| p.line() as usize),
        message: e.to_string(),
    }
}

/// Score `images` (thumbnail `first_index`, `first_index + 1`, ...) and
/// validate the backend's output into a table.
pub fn score_batch(
    backend: &dyn ScoreBackend,
    first_index: u64,
    images: &[RgbImage],
) -> Result<DetectionTable> {
    let probs = backend.score_batch(first_index, images)?;
    if probs.len() != images.len() {
        return Err(crate::BackendError::Crashed(format!(
            "backend returned {} rows for {} images",
            probs.len(),
            images.len()
        ))
        .into());
    }
    let rows = probs
        .into_iter()
        .enumerate()
        .map(|(i, probs)| ScoreRow {
            thumb_index: first_index + i as u64,
            probs,
        })
        .collect();
    DetectionTable::new(backend.labels().to_vec(), rows)
}

/// Minimum preferred-event probability for a thumbnail to count as a hit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub western: f64,
    pub action: f64,
    pub sport_cricket: f64,
    pub sport_soccer: f64,
    pub other: f64,
    pub override_threshold: Option<f64>,
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        Self {
            western: 0.95,
            action: 0.65,
            sport_cricket: 0.80,
            sport_soccer: 0.90,
            other: 0.90,
            override_threshold: None,
        }
    }
}

impl ThresholdPolicy {
    pub fn with_override(threshold: Option<f64>) -> Self {
        Self {
            override_threshold: threshold,
            ..Self::default()
        }
    }

    pub fn threshold_for(&self, genre: Genre) -> Result<f64> {
        let t = self.override_threshold.unwrap_or(match genre {
            Genre::Western => self.western,
            Genre::Action => self.action,
            Genre::SportCricket => self.sport_cricket,
            Genre::SportSoccer => self.sport_soccer,
            Genre::Other => self.other,
        });
        validate_threshold(t)?;
        Ok(t)
    }
}

pub fn validate_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(Error::Usage(format!("threshold {t} outside (0, 1]")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub thumb_index: u64,
    pub best_event: String,
    pub score: f64,
}

/// Keep thumbnails whose best preferred-event probability reaches
/// `threshold` (inclusive). Ties go to the label listed first in the table.
pub fn detect(table: &DetectionTable, preferred: &[String], threshold: f64) -> Result<Vec<DetectionRecord>> {
    validate_threshold(threshold)?;
    let columns = preferred_columns(table.class_labels(), preferred)?;
    let mut out = Vec::new();
    for row in table.rows() {
        let mut best: Option<(usize, f64)> = None;
        for &c in &columns {
            let p = row.probs[c];
            if best.is_none_or(|(bc, bp)| p > bp || (p == bp && c < bc)) {
                best = Some((c, p));
            }
        }
        if let Some((c, p)) = best.filter(|&(_, p)| p >= threshold) {
            out.push(DetectionRecord {
                thumb_index: row.thumb_index,
                best_event: table.class_labels()[c].clone(),
                score: p,
            });
        }
    }
    out.sort_by_key(|d| d.thumb_index);
    Ok(out)
}

/// Column indices of the preferred events, in vocabulary order.
pub fn preferred_columns(labels: &[String], preferred: &[String]) -> Result<Vec<usize>> {
    if preferred.is_empty() {
        return Err(Error::Usage("at least one preferred event is required".into()));
    }
    if let Some(unknown) = preferred.iter().find(|p| !labels.contains(p)) {
        return Err(Error::Usage(format!(
            "unknown event {unknown:?}; available: {}",
            labels.join(", ")
        )));
    }
    Ok((0..labels.len()).filter(|&c| preferred.contains(&labels[c])).collect())
}

/// The chronological hit list: `thumb_index,best_event,score` per line.
pub fn write_detections(records: &[DetectionRecord], mut out: impl Write) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{},{},{}", r.thumb_index, r.best_event, r.score)?;
    }
    Ok(())
}
