use std::collections::HashMap;

use image::RgbImage;

use super::DetectionTable;
use crate::error::{Error, Result};

/// Anything that turns thumbnails into class-probability rows.
///
/// Implementations must be shareable across worker threads; the rows they
/// return line up one-to-one with the input images.
pub trait ScoreBackend: Send + Sync {
    /// Short identifier recorded in benchmark reports.
    fn id(&self) -> String;

    fn labels(&self) -> &[String];

    /// Score `images`, which hold thumbnails `first_index..first_index + len`.
    fn score_batch(&self, first_index: u64, images: &[RgbImage]) -> Result<Vec<Vec<f64>>>;
}

/// Replays precomputed rows by thumbnail index; pixels are ignored.
#[derive(Debug, Clone)]
pub struct ScorefileBackend {
    table: DetectionTable,
    by_index: HashMap<u64, usize>,
}

impl ScorefileBackend {
    pub fn new(table: DetectionTable) -> Self {
        let by_index = table
            .rows()
            .iter()
            .enumerate()
            .map(|(i, r)| (r.thumb_index, i))
            .collect();
        Self { table, by_index }
    }

    pub fn table(&self) -> &DetectionTable {
        &self.table
    }
}

impl ScoreBackend for ScorefileBackend {
    fn id(&self) -> String {
        "scorefile".into()
    }

    fn labels(&self) -> &[String] {
        self.table.class_labels()
    }

    fn score_batch(&self, first_index: u64, images: &[RgbImage]) -> Result<Vec<Vec<f64>>> {
        (first_index..first_index + images.len() as u64)
            .map(|idx| {
                self.by_index
                    .get(&idx)
                    .map(|&r| self.table.rows()[r].probs.clone())
                    .ok_or_else(|| Error::Validation(format!("scorefile has no row for thumbnail {idx}")))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::ScoreRow;

    #[test]
    fn scorefile_rows_pass_through() {
        let table = DetectionTable::new(
            vec!["a".into(), "b".into()],
            vec![
                ScoreRow { thumb_index: 0, probs: vec![0.1, 0.9] },
                ScoreRow { thumb_index: 1, probs: vec![0.7, 0.3] },
            ],
        )
        .unwrap();
        let backend = ScorefileBackend::new(table);
        let noise = RgbImage::from_fn(160, 90, |x, y| image::Rgb([(x * y) as u8, x as u8, y as u8]));
        let rows = backend.score_batch(0, &[noise.clone(), RgbImage::new(160, 90)]).unwrap();
        assert_eq!(rows, vec![vec![0.1, 0.9], vec![0.7, 0.3]]);
        assert!(backend.score_batch(1, &[noise.clone(), noise]).is_err());
    }
}
