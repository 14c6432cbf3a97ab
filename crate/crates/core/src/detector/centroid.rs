//! Nearest-centroid scoring on coarse colour layout.
//!
//! Each image is reduced to the mean RGB of a 4x4 grid of blocks (48 values
//! on the 0..=255 scale). Class probabilities are a softmax over negative
//! Euclidean distances to per-class centroids, temperature 1.

use std::path::Path;

use image::RgbImage;

use super::ScoreBackend;
use crate::error::{Error, IoContext, Result};

const GRID: u32 = 4;
pub const FEATURE_DIMS: usize = (GRID * GRID * 3) as usize;

pub type Features = [f64; FEATURE_DIMS];

/// Mean colour per block, row-major over the 4x4 grid, RGB interleaved.
pub fn block_features(img: &RgbImage) -> Features {
    let (w, h) = img.dimensions();
    let mut f = [0.0; FEATURE_DIMS];
    for by in 0..GRID {
        let (y0, y1) = (by * h / GRID, ((by + 1) * h / GRID).max(by * h / GRID + 1).min(h));
        for bx in 0..GRID {
            let (x0, x1) = (bx * w / GRID, ((bx + 1) * w / GRID).max(bx * w / GRID + 1).min(w));
            let mut sum = [0u64; 3];
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = img.get_pixel(x, y).0;
                    for c in 0..3 {
                        sum[c] += p[c] as u64;
                    }
                }
            }
            let n = ((x1 - x0) * (y1 - y0)).max(1) as f64;
            let base = ((by * GRID + bx) * 3) as usize;
            for c in 0..3 {
                f[base + c] = sum[c] as f64 / n;
            }
        }
    }
    f
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidModel {
    labels: Vec<String>,
    centroids: Vec<Features>,
}

impl CentroidModel {
    pub fn new(labels: Vec<String>, centroids: Vec<Features>) -> Result<Self> {
        if labels.is_empty() || labels.len() != centroids.len() {
            return Err(Error::Validation(format!(
                "{} labels for {} centroids",
                labels.len(),
                centroids.len()
            )));
        }
        Ok(Self { labels, centroids })
    }

    /// Average the features of labelled example images. Labels keep their
    /// first-seen order.
    pub fn fit<'a>(examples: impl IntoIterator<Item = (&'a str, &'a RgbImage)>) -> Result<Self> {
        let mut labels: Vec<String> = Vec::new();
        let mut sums: Vec<(Features, usize)> = Vec::new();
        for (label, img) in examples {
            let f = block_features(img);
            let k = match labels.iter().position(|l| l == label) {
                Some(k) => k,
                None => {
                    labels.push(label.to_string());
                    sums.push(([0.0; FEATURE_DIMS], 0));
                    labels.len() - 1
                }
            };
            for (acc, v) in sums[k].0.iter_mut().zip(f) {
                *acc += v;
            }
            sums[k].1 += 1;
        }
        let centroids = sums
            .into_iter()
            .map(|(s, n)| s.map(|v| v / n as f64))
            .collect();
        Self::new(labels, centroids)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probabilities(&self, img: &RgbImage) -> Vec<f64> {
        let f = block_features(img);
        let neg_dist: Vec<f64> = self
            .centroids
            .iter()
            .map(|c| -c.iter().zip(&f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .collect();
        let max = neg_dist.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = neg_dist.iter().map(|d| (d - max).exp()).collect();
        let z: f64 = exp.iter().sum();
        exp.into_iter().map(|e| e / z).collect()
    }

    /// CSV with header `label,f0,...,f47`.
    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).at(path)?;
        Self::read(f)
    }

    pub fn read(input: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut labels = Vec::new();
        let mut centroids = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 1;
            let rec = rec.map_err(|e| Error::Format {
                line,
                message: e.to_string(),
            })?;
            if i == 0 && rec.get(0) == Some("label") {
                continue;
            }
            if rec.len() != FEATURE_DIMS + 1 {
                return Err(Error::Format {
                    line,
                    message: format!("expected {} fields, found {}", FEATURE_DIMS + 1, rec.len()),
                });
            }
            let mut c = [0.0; FEATURE_DIMS];
            for (slot, v) in c.iter_mut().zip(rec.iter().skip(1)) {
                *slot = v.parse().map_err(|_| Error::Format {
                    line,
                    message: format!("bad feature value {v:?}"),
                })?;
            }
            labels.push(rec[0].to_string());
            centroids.push(c);
        }
        Self::new(labels, centroids)
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).at(path)?;
        let mut w = csv::Writer::from_writer(f);
        let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
        let mut header = vec!["label".to_string()];
        header.extend((0..FEATURE_DIMS).map(|i| format!("f{i}")));
        w.write_record(&header).map_err(io)?;
        for (label, c) in self.labels.iter().zip(&self.centroids) {
            let mut rec = vec![label.clone()];
            rec.extend(c.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().at(path)
    }
}

#[derive(Debug, Clone)]
pub struct CentroidBackend {
    model: CentroidModel,
}

impl CentroidBackend {
    pub fn new(model: CentroidModel) -> Self {
        Self { model }
    }
}

impl ScoreBackend for CentroidBackend {
    fn id(&self) -> String {
        "centroid".into()
    }

    fn labels(&self) -> &[String] {
        self.model.labels()
    }

    fn score_batch(&self, _first_index: u64, images: &[RgbImage]) -> Result<Vec<Vec<f64>>> {
        Ok(images.iter().map(|img| self.model.probabilities(img)).collect())
    }
}
