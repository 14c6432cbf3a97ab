#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::{Rgb, RgbImage};
use ltcsum_core::detector::{CentroidBackend, CentroidModel, DetectionRecord, DetectionTable, ScoreBackend};
use ltcsum_core::packager::synthetic::SYNTH_SUFFIX;
use ltcsum_core::packager::{package, PackOptions, PackReport, SyntheticSource};
use ltcsum_core::{Genre, SegmentTimeline};

pub const RED: [u8; 3] = [220, 30, 30];
pub const GREEN: [u8; 3] = [30, 200, 40];
pub const BLUE: [u8; 3] = [30, 40, 210];
pub const BACKGROUND: [u8; 3] = [48, 48, 48];

/// 300 s at 25 fps: horse-riding at seconds 45..=48 and 120..=123, archery
/// (not requested in most tests) at 200..=202.
pub fn planted_source() -> SyntheticSource {
    SyntheticSource::new(300.0, 25.0)
        .with_event(45, 49, RED, "horse-riding")
        .with_event(120, 124, RED, "horse-riding")
        .with_event(200, 203, GREEN, "archery")
}

pub fn write_source(dir: &Path, video_id: &str, source: &SyntheticSource) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let path = dir.join(format!("{video_id}{SYNTH_SUFFIX}"));
    source.store(&path).unwrap();
    path
}

/// Package `source` as a western title under `root/<video_id>`.
pub fn package_title(root: &Path, video_id: &str, source: &SyntheticSource) -> PackReport {
    let src = write_source(&root.join("_sources"), video_id, source);
    let mut opts = PackOptions::new(src, root, video_id);
    opts.info.genre = Genre::Western;
    opts.info.title = format!("Synthetic {video_id}");
    package(&opts).unwrap()
}

fn solid(c: [u8; 3]) -> RgbImage {
    RgbImage::from_pixel(160, 90, Rgb(c))
}

/// Centroids fitted on flat colour swatches, independent of the fixtures.
pub fn colour_backend() -> Arc<dyn ScoreBackend> {
    let (red, green, blue, grey) = (solid(RED), solid(GREEN), solid(BLUE), solid(BACKGROUND));
    let model = CentroidModel::fit([
        ("horse-riding", &red),
        ("archery", &green),
        ("punch", &blue),
        ("background", &grey),
    ])
    .unwrap();
    Arc::new(CentroidBackend::new(model))
}

/// Linear-scan segment lookup over explicit interval bounds.
pub fn linear_segment(durations: &[f64], t: f64) -> Option<usize> {
    let mut start = 0.0;
    for (i, d) in durations.iter().enumerate() {
        let end = start + d;
        if start <= t && t < end {
            return Some(i);
        }
        start = end;
    }
    None
}

/// Mark every segment whose interval meets the closed span `[s, s + 1]` of a
/// detected second.
pub fn brute_force_plan(durations: &[f64], detected_seconds: &[u64], pad: usize) -> BTreeSet<usize> {
    let mut starts = Vec::with_capacity(durations.len());
    let mut acc = 0.0;
    for d in durations {
        starts.push(acc);
        acc += d;
    }
    let mut hit = vec![false; durations.len()];
    for &s in detected_seconds {
        let t0 = s as f64;
        let t1 = t0 + 1.0;
        for (i, slot) in hit.iter_mut().enumerate() {
            let end = starts[i] + durations[i];
            if starts[i] <= t1 && end > t0 {
                *slot = true;
            }
        }
    }
    let n = durations.len();
    let mut out = BTreeSet::new();
    for i in (0..n).filter(|&i| hit[i]) {
        for j in i.saturating_sub(pad)..=(i + pad).min(n - 1) {
            out.insert(j);
        }
    }
    out
}

/// Planted seconds carrying one of `labels`.
pub fn planted_seconds(source: &SyntheticSource, labels: &[&str]) -> Vec<u64> {
    let mut s: Vec<u64> = source
        .events
        .iter()
        .filter(|e| e.label.as_deref().is_some_and(|l| labels.contains(&l)))
        .flat_map(|e| e.start..e.end)
        .collect();
    s.sort_unstable();
    s.dedup();
    s
}

pub fn timeline_of(durations: &[f64]) -> SegmentTimeline {
    SegmentTimeline::new(durations.to_vec()).unwrap()
}

/// Straight scan: best preferred column per row, first column wins ties.
pub fn detect_oracle(table: &DetectionTable, preferred: &[String], threshold: f64) -> Vec<DetectionRecord> {
    let mut out = Vec::new();
    for row in table.rows() {
        let mut best: Option<(usize, f64)> = None;
        for (c, label) in table.class_labels().iter().enumerate() {
            if !preferred.contains(label) {
                continue;
            }
            let p = row.probs[c];
            match best {
                Some((_, bp)) if p <= bp => {}
                _ => best = Some((c, p)),
            }
        }
        let (c, p) = best.unwrap();
        if p >= threshold {
            out.push(DetectionRecord {
                thumb_index: row.thumb_index,
                best_event: table.class_labels()[c].clone(),
                score: p,
            });
        }
    }
    out
}
