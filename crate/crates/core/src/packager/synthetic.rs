//! Procedural sources: a JSON description of a title whose frames are
//! rendered in-process. Used where no transcoder is available and as the
//! ground truth for planted-event tests.

use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::ts::{TsWriter, PTS_OFFSET};
use super::ProbeInfo;
use crate::error::{Error, IoContext, Result};
use crate::mapping::ThumbGeometry;

pub const SYNTH_SUFFIX: &str = ".synth.json";

/// A span of whole seconds `[start, end)` painted in one colour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEvent {
    pub start: u64,
    pub end: u64,
    pub color: [u8; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSource {
    pub duration: f64,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub background: [u8; 3],
    #[serde(default)]
    pub events: Vec<PlantedEvent>,
}

impl SyntheticSource {
    pub fn new(duration: f64, fps: f64) -> Self {
        Self {
            duration,
            fps,
            width: 320,
            height: 180,
            background: [48, 48, 48],
            events: Vec::new(),
        }
    }

    pub fn with_event(mut self, start: u64, end: u64, color: [u8; 3], label: &str) -> Self {
        self.events.push(PlantedEvent {
            start,
            end,
            color,
            label: Some(label.to_string()),
        });
        self
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        let src: Self = serde_json::from_str(&text)?;
        src.validate()?;
        Ok(src)
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).at(path)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Validation(format!("bad duration {}", self.duration)));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Validation(format!("bad fps {}", self.fps)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Validation("zero frame size".into()));
        }
        Ok(())
    }

    pub fn probe(&self) -> ProbeInfo {
        ProbeInfo {
            duration: self.duration,
            fps: self.fps,
            width: self.width,
            height: self.height,
        }
    }

    pub fn frame_count(&self) -> u64 {
        (self.duration * self.fps - 1e-9).ceil().max(1.0) as u64
    }

    pub fn frame_time(&self, index: u64) -> f64 {
        index as f64 / self.fps
    }

    /// Seconds covered by planted events, in ascending order.
    pub fn event_seconds(&self) -> Vec<u64> {
        let mut s: Vec<u64> = self.events.iter().flat_map(|e| e.start..e.end).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    fn color_at_second(&self, second: u64) -> [u8; 3] {
        self.events
            .iter()
            .rev()
            .find(|e| (e.start..e.end).contains(&second))
            .map_or(self.background, |e| e.color)
    }

    /// Render frame `index`: the second's base colour with a faint moving
    /// diagonal texture.
    pub fn render_frame(&self, index: u64) -> RgbImage {
        let second = self.frame_time(index).floor() as u64;
        let base = self.color_at_second(second);
        let phase = (index % 16) as u32;
        RgbImage::from_fn(self.width, self.height, |x, y| {
            let d = ((x + y + 2 * phase) % 16) as i16 - 8;
            Rgb(base.map(|c| (c as i16 + d / 2).clamp(0, 255) as u8))
        })
    }

    /// Index of the first frame whose timestamp is at or after `second`.
    pub fn first_frame_of_second(&self, second: u64) -> u64 {
        let idx = (second as f64 * self.fps - 1e-9).ceil().max(0.0) as u64;
        idx.min(self.frame_count() - 1)
    }

    pub fn thumbnails(&self, geom: &ThumbGeometry) -> Vec<RgbImage> {
        let n = geom.thumbs_for_duration(self.duration);
        (0..n)
            .map(|k| {
                let second = (k as f64 * geom.seconds_per_thumb).floor() as u64;
                let frame = self.render_frame(self.first_frame_of_second(second));
                image::imageops::resize(&frame, geom.tile_width, geom.tile_height, FilterType::Triangle)
            })
            .collect()
    }

    /// Segment boundaries on a `target` grid; the last segment takes the remainder.
    pub fn segment_durations(&self, target: f64) -> Vec<f64> {
        let n = (self.duration / target - 1e-9).ceil().max(1.0) as usize;
        (0..n)
            .map(|j| self.duration.min((j + 1) as f64 * target) - j as f64 * target)
            .collect()
    }

    /// Write transport-stream segments, one PES per frame carrying the frame
    /// index and its base colour. Returns the segment paths and durations.
    pub fn write_segments(
        &self,
        dir: &Path,
        target: f64,
        name: impl Fn(usize) -> String,
    ) -> Result<Vec<(PathBuf, f64)>> {
        let durations = self.segment_durations(target);
        let mut writer = TsWriter::new();
        let total = self.frame_count();
        let mut frame = 0u64;
        let mut out = Vec::with_capacity(durations.len());
        let mut seg_start = 0.0;
        for (j, &d) in durations.iter().enumerate() {
            let seg_end = seg_start + d;
            let mut bytes = Vec::new();
            writer.write_tables(&mut bytes);
            while frame < total && (self.frame_time(frame) < seg_end || j + 1 == durations.len()) {
                let second = self.frame_time(frame).floor() as u64;
                let mut payload = b"LTCF".to_vec();
                payload.extend_from_slice(&(frame as u32).to_be_bytes());
                payload.extend_from_slice(&self.color_at_second(second));
                let pts = PTS_OFFSET + (self.frame_time(frame) * 90_000.0).round() as u64;
                writer.write_frame(&mut bytes, pts, &payload)?;
                frame += 1;
            }
            let path = dir.join(name(j));
            std::fs::write(&path, &bytes).at(&path)?;
            out.push((path, d));
            seg_start = seg_end;
        }
        Ok(out)
    }
}

pub fn is_synthetic_path(path: &Path) -> bool {
    path.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.ends_with(SYNTH_SUFFIX))
}
