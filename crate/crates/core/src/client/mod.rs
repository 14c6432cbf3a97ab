//! The summarizing client.
//!
//! Pipeline: fetch and slice every thumbnail container (extract), score the
//! thumbnails and keep preferred-event hits (recognize), map hits to
//! segments, fetch those segments (download), then write the summary
//! playlist and the optional joined stream (aggregate).

mod origin;
pub mod jobs;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::detector::{self, write_detections, DetectionRecord, ScoreBackend, ThresholdPolicy};
use crate::error::{Error, IoContext, Result};
use crate::mapping::{plan_summary, PlanOptions, SegmentTimeline, SummaryPlan};
use crate::packager::grid::slice_container;
use crate::packager::{Transcoder, VideoManifest};
use crate::playlist::{MediaPlaylist, MediaSegment};

pub use origin::OriginClient;

pub const DETECTIONS_FILE: &str = "detections.txt";
pub const SUMMARY_PLAYLIST: &str = "summary.m3u8";
pub const SUMMARY_STREAM: &str = "summary.ts";
pub const REMUX_STREAM: &str = "summary.mp4";
pub const LOCAL_SEGMENT_DIR: &str = "segments";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRequest {
    pub video_id: String,
    pub preferred_events: Vec<String>,
    #[serde(default)]
    pub threshold_override: Option<f64>,
    #[serde(default)]
    pub pad_segments: usize,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub emit_concatenated: bool,
    #[serde(default)]
    pub remux: bool,
}

impl SummaryRequest {
    pub fn new(video_id: &str, events: &[&str], output_dir: impl Into<PathBuf>) -> Self {
        Self {
            video_id: video_id.to_string(),
            preferred_events: events.iter().map(|e| e.to_string()).collect(),
            threshold_override: None,
            pad_segments: 0,
            output_dir: output_dir.into(),
            emit_concatenated: false,
            remux: false,
        }
    }

    /// Check the request against the title it names.
    pub fn validate(&self, manifest: &VideoManifest) -> Result<()> {
        if self.video_id != manifest.video_id {
            return Err(Error::Usage(format!(
                "request names {:?} but the manifest is {:?}",
                self.video_id, manifest.video_id
            )));
        }
        if self.preferred_events.is_empty() {
            return Err(Error::Usage("at least one preferred event is required".into()));
        }
        if let Some(unknown) = self
            .preferred_events
            .iter()
            .find(|e| !manifest.event_vocabulary.contains(e))
        {
            return Err(Error::Usage(format!(
                "event {unknown:?} is not in the vocabulary of {}: {}",
                manifest.video_id,
                manifest.event_vocabulary.join(", ")
            )));
        }
        if let Some(t) = self.threshold_override {
            detector::validate_threshold(t)?;
        }
        Ok(())
    }
}

/// Wall-clock seconds per pipeline phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTimings {
    pub extract: f64,
    pub recognize: f64,
    pub download_segments: f64,
    pub aggregate: f64,
    pub total: f64,
}

impl StepTimings {
    pub fn phase_sum(&self) -> f64 {
        self.extract + self.recognize + self.download_segments + self.aggregate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Extract,
    Recognize,
    Plan,
    Download,
    Aggregate,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Extract => "extract",
            Phase::Recognize => "recognize",
            Phase::Plan => "plan",
            Phase::Download => "download",
            Phase::Aggregate => "aggregate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryStatus {
    Ok,
    NoEvents,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryResult {
    pub status: SummaryStatus,
    pub video_id: String,
    pub backend: String,
    pub threshold: f64,
    pub thumbnails_processed: u64,
    pub detections: usize,
    pub plan: SummaryPlan,
    pub detections_path: PathBuf,
    pub playlist_path: Option<PathBuf>,
    pub concatenated_path: Option<PathBuf>,
    pub remuxed_path: Option<PathBuf>,
    pub timings: StepTimings,
}

/// Run the whole pipeline for one request. `progress` is told when each
/// phase starts.
pub async fn summarize(
    request: &SummaryRequest,
    origin: &OriginClient,
    backend: Arc<dyn ScoreBackend>,
    progress: &(dyn Fn(Phase) + Send + Sync),
) -> Result<SummaryResult> {
    let started = Instant::now();
    let mut timings = StepTimings::default();

    let manifest = origin.manifest(&request.video_id).await?;
    request.validate(&manifest)?;
    detector::preferred_columns(backend.labels(), &request.preferred_events)?;
    let threshold = ThresholdPolicy::with_override(request.threshold_override).threshold_for(manifest.genre)?;
    let out = request.output_dir.clone();
    tokio::fs::create_dir_all(&out).await.at(&out)?;

    progress(Phase::Extract);
    let clock = Instant::now();
    let containers = origin.fetch_containers(&manifest).await?;
    let tiles = {
        let manifest = manifest.clone();
        blocking(move || slice_all(&containers, &manifest)).await?
    };
    timings.extract = clock.elapsed().as_secs_f64();
    let thumbnails_processed = tiles.len() as u64;

    progress(Phase::Recognize);
    let clock = Instant::now();
    let records = {
        let backend = backend.clone();
        let events = request.preferred_events.clone();
        let total = manifest.total_thumbs;
        blocking(move || {
            let table = detector::score_batch(backend.as_ref(), 0, &tiles)?;
            table.check_against(total)?;
            detector::detect(&table, &events, threshold)
        })
        .await?
    };
    let detections_path = out.join(DETECTIONS_FILE);
    store_detections(&records, &detections_path)?;
    timings.recognize = clock.elapsed().as_secs_f64();

    progress(Phase::Plan);
    let source_playlist = origin.playlist(&manifest).await?;
    let timeline = source_playlist.timeline()?;
    let plan = plan_summary(
        records.iter().map(|r| r.thumb_index),
        &timeline,
        &manifest.geometry,
        PlanOptions {
            pad_segments: request.pad_segments,
        },
    )?;

    let mut result = SummaryResult {
        status: SummaryStatus::NoEvents,
        video_id: manifest.video_id.clone(),
        backend: backend.id(),
        threshold,
        thumbnails_processed,
        detections: records.len(),
        plan,
        detections_path,
        playlist_path: None,
        concatenated_path: None,
        remuxed_path: None,
        timings,
    };
    if result.plan.is_empty() {
        result.timings.total = started.elapsed().as_secs_f64();
        return Ok(result);
    }

    progress(Phase::Download);
    let clock = Instant::now();
    let indices = &result.plan.segment_indices;
    let bodies = origin.fetch_segments(&manifest, &source_playlist, indices).await?;
    let seg_dir = out.join(LOCAL_SEGMENT_DIR);
    tokio::fs::create_dir_all(&seg_dir).await.at(&seg_dir)?;
    let mut local = Vec::with_capacity(indices.len());
    for (&i, body) in indices.iter().zip(bodies) {
        let path = out.join(local_segment_uri(i));
        tokio::fs::write(&path, body).await.at(&path)?;
        local.push(path);
    }
    result.timings.download_segments = clock.elapsed().as_secs_f64();

    progress(Phase::Aggregate);
    let clock = Instant::now();
    let playlist_path = out.join(SUMMARY_PLAYLIST);
    write_summary_playlist(&result.plan, &timeline, local_segment_uri, &playlist_path)?;
    result.playlist_path = Some(playlist_path);
    if request.emit_concatenated {
        let path = out.join(SUMMARY_STREAM);
        assemble_stream(&local, &path)?;
        result.concatenated_path = Some(path);
    }
    if request.remux {
        let path = out.join(REMUX_STREAM);
        let inputs = local.clone();
        let target = path.clone();
        blocking(move || Transcoder::locate()?.remux_concat(&inputs, &target)).await?;
        result.remuxed_path = Some(path);
    }
    result.timings.aggregate = clock.elapsed().as_secs_f64();
    result.status = SummaryStatus::Ok;
    result.timings.total = started.elapsed().as_secs_f64();
    Ok(result)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| Error::Integrity(format!("worker task failed: {e}")))?
}

/// Slice every container into its valid tiles, in thumbnail order.
pub fn slice_all(containers: &[RgbImage], manifest: &VideoManifest) -> Result<Vec<RgbImage>> {
    if containers.len() as u64 != manifest.container_count {
        return Err(Error::Integrity(format!(
            "{} containers for a title that has {}",
            containers.len(),
            manifest.container_count
        )));
    }
    let mut tiles = Vec::with_capacity(manifest.total_thumbs as usize);
    for (ci, c) in containers.iter().enumerate() {
        let valid = manifest.geometry.valid_tiles_in_container(ci as u64, manifest.total_thumbs);
        tiles.extend(slice_container(c, &manifest.geometry, valid)?);
    }
    Ok(tiles)
}

pub fn local_segment_uri(index: usize) -> String {
    format!("{LOCAL_SEGMENT_DIR}/seg_{index:05}.ts")
}

fn store_detections(records: &[DetectionRecord], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_detections(records, &mut buf).at(path)?;
    std::fs::write(path, buf).at(path)
}

/// The summary as a media playlist: one entry per planned segment, with a
/// discontinuity before every run after the first.
pub fn summary_playlist(
    plan: &SummaryPlan,
    timeline: &SegmentTimeline,
    uri: impl Fn(usize) -> String,
) -> Result<MediaPlaylist> {
    if plan.is_empty() {
        return Err(Error::Usage("cannot write a playlist for an empty plan".into()));
    }
    if let Some(&bad) = plan.segment_indices.iter().find(|&&i| i >= timeline.len()) {
        return Err(Error::Integrity(format!(
            "plan segment {bad} beyond the {} of the title",
            timeline.len()
        )));
    }
    let segments = plan
        .segment_indices
        .iter()
        .map(|&i| MediaSegment {
            duration: timeline.duration_of(&[i]),
            uri: uri(i),
        })
        .collect();
    let mut disc = BTreeSet::new();
    let mut pos = 0;
    for (k, run) in plan.runs.iter().enumerate() {
        if k > 0 {
            disc.insert(pos);
        }
        pos += run.len;
    }
    Ok(MediaPlaylist::vod(segments, disc))
}

pub fn write_summary_playlist(
    plan: &SummaryPlan,
    timeline: &SegmentTimeline,
    uri: impl Fn(usize) -> String,
    path: &Path,
) -> Result<MediaPlaylist> {
    let playlist = summary_playlist(plan, timeline, uri)?;
    std::fs::write(path, playlist.serialize()).at(path)?;
    Ok(playlist)
}

/// Concatenate segment files in order into `output`; returns the byte count.
pub fn assemble_stream(segments: &[PathBuf], output: &Path) -> Result<u64> {
    use std::io::Write;
    if let Some(missing) = segments.iter().find(|p| !p.is_file()) {
        return Err(Error::Integrity(format!("segment {} is missing", missing.display())));
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(output).at(output)?);
    let mut total = 0;
    for p in segments {
        let mut f = std::fs::File::open(p).at(p)?;
        total += std::io::copy(&mut f, &mut out).at(p)?;
    }
    out.flush().at(output)?;
    Ok(total)
}
