//! Thumbnail path vs every-frame path, timed per phase.
//!
//! Thumbnail mode runs the regular client against an origin. Frame mode
//! decodes every frame of the locally stored original to JPEG files, scores
//! each one, maps hit frames to segments (frame `f` sits at `f / fps`), copies
//! the selected segments and aggregates them the same way.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::client::{self, OriginClient, Phase, StepTimings, SummaryRequest};
use crate::detector::{self, ScoreBackend, ThresholdPolicy};
use crate::error::{Error, IoContext, Result};
use crate::mapping::SummaryPlan;
use crate::packager::grid::encode_jpeg;
use crate::packager::manifest::{MANIFEST_FILE, PLAYLIST_FILE};
use crate::packager::{Source, VideoManifest};
use crate::playlist::MediaPlaylist;
use crate::server;

/// Frames scored per backend call in frame mode.
const FRAME_BATCH: usize = 250;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMode {
    Thumbnail,
    Frame,
}

impl BenchMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BenchMode::Thumbnail => "thumbnail",
            BenchMode::Frame => "frame",
        }
    }
}

impl std::str::FromStr for BenchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thumbnail" => Ok(BenchMode::Thumbnail),
            "frame" => Ok(BenchMode::Frame),
            _ => Err(Error::Usage(format!("unknown mode {s:?}; expected thumbnail or frame"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub video_id: String,
    pub mode: BenchMode,
    pub images_processed: u64,
    pub timings: StepTimings,
    pub backend: String,
    pub host: String,
    pub plan: SummaryPlan,
}

/// One benchmark run over a packaged title directory (`<root>/<video_id>`).
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub title_dir: PathBuf,
    pub events: Vec<String>,
    pub threshold: Option<f64>,
    /// Scratch space; each run uses its own subdirectory.
    pub work_dir: PathBuf,
    /// Origin to summarize against in thumbnail mode. When absent an
    /// in-process origin serves the title's parent directory.
    pub origin: Option<String>,
}

pub fn host_descriptor() -> String {
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!("{}-{} cpus={cpus}", std::env::consts::OS, std::env::consts::ARCH)
}

pub async fn run_benchmark(
    config: &BenchConfig,
    mode: BenchMode,
    backend: Arc<dyn ScoreBackend>,
) -> Result<TimingReport> {
    let manifest = VideoManifest::load(&config.title_dir.join(MANIFEST_FILE))?;
    match mode {
        BenchMode::Thumbnail => thumbnail_mode(config, &manifest, backend).await,
        BenchMode::Frame => {
            let config = config.clone();
            tokio::task::spawn_blocking(move || frame_mode(&config, &manifest, backend.as_ref()))
                .await
                .map_err(|e| Error::Integrity(format!("benchmark task failed: {e}")))?
        }
    }
}

async fn thumbnail_mode(
    config: &BenchConfig,
    manifest: &VideoManifest,
    backend: Arc<dyn ScoreBackend>,
) -> Result<TimingReport> {
    let (origin_url, local) = match &config.origin {
        Some(url) => (url.clone(), None),
        None => {
            let root = config
                .title_dir
                .parent()
                .ok_or_else(|| Error::Usage(format!("{} has no parent directory", config.title_dir.display())))?;
            let handle = server::serve(root, "127.0.0.1:0").await?;
            (handle.base_url(), Some(handle))
        }
    };
    let request = SummaryRequest {
        video_id: manifest.video_id.clone(),
        preferred_events: config.events.clone(),
        threshold_override: config.threshold,
        pad_segments: 0,
        output_dir: config.work_dir.join("thumbnail"),
        emit_concatenated: true,
        remux: false,
    };
    let origin = OriginClient::new(&origin_url)?;
    let outcome = client::summarize(&request, &origin, backend.clone(), &|_: Phase| {}).await;
    if let Some(h) = local {
        h.shutdown().await;
    }
    let result = outcome?;
    Ok(TimingReport {
        video_id: manifest.video_id.clone(),
        mode: BenchMode::Thumbnail,
        images_processed: result.thumbnails_processed,
        timings: result.timings,
        backend: backend.id(),
        host: host_descriptor(),
        plan: result.plan,
    })
}

fn frame_mode(config: &BenchConfig, manifest: &VideoManifest, backend: &dyn ScoreBackend) -> Result<TimingReport> {
    let started = Instant::now();
    let mut timings = StepTimings::default();
    let source_path = manifest.source.as_deref().ok_or_else(|| {
        Error::Usage(format!(
            "{} does not record its original media; frame mode needs it locally",
            manifest.video_id
        ))
    })?;
    let source = Source::open(Path::new(source_path))?;
    let fps = manifest.fps;
    let threshold = ThresholdPolicy::with_override(config.threshold).threshold_for(manifest.genre)?;
    detector::preferred_columns(backend.labels(), &config.events)?;
    let out = config.work_dir.join("frame");
    let frames_dir = out.join("frames");
    if frames_dir.exists() {
        std::fs::remove_dir_all(&frames_dir).at(&frames_dir)?;
    }
    std::fs::create_dir_all(&frames_dir).at(&frames_dir)?;

    let clock = Instant::now();
    let frame_count = decode_frames(&source, &frames_dir)?;
    timings.extract = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let mut hits = Vec::new();
    let mut next = 0u64;
    while next < frame_count {
        let end = (next + FRAME_BATCH as u64).min(frame_count);
        let batch: Vec<RgbImage> = (next..end)
            .map(|f| {
                let p = frame_path(&frames_dir, f);
                Ok(image::open(&p)?.to_rgb8())
            })
            .collect::<Result<_>>()?;
        let table = detector::score_batch(backend, next, &batch)?;
        hits.extend(detector::detect(&table, &config.events, threshold)?);
        next = end;
    }
    let records: Vec<_> = hits;
    timings.recognize = clock.elapsed().as_secs_f64();

    let playlist_path = config.title_dir.join(PLAYLIST_FILE);
    let playlist = MediaPlaylist::parse(&std::fs::read_to_string(&playlist_path).at(&playlist_path)?)?;
    let timeline = playlist.timeline()?;
    let mut segments = Vec::with_capacity(records.len());
    for r in &records {
        let t = (r.thumb_index as f64 / fps).min(timeline.total() - 1e-9);
        segments.push(timeline.segment_for_time(t)?);
    }
    let plan = SummaryPlan::from_indices(segments, &timeline);

    if !plan.is_empty() {
        let clock = Instant::now();
        let seg_dir = out.join(client::LOCAL_SEGMENT_DIR);
        std::fs::create_dir_all(&seg_dir).at(&seg_dir)?;
        let mut local = Vec::with_capacity(plan.segment_indices.len());
        for &i in &plan.segment_indices {
            let from = config.title_dir.join(&playlist.segments[i].uri);
            let to = out.join(client::local_segment_uri(i));
            std::fs::copy(&from, &to).at(&from)?;
            local.push(to);
        }
        timings.download_segments = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        client::write_summary_playlist(&plan, &timeline, client::local_segment_uri, &out.join(client::SUMMARY_PLAYLIST))?;
        client::assemble_stream(&local, &out.join(client::SUMMARY_STREAM))?;
        timings.aggregate = clock.elapsed().as_secs_f64();
    }
    std::fs::remove_dir_all(&frames_dir).at(&frames_dir)?;
    timings.total = started.elapsed().as_secs_f64();
    Ok(TimingReport {
        video_id: manifest.video_id.clone(),
        mode: BenchMode::Frame,
        images_processed: frame_count,
        timings,
        backend: backend.id(),
        host: host_descriptor(),
        plan,
    })
}

fn frame_path(dir: &Path, index: u64) -> PathBuf {
    dir.join(format!("frame_{index:06}.jpg"))
}

/// Write every frame of `source` to `dir/frame_%06d.jpg`; returns the count.
fn decode_frames(source: &Source, dir: &Path) -> Result<u64> {
    match source {
        Source::Media { path, transcoder } => transcoder.frames_to_dir(path, dir),
        Source::Synthetic { source, .. } => {
            let n = source.frame_count();
            for f in 0..n {
                let p = frame_path(dir, f);
                std::fs::write(&p, encode_jpeg(&source.render_frame(f), 90)?).at(&p)?;
            }
            Ok(n)
        }
    }
}

/// One CSV row per report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub video_id: String,
    pub mode: BenchMode,
    pub extract_s: f64,
    pub recognize_s: f64,
    pub download_s: f64,
    pub aggregate_s: f64,
    pub total_s: f64,
    pub images: u64,
}

impl From<&TimingReport> for ReportRow {
    fn from(r: &TimingReport) -> Self {
        Self {
            video_id: r.video_id.clone(),
            mode: r.mode,
            extract_s: r.timings.extract,
            recognize_s: r.timings.recognize,
            download_s: r.timings.download_segments,
            aggregate_s: r.timings.aggregate,
            total_s: r.timings.total,
            images: r.images_processed,
        }
    }
}

pub fn report_csv(reports: &[TimingReport], out: impl std::io::Write) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::Usage("no benchmark reports to write".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::io("<report>", std::io::Error::other(e));
    for r in reports {
        w.serialize(ReportRow::from(r)).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<report>", e))
}

pub fn read_report_csv(input: impl std::io::Read) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Format {
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}
