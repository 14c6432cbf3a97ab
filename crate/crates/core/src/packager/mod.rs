//! Turn a source title into HLS segments, a media playlist, thumbnail
//! containers and a manifest, laid out for the origin server:
//!
//! ```text
//! <out>/<id>/playlist.m3u8
//! <out>/<id>/segments/seg_00000.ts ...
//! <out>/<id>/thumbs/thumb_0000.jpg ...
//! <out>/<id>/manifest.json
//! ```

pub mod grid;
pub mod manifest;
pub mod synthetic;
pub mod transcoder;
pub mod ts;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::mapping::{container_count, ThumbGeometry};
use crate::playlist::{MediaPlaylist, MediaSegment};

pub use grid::{compose_containers, slice_container, DEFAULT_JPEG_QUALITY};
pub use manifest::{Genre, VideoManifest};
pub use synthetic::SyntheticSource;
pub use transcoder::Transcoder;

/// Maximum relative gap between summed segment durations and the probed
/// source duration.
pub const DURATION_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeInfo {
    pub duration: f64,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
}

/// Where media comes from: a real file decoded by the external transcoder,
/// or a procedural description rendered in-process.
#[derive(Debug, Clone)]
pub enum Source {
    Media { path: PathBuf, transcoder: Transcoder },
    Synthetic { path: Option<PathBuf>, source: SyntheticSource },
}

impl Source {
    /// `*.synth.json` files open as synthetic sources; anything else needs
    /// the transcoder.
    pub fn open(path: &Path) -> Result<Self> {
        if synthetic::is_synthetic_path(path) {
            return Ok(Source::Synthetic {
                path: Some(path.to_path_buf()),
                source: SyntheticSource::load(path).map_err(|e| match e {
                    Error::Io { path, source } => Error::Environment {
                        message: format!("cannot read source {}: {source}", path.display()),
                        remedy: None,
                    },
                    other => other,
                })?,
            });
        }
        std::fs::File::open(path).map_err(|e| Error::Environment {
            message: format!("cannot read source {}: {e}", path.display()),
            remedy: None,
        })?;
        Ok(Source::Media {
            path: path.to_path_buf(),
            transcoder: Transcoder::locate()?,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        match self {
            Source::Media { path, .. } => Some(path),
            Source::Synthetic { path, .. } => path.as_deref(),
        }
    }

    pub fn probe(&self) -> Result<ProbeInfo> {
        match self {
            Source::Media { path, transcoder } => transcoder.probe(path),
            Source::Synthetic { source, .. } => Ok(source.probe()),
        }
    }
}

/// Cut the source into ~`target`-second segments under `title_dir/segments`
/// and return the files with their playlist.
pub fn segment_video(source: &Source, title_dir: &Path, target: f64) -> Result<(Vec<PathBuf>, MediaPlaylist)> {
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::Usage(format!("segment duration must be positive, got {target}")));
    }
    let seg_dir = title_dir.join("segments");
    std::fs::create_dir_all(&seg_dir).at(&seg_dir)?;
    let probe = source.probe()?;
    let uri = |i: usize| manifest::expand_index_pattern(manifest::SEGMENT_PATTERN, i as u64);

    let (files, durations): (Vec<PathBuf>, Vec<f64>) = match source {
        Source::Synthetic { source, .. } => source
            .write_segments(title_dir, target, uri)?
            .into_iter()
            .unzip(),
        Source::Media { path, transcoder } => {
            let text = transcoder.segment(path, &seg_dir, target)?;
            let emitted = MediaPlaylist::parse(&text)?;
            let files: Vec<PathBuf> = emitted
                .segments
                .iter()
                .map(|s| seg_dir.join(&s.uri))
                .collect();
            let on_disk = count_files(&seg_dir, ".ts")?;
            if on_disk != files.len() {
                return Err(Error::Integrity(format!(
                    "transcoder wrote {on_disk} segment files but listed {}",
                    files.len()
                )));
            }
            let mut renamed = Vec::with_capacity(files.len());
            for (i, f) in files.iter().enumerate() {
                let dest = title_dir.join(uri(i));
                if *f != dest {
                    std::fs::rename(f, &dest).at(f)?;
                }
                renamed.push(dest);
            }
            (renamed, emitted.segments.iter().map(|s| s.duration).collect())
        }
    };

    if let Some(missing) = files.iter().find(|f| !f.is_file()) {
        return Err(Error::Integrity(format!("segment {} was not written", missing.display())));
    }
    let playlist = MediaPlaylist::vod(
        durations
            .iter()
            .enumerate()
            .map(|(i, &duration)| MediaSegment { duration, uri: uri(i) })
            .collect(),
        BTreeSet::new(),
    );
    let listed = playlist.total_duration();
    if (listed - probe.duration).abs() > DURATION_TOLERANCE * probe.duration {
        return Err(Error::Integrity(format!(
            "segments cover {listed:.3}s but the source lasts {:.3}s",
            probe.duration
        )));
    }
    Ok((files, playlist))
}

fn count_files(dir: &Path, suffix: &str) -> Result<usize> {
    Ok(std::fs::read_dir(dir)
        .at(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(suffix))
        .count())
}

/// One tile per `seconds_per_thumb` of media, from the first frame at or
/// after each tick.
pub fn extract_thumbnails(source: &Source, geom: &ThumbGeometry) -> Result<Vec<RgbImage>> {
    match source {
        Source::Synthetic { source, .. } => Ok(source.thumbnails(geom)),
        Source::Media { path, transcoder } => {
            if geom.seconds_per_thumb != 1.0 {
                return Err(Error::Usage("the transcoder path extracts one thumbnail per second".into()));
            }
            let probe = transcoder.probe(path)?;
            transcoder.thumbnails(path, geom, geom.thumbs_for_duration(probe.duration))
        }
    }
}

/// Descriptive fields of a title that do not come from probing.
#[derive(Debug, Clone, Default)]
pub struct TitleInfo {
    pub video_id: String,
    pub title: String,
    pub genre: Genre,
    /// Defaults to the genre's vocabulary.
    pub vocabulary: Option<Vec<String>>,
    pub source: Option<String>,
}

pub fn write_manifest(
    probe: &ProbeInfo,
    geom: &ThumbGeometry,
    playlist: &MediaPlaylist,
    info: &TitleInfo,
    title_dir: &Path,
) -> Result<VideoManifest> {
    let total_thumbs = geom.thumbs_for_duration(probe.duration);
    let manifest = VideoManifest {
        video_id: info.video_id.clone(),
        title: if info.title.is_empty() {
            info.video_id.clone()
        } else {
            info.title.clone()
        },
        genre: info.genre,
        duration: probe.duration,
        fps: probe.fps,
        total_thumbs,
        container_count: container_count(total_thumbs, geom),
        geometry: *geom,
        segment_playlist: manifest::PLAYLIST_FILE.into(),
        segment_count: playlist.segments.len(),
        container_name_pattern: manifest::CONTAINER_PATTERN.into(),
        segment_name_pattern: manifest::SEGMENT_PATTERN.into(),
        event_vocabulary: info
            .vocabulary
            .clone()
            .unwrap_or_else(|| info.genre.default_vocabulary()),
        event_options: info.genre.event_options(),
        source: info.source.clone(),
    };
    manifest.validate()?;
    manifest.store(&title_dir.join(manifest::MANIFEST_FILE))?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct PackOptions {
    pub input: PathBuf,
    pub out_root: PathBuf,
    pub info: TitleInfo,
    pub segment_duration: f64,
    pub jpeg_quality: u8,
    pub geometry: ThumbGeometry,
}

impl PackOptions {
    pub fn new(input: impl Into<PathBuf>, out_root: impl Into<PathBuf>, video_id: &str) -> Self {
        Self {
            input: input.into(),
            out_root: out_root.into(),
            info: TitleInfo {
                video_id: video_id.to_string(),
                ..TitleInfo::default()
            },
            segment_duration: 10.0,
            jpeg_quality: DEFAULT_JPEG_QUALITY,
            geometry: ThumbGeometry::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PackReport {
    pub title_dir: PathBuf,
    pub manifest: VideoManifest,
    pub playlist: MediaPlaylist,
}

/// Run the whole packaging pipeline for one title.
pub fn package(opts: &PackOptions) -> Result<PackReport> {
    validate_video_id(&opts.info.video_id)?;
    if !(1..=100).contains(&opts.jpeg_quality) {
        return Err(Error::Usage(format!("JPEG quality {} outside 1..=100", opts.jpeg_quality)));
    }
    opts.geometry.validate()?;
    let source = Source::open(&opts.input)?;
    let probe = source.probe()?;
    let title_dir = opts.out_root.join(&opts.info.video_id);
    std::fs::create_dir_all(&title_dir).at(&title_dir)?;

    let (_, playlist) = segment_video(&source, &title_dir, opts.segment_duration)?;
    let playlist_path = title_dir.join(manifest::PLAYLIST_FILE);
    std::fs::write(&playlist_path, playlist.serialize()).at(&playlist_path)?;

    let tiles = extract_thumbnails(&source, &opts.geometry)?;
    let expected = opts.geometry.thumbs_for_duration(probe.duration);
    if tiles.len() as u64 != expected {
        return Err(Error::Integrity(format!(
            "extracted {} thumbnails, expected {expected}",
            tiles.len()
        )));
    }
    let thumbs_dir = title_dir.join("thumbs");
    std::fs::create_dir_all(&thumbs_dir).at(&thumbs_dir)?;
    for (i, sheet) in compose_containers(&tiles, &opts.geometry)?.iter().enumerate() {
        let path = title_dir.join(manifest::expand_index_pattern(manifest::CONTAINER_PATTERN, i as u64));
        std::fs::write(&path, grid::encode_jpeg(sheet, opts.jpeg_quality)?).at(&path)?;
    }

    let mut info = opts.info.clone();
    if info.source.is_none() {
        info.source = source
            .path()
            .and_then(|p| std::fs::canonicalize(p).ok())
            .map(|p| p.display().to_string());
    }
    let manifest = write_manifest(&probe, &opts.geometry, &playlist, &info, &title_dir)?;
    manifest.check_files(&title_dir)?;
    Ok(PackReport {
        title_dir,
        manifest,
        playlist,
    })
}

/// Video ids become directory names and URL path segments.
pub fn validate_video_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::Usage(format!(
            "video id {id:?} must be non-empty and use only ASCII letters, digits, '-', '_' or '.'"
        )))
    }
}
