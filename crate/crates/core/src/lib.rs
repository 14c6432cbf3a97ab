//! Client-driven personalized video summarization.
//!
//! A title is packaged into ~10 s transport-stream segments plus a sequence
//! of thumbnail containers (5x5 sprite sheets, one 160x90 thumbnail per
//! second). A client downloads only the containers, scores each thumbnail
//! against the viewer's preferred events, maps the hits onto segments and
//! fetches just those segments to build a keyshot summary.

pub mod bench;
pub mod client;
pub mod detector;
pub mod error;
pub mod mapping;
pub mod packager;
pub mod playlist;
pub mod server;

pub use client::{summarize, OriginClient, StepTimings, SummaryRequest, SummaryResult, SummaryStatus};
pub use detector::{DetectionRecord, DetectionTable, ScoreBackend, ThresholdPolicy};
pub use error::{BackendError, Error, Result};
pub use mapping::{
    container_count, locate_tile, plan_summary, thumb_index_for_time, PlanOptions, Run,
    SegmentTimeline, SummaryPlan, ThumbGeometry, TileLocation,
};
pub use packager::{Genre, VideoManifest};
pub use playlist::{MediaPlaylist, MediaSegment};
