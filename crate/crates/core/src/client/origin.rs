use std::time::Duration;

use futures::stream::{self, StreamExt, TryStreamExt};
use image::RgbImage;

use crate::error::{Error, Result};
use crate::packager::grid::decode_rgb;
use crate::packager::VideoManifest;
use crate::playlist::MediaPlaylist;
use crate::server::Catalog;

/// HTTP access to an origin server over pooled persistent connections.
#[derive(Debug, Clone)]
pub struct OriginClient {
    base: String,
    http: reqwest::Client,
    /// Concurrent downloads per batch.
    pub parallelism: usize,
    /// Extra attempts after the first failure.
    pub retries: u32,
    pub backoff: Duration,
}

impl OriginClient {
    pub fn new(base_url: &str) -> Result<Self> {
        let base = base_url.trim_end_matches('/').to_string();
        if !(base.starts_with("http://") || base.starts_with("https://")) {
            return Err(Error::Usage(format!("origin {base_url:?} must be an http(s) URL")));
        }
        let http = reqwest::Client::builder()
            .pool_idle_timeout(Duration::from_secs(90))
            .connect_timeout(Duration::from_secs(5))
            .build()
            .map_err(|e| Error::env(format!("cannot build HTTP client: {e}")))?;
        Ok(Self {
            base,
            http,
            parallelism: 4,
            retries: 3,
            backoff: Duration::from_millis(200),
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    pub fn video_url(&self, video_id: &str, rel: &str) -> String {
        format!("{}/videos/{video_id}/{rel}", self.base)
    }

    /// GET with retry; any non-success status or transport error counts as a failure.
    pub async fn get_bytes(&self, url: &str, what: &str) -> Result<Vec<u8>> {
        let attempts = self.retries + 1;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.http.get(url).send().await {
                Ok(resp) if resp.status().is_success() => match resp.bytes().await {
                    Ok(b) => return Ok(b.to_vec()),
                    Err(e) => last = e.to_string(),
                },
                Ok(resp) => last = format!("HTTP {} for {url}", resp.status()),
                Err(e) => last = format!("{e} ({url})"),
            }
            if attempt < attempts {
                tokio::time::sleep(self.backoff).await;
            }
        }
        Err(Error::Fetch {
            what: what.to_string(),
            attempts,
            message: last,
        })
    }

    pub async fn catalog(&self) -> Result<Catalog> {
        let bytes = self.get_bytes(&format!("{}/catalog", self.base), "catalog").await?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub async fn manifest(&self, video_id: &str) -> Result<VideoManifest> {
        let url = self.video_url(video_id, crate::packager::manifest::MANIFEST_FILE);
        let bytes = self.get_bytes(&url, &format!("manifest of {video_id}")).await?;
        let manifest: VideoManifest = serde_json::from_slice(&bytes)?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub async fn playlist(&self, manifest: &VideoManifest) -> Result<MediaPlaylist> {
        let url = self.video_url(&manifest.video_id, &manifest.segment_playlist);
        let bytes = self.get_bytes(&url, "playlist").await?;
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Format { line: 1, message: "playlist is not UTF-8".into() })?;
        MediaPlaylist::parse(&text)
    }

    /// Download and decode every container of a title, in index order.
    pub async fn fetch_containers(&self, manifest: &VideoManifest) -> Result<Vec<RgbImage>> {
        stream::iter(0..manifest.container_count)
            .map(|i| async move {
                let url = self.video_url(&manifest.video_id, &manifest.container_uri(i));
                let bytes = self.get_bytes(&url, &format!("container {i}")).await?;
                tokio::task::spawn_blocking(move || decode_rgb(&bytes))
                    .await
                    .map_err(|e| Error::Integrity(format!("decoding container {i}: {e}")))?
            })
            .buffered(self.parallelism.max(1))
            .try_collect()
            .await
    }

    /// Download segments by playlist position, returned in the given order.
    pub async fn fetch_segments(
        &self,
        manifest: &VideoManifest,
        playlist: &MediaPlaylist,
        indices: &[usize],
    ) -> Result<Vec<Vec<u8>>> {
        stream::iter(indices.iter().copied())
            .map(|i| async move {
                let seg = playlist.segments.get(i).ok_or_else(|| {
                    Error::Integrity(format!("segment {i} not in the playlist"))
                })?;
                let url = self.video_url(&manifest.video_id, &seg.uri);
                self.get_bytes(&url, &format!("segment {i}")).await
            })
            .buffered(self.parallelism.max(1))
            .try_collect()
            .await
    }
}
