//! Stateless HTTP origin for packaged titles.
//!
//! ```text
//! GET /catalog
//! GET /videos/{id}/manifest.json
//! GET /videos/{id}/playlist.m3u8
//! GET /videos/{id}/segments/seg_{n:05}.ts
//! GET /videos/{id}/thumbs/thumb_{n:04}.jpg
//! ```
//!
//! Files are served byte-for-byte from disk. Connections stay open between
//! requests (HTTP/1.1 keep-alive).

use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::error::{Error, IoContext, Result};
use crate::packager::manifest::MANIFEST_FILE;
use crate::packager::{Genre, VideoManifest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub video_id: String,
    pub title: String,
    pub genre: Genre,
    pub duration: f64,
    pub event_options: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub entries: Vec<CatalogEntry>,
}

impl Catalog {
    /// Collect every `<root>/<id>/manifest.json`. Directories whose manifest
    /// is missing or invalid are skipped with a warning.
    pub fn scan(root: &Path) -> Result<Self> {
        let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
            .at(root)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.join(MANIFEST_FILE).is_file())
            .collect();
        dirs.sort();
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for dir in dirs {
            let manifest = match VideoManifest::load(&dir.join(MANIFEST_FILE)) {
                Ok(m) => m,
                Err(e) => {
                    tracing::warn!("skipping {}: {e}", dir.display());
                    continue;
                }
            };
            let dir_name = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if manifest.video_id != dir_name {
                tracing::warn!(
                    "skipping {}: manifest id {:?} does not match directory",
                    dir.display(),
                    manifest.video_id
                );
                continue;
            }
            if !seen.insert(manifest.video_id.clone()) {
                continue;
            }
            entries.push(CatalogEntry {
                video_id: manifest.video_id,
                title: manifest.title,
                genre: manifest.genre,
                duration: manifest.duration,
                event_options: manifest.event_options,
            });
        }
        Ok(Self { entries })
    }

    pub fn contains(&self, video_id: &str) -> bool {
        self.entries.iter().any(|e| e.video_id == video_id)
    }
}

/// Connection and request counters, for observing keep-alive reuse.
#[derive(Debug, Default)]
pub struct ServerStats {
    connections: AtomicU64,
    requests: AtomicU64,
}

impl ServerStats {
    pub fn connections_accepted(&self) -> u64 {
        self.connections.load(Ordering::SeqCst)
    }

    pub fn requests_served(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }
}

#[derive(Clone)]
struct Origin {
    root: Arc<PathBuf>,
    catalog: Arc<Catalog>,
}

/// A running service bound to a local address.
#[derive(Debug)]
pub struct ServiceHandle {
    addr: SocketAddr,
    stats: Arc<ServerStats>,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ServiceHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stats(&self) -> &ServerStats {
        &self.stats
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = (&mut self.task).await;
    }

    /// Run until the process is stopped.
    pub async fn wait(self) -> Result<()> {
        match self.task.await {
            Ok(r) => r.map_err(|e| Error::io("<server>", e)),
            Err(e) => Err(Error::io("<server>", std::io::Error::other(e))),
        }
    }
}

/// Bind `addr` and serve `router`, counting connections and requests.
pub(crate) async fn spawn_service(addr: &str, router: Router) -> Result<ServiceHandle> {
    use axum::serve::ListenerExt;

    let listener = TcpListener::bind(addr).await.map_err(|e| Error::Environment {
        message: format!("cannot bind {addr}: {e}"),
        remedy: None,
    })?;
    let local = listener.local_addr().at(addr)?;
    let stats = Arc::new(ServerStats::default());
    let conn_stats = stats.clone();
    let listener = listener.tap_io(move |_| {
        conn_stats.connections.fetch_add(1, Ordering::SeqCst);
    });
    let req_stats = stats.clone();
    let router = router.layer(middleware::from_fn(move |req: Request, next: Next| {
        req_stats.requests.fetch_add(1, Ordering::SeqCst);
        next.run(req)
    }));
    let (tx, rx) = oneshot::channel();
    let task = tokio::spawn(async move {
        axum::serve(listener, router)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    Ok(ServiceHandle {
        addr: local,
        stats,
        shutdown: Some(tx),
        task,
    })
}

pub fn router(root: PathBuf, catalog: Catalog) -> Router {
    let state = Origin {
        root: Arc::new(root),
        catalog: Arc::new(catalog),
    };
    Router::new()
        .route("/catalog", get(catalog_handler))
        .route("/videos/{id}/{*path}", get(title_file))
        .fallback(fallback)
        .with_state(state)
}

/// Scan `root` and start serving it on `bind_addr` (use port 0 for any free port).
pub async fn serve(root: &Path, bind_addr: &str) -> Result<ServiceHandle> {
    let catalog = Catalog::scan(root)?;
    tracing::info!("serving {} title(s) from {}", catalog.entries.len(), root.display());
    spawn_service(bind_addr, router(root.to_path_buf(), catalog)).await
}

async fn catalog_handler(State(origin): State<Origin>) -> Json<Catalog> {
    Json((*origin.catalog).clone())
}

async fn title_file(
    State(origin): State<Origin>,
    UrlPath((id, path)): UrlPath<(String, String)>,
) -> Response {
    let Some(rel) = safe_relative(&id).and(safe_relative(&path)) else {
        return StatusCode::FORBIDDEN.into_response();
    };
    if !origin.catalog.contains(&id) {
        return StatusCode::NOT_FOUND.into_response();
    }
    file_response(&origin.root.join(&id).join(rel)).await
}

async fn fallback(req: Request) -> StatusCode {
    let raw = req.uri().path();
    if raw.split('/').any(is_dot_segment) {
        StatusCode::FORBIDDEN
    } else {
        StatusCode::NOT_FOUND
    }
}

fn is_dot_segment(seg: &str) -> bool {
    let lower = seg.to_ascii_lowercase();
    matches!(lower.as_str(), "." | ".." | "%2e" | "%2e%2e" | ".%2e" | "%2e.")
}

/// Accept only plain relative paths: no `..`, no root, no backslashes.
pub(crate) fn safe_relative(path: &str) -> Option<PathBuf> {
    if path.is_empty() || path.contains('\\') || path.contains('\0') {
        return None;
    }
    let p = Path::new(path);
    p.components()
        .all(|c| matches!(c, Component::Normal(_)))
        .then(|| p.to_path_buf())
}

pub fn content_type_for(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("m3u8") => crate::playlist::CONTENT_TYPE,
        Some("ts") => "video/mp2t",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("png") => "image/png",
        Some("json") => "application/json",
        Some("csv") => "text/csv",
        Some("txt") => "text/plain; charset=utf-8",
        Some("html") => "text/html; charset=utf-8",
        Some("js") => "text/javascript",
        Some("css") => "text/css",
        _ => "application/octet-stream",
    }
}

pub(crate) async fn file_response(path: &Path) -> Response {
    match tokio::fs::read(path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type_for(path))], bytes).into_response(),
        Err(e) if matches!(e.kind(), std::io::ErrorKind::NotFound | std::io::ErrorKind::IsADirectory) => {
            StatusCode::NOT_FOUND.into_response()
        }
        Err(e) => {
            // reading a directory reports a platform-specific error
            if path.is_dir() {
                StatusCode::NOT_FOUND.into_response()
            } else {
                tracing::error!("reading {}: {e}", path.display());
                StatusCode::INTERNAL_SERVER_ERROR.into_response()
            }
        }
    }
}
