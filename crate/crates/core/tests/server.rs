mod common;

use std::path::Path;

use ltcsum_core::packager::SyntheticSource;
use ltcsum_core::server::{self, Catalog};
use tokio::io::{AsyncReadExt, AsyncWriteExt};

/// Every file the origin should expose for a packaged title, relative to it.
fn title_files(title_dir: &Path) -> Vec<String> {
    let mut out = vec!["manifest.json".to_string(), "playlist.m3u8".to_string()];
    for sub in ["thumbs", "segments"] {
        let mut names: Vec<String> = std::fs::read_dir(title_dir.join(sub))
            .unwrap()
            .map(|e| format!("{sub}/{}", e.unwrap().file_name().to_string_lossy()))
            .collect();
        names.sort();
        out.extend(names);
    }
    out
}

async fn fetch_all(base: &str, id: &str, root: &Path) -> usize {
    let http = reqwest::Client::new();
    let files = title_files(&root.join(id));
    for rel in &files {
        let resp = http.get(format!("{base}/videos/{id}/{rel}")).send().await.unwrap();
        assert!(resp.status().is_success(), "{rel}: {}", resp.status());
        let body = resp.bytes().await.unwrap();
        let disk = std::fs::read(root.join(id).join(rel)).unwrap();
        assert!(body[..] == disk[..], "{id}/{rel} differs from disk");
    }
    files.len()
}

async fn raw_get(addr: std::net::SocketAddr, path: &str) -> u16 {
    let mut s = tokio::net::TcpStream::connect(addr).await.unwrap();
    let req = format!("GET {path} HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
    s.write_all(req.as_bytes()).await.unwrap();
    let mut buf = Vec::new();
    s.read_to_end(&mut buf).await.unwrap();
    let head = String::from_utf8_lossy(&buf);
    head.split_whitespace().nth(1).unwrap().parse().unwrap()
}

#[tokio::test]
async fn serves_files_byte_for_byte() {
    let root = tempfile::tempdir().unwrap();
    common::package_title(root.path(), "t1", &SyntheticSource::new(60.0, 10.0).with_event(5, 8, common::RED, "x"));
    let h = server::serve(root.path(), "127.0.0.1:0").await.unwrap();
    let n = fetch_all(&h.base_url(), "t1", root.path()).await;
    assert_eq!(n, 2 + 3 + 6);

    let resp = reqwest::get(format!("{}/videos/t1/playlist.m3u8", h.base_url())).await.unwrap();
    assert_eq!(resp.headers()["content-type"], "application/vnd.apple.mpegurl");
    let resp = reqwest::get(format!("{}/videos/t1/segments/seg_00000.ts", h.base_url())).await.unwrap();
    assert_eq!(resp.headers()["content-type"], "video/mp2t");
    h.shutdown().await;
}

#[tokio::test]
async fn connections_are_reused() {
    let root = tempfile::tempdir().unwrap();
    common::package_title(root.path(), "t1", &SyntheticSource::new(30.0, 10.0));
    let h = server::serve(root.path(), "127.0.0.1:0").await.unwrap();
    let http = reqwest::Client::new();
    for rel in ["manifest.json", "playlist.m3u8", "thumbs/thumb_0000.jpg"] {
        let r = http.get(format!("{}/videos/t1/{rel}", h.base_url())).send().await.unwrap();
        assert!(r.status().is_success());
        r.bytes().await.unwrap();
    }
    assert_eq!(h.stats().requests_served(), 3);
    assert_eq!(h.stats().connections_accepted(), 1);
    h.shutdown().await;
}

#[tokio::test]
async fn eight_clients_fetch_disjoint_titles() {
    let root = tempfile::tempdir().unwrap();
    for i in 0..8 {
        common::package_title(root.path(), &format!("v{i}"), &SyntheticSource::new(40.0 + i as f64, 5.0));
    }
    let h = server::serve(root.path(), "127.0.0.1:0").await.unwrap();
    let base = h.base_url();
    let tasks: Vec<_> = (0..8)
        .map(|i| {
            let base = base.clone();
            let root = root.path().to_path_buf();
            tokio::spawn(async move { fetch_all(&base, &format!("v{i}"), &root).await })
        })
        .collect();
    for t in tasks {
        assert!(t.await.unwrap() > 0);
    }
    let catalog: Catalog = reqwest::get(format!("{base}/catalog")).await.unwrap().json().await.unwrap();
    assert_eq!(catalog.entries.len(), 8);
    h.shutdown().await;
}

#[tokio::test]
async fn traversal_is_forbidden_and_unknown_is_missing() {
    let root = tempfile::tempdir().unwrap();
    common::package_title(root.path(), "t1", &SyntheticSource::new(20.0, 5.0));
    std::fs::write(root.path().join("secret.txt"), "x").unwrap();
    let h = server::serve(root.path(), "127.0.0.1:0").await.unwrap();
    let addr = h.local_addr();
    assert_eq!(raw_get(addr, "/videos/t1/../secret.txt").await, 403);
    assert_eq!(raw_get(addr, "/videos/t1/segments/../../secret.txt").await, 403);
    assert_eq!(raw_get(addr, "/videos/%2e%2e/secret.txt").await, 403);
    assert_eq!(raw_get(addr, "/videos/t1/%2e%2e/%2e%2e/secret.txt").await, 403);
    assert_eq!(raw_get(addr, "/videos/t1/manifest.json").await, 200);
    assert_eq!(raw_get(addr, "/videos/t1/thumbs/thumb_9999.jpg").await, 404);
    assert_eq!(raw_get(addr, "/videos/nope/manifest.json").await, 404);
    assert_eq!(raw_get(addr, "/videos/t1/segments").await, 404);
    assert_eq!(raw_get(addr, "/elsewhere").await, 404);
    h.shutdown().await;
}

#[tokio::test]
async fn catalog_lists_titles_and_empty_root_is_empty() {
    let empty = tempfile::tempdir().unwrap();
    let h = server::serve(empty.path(), "127.0.0.1:0").await.unwrap();
    let text = reqwest::get(format!("{}/catalog", h.base_url())).await.unwrap().text().await.unwrap();
    assert_eq!(text, r#"{"entries":[]}"#);
    h.shutdown().await;

    let root = tempfile::tempdir().unwrap();
    common::package_title(root.path(), "w", &SyntheticSource::new(20.0, 5.0));
    // a directory whose manifest names another id is skipped
    common::package_title(root.path(), "x", &SyntheticSource::new(20.0, 5.0));
    std::fs::rename(root.path().join("x"), root.path().join("y")).unwrap();
    let h = server::serve(root.path(), "127.0.0.1:0").await.unwrap();
    let c: Catalog = reqwest::get(format!("{}/catalog", h.base_url())).await.unwrap().json().await.unwrap();
    assert_eq!(c.entries.len(), 1);
    assert_eq!(c.entries[0].video_id, "w");
    assert_eq!(c.entries[0].genre.as_str(), "western");
    assert_eq!(c.entries[0].event_options[0], vec!["horse-riding", "horse-race"]);
    h.shutdown().await;
}

#[tokio::test]
async fn missing_root_is_an_error() {
    assert!(server::serve(Path::new("/nonexistent/root"), "127.0.0.1:0").await.is_err());
}
