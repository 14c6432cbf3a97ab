//! Real-media paths through the external transcoder. Skipped when no
//! transcoder is installed.

mod common;

use std::path::{Path, PathBuf};

use ltcsum_core::bench::{run_benchmark, BenchConfig, BenchMode};
use ltcsum_core::client::{self, SummaryRequest};
use ltcsum_core::packager::{package, PackOptions, SyntheticSource, Transcoder};
use ltcsum_core::{server, Genre, OriginClient};

fn transcoder() -> Option<Transcoder> {
    match Transcoder::locate() {
        Ok(t) => Some(t),
        Err(e) => {
            eprintln!("skipping: {e}");
            None
        }
    }
}

fn encode_source(t: &Transcoder, dir: &Path) -> (SyntheticSource, PathBuf) {
    let src = SyntheticSource::new(60.0, 25.0)
        .with_event(12, 15, common::RED, "horse-riding")
        .with_event(41, 43, common::RED, "horse-riding");
    let path = dir.join("clip.mp4");
    let frames = (0..src.frame_count()).map(|f| src.render_frame(f));
    t.encode_frames(frames, src.width, src.height, src.fps, &path).unwrap();
    (src, path)
}

#[tokio::test]
async fn package_summarize_and_remux_real_media() {
    let Some(t) = transcoder() else { return };
    let dir = tempfile::tempdir().unwrap();
    let (_, clip) = encode_source(&t, dir.path());

    let probe = t.probe(&clip).unwrap();
    assert!((probe.duration - 60.0).abs() < 0.1, "{probe:?}");
    assert!((probe.fps - 25.0).abs() < 1e-6);

    let root = dir.path().join("origin");
    let mut opts = PackOptions::new(&clip, &root, "clip");
    opts.info.genre = Genre::Western;
    let report = package(&opts).unwrap();
    assert_eq!(report.manifest.total_thumbs, 60);
    assert_eq!(report.manifest.container_count, 3);
    assert_eq!(report.playlist.segments.len(), 6);
    assert!((report.playlist.total_duration() - 60.0).abs() < 1.2);

    let h = server::serve(&root, "127.0.0.1:0").await.unwrap();
    let origin = OriginClient::new(&h.base_url()).unwrap();
    let mut req = SummaryRequest::new("clip", &["horse-riding"], dir.path().join("out"));
    req.threshold_override = Some(0.9);
    req.emit_concatenated = true;
    req.remux = true;
    let r = client::summarize(&req, &origin, common::colour_backend(), &|_| {}).await.unwrap();
    assert_eq!(r.plan.segment_indices, vec![1, 4]);
    let remuxed = r.remuxed_path.unwrap();
    let d = t.probe(&remuxed).unwrap().duration;
    let want = r.plan.estimated_duration;
    assert!((d - want).abs() <= 0.02 * want, "remuxed {d}s vs plan {want}s");
    h.shutdown().await;

    let config = BenchConfig {
        title_dir: report.title_dir,
        events: vec!["horse-riding".into()],
        threshold: Some(0.9),
        work_dir: dir.path().join("bench"),
        origin: None,
    };
    let frame = run_benchmark(&config, BenchMode::Frame, common::colour_backend()).await.unwrap();
    assert!(frame.images_processed.abs_diff(1500) <= 25, "{}", frame.images_processed);
    assert_eq!(frame.plan.segment_indices, vec![1, 4]);
}

#[test]
fn missing_transcoder_names_a_remedy() {
    let t = Transcoder::new("/nonexistent/ffmpeg");
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.mp4");
    std::fs::write(&input, b"not media").unwrap();
    let err = t.probe(&input).unwrap_err().to_string();
    assert!(err.contains("ffmpeg"), "{err}");
}
