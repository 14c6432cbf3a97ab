use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use image::{Rgb, RgbImage};
use ltcsum_core::bench::{report_csv, run_benchmark, BenchConfig, BenchMode};
use ltcsum_core::client::jobs::{job_api, JobApiConfig};
use ltcsum_core::client::{self, SummaryRequest};
use ltcsum_core::detector::{self, CentroidModel};
use ltcsum_core::packager::grid::decode_rgb;
use ltcsum_core::packager::manifest::MANIFEST_FILE;
use ltcsum_core::packager::{package, PackOptions, SyntheticSource};
use ltcsum_core::{server, Error, Genre, OriginClient, VideoManifest};

use crate::{BenchArgs, JobsArgs, ModeArg, PackArgs, ScoreArgs, ServeArgs, SummarizeArgs, SynthArgs, TrainArgs};

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn parse_hex_colour(s: &str) -> Result<[u8; 3]> {
    let s = s.trim_start_matches('#');
    if s.len() != 6 || !s.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(Error::Usage(format!("colour {s:?} is not RRGGBB")).into());
    }
    let byte = |i: usize| u8::from_str_radix(&s[i..i + 2], 16).unwrap();
    Ok([byte(0), byte(2), byte(4)])
}

fn split_pair(s: &str) -> Result<(&str, &str)> {
    match s.split_once('=') {
        Some((l, r)) if !l.is_empty() && !r.is_empty() => Ok((l, r)),
        _ => Err(Error::Usage(format!("expected LABEL=VALUE, got {s:?}")).into()),
    }
}

pub fn pack(a: PackArgs) -> Result<()> {
    let mut opts = PackOptions::new(&a.input, &a.out, &a.id);
    opts.info.genre = a.genre.parse::<Genre>()?;
    opts.info.title = a.title.unwrap_or_else(|| a.id.clone());
    if !a.vocabulary.is_empty() {
        opts.info.vocabulary = Some(a.vocabulary);
    }
    opts.segment_duration = a.segment_duration;
    opts.jpeg_quality = a.jpeg_quality;
    let report = package(&opts)?;
    print_json(&report.manifest)
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let mut src = SyntheticSource::new(a.duration, a.fps);
    for spec in &a.events {
        let parts: Vec<&str> = spec.splitn(4, ':').collect();
        let [start, end, colour, label] = parts[..] else {
            return Err(Error::Usage(format!("event {spec:?} is not START:END:RRGGBB:LABEL")).into());
        };
        let num = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| Error::Usage(format!("event {spec:?}: {v:?} is not a whole second")))
        };
        src = src.with_event(num(start)?, num(end)?, parse_hex_colour(colour)?, label);
    }
    src.validate()?;
    src.store(&a.out)?;
    eprintln!("wrote {} ({} s, {} frames)", a.out.display(), src.duration, src.frame_count());
    Ok(())
}

pub fn train_centroids(a: TrainArgs) -> Result<()> {
    let mut examples: Vec<(String, RgbImage)> = Vec::new();
    for e in &a.examples {
        let (label, path) = split_pair(e)?;
        let img = image::open(path).with_context(|| format!("reading {path}"))?.to_rgb8();
        examples.push((label.to_string(), img));
    }
    for s in &a.swatches {
        let (label, hex) = split_pair(s)?;
        examples.push((label.to_string(), RgbImage::from_pixel(160, 90, Rgb(parse_hex_colour(hex)?))));
    }
    if examples.is_empty() {
        return Err(Error::Usage("give at least one --example or --swatch".into()).into());
    }
    let model = CentroidModel::fit(examples.iter().map(|(l, img)| (l.as_str(), img)))?;
    model.store(&a.out)?;
    eprintln!("wrote {} with {} classes", a.out.display(), model.labels().len());
    Ok(())
}

pub fn score(a: ScoreArgs) -> Result<()> {
    let backend = a.backend.build()?;
    let manifest = VideoManifest::load(&a.title.join(MANIFEST_FILE))?;
    manifest.validate()?;
    let containers = (0..manifest.container_count)
        .map(|i| {
            let path = a.title.join(manifest.container_uri(i));
            let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            Ok(decode_rgb(&bytes)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let tiles = client::slice_all(&containers, &manifest)?;
    let table = detector::score_batch(backend.as_ref(), 0, &tiles)?;
    table.check_against(manifest.total_thumbs)?;
    table.store_csv(&a.out)?;
    eprintln!("scored {} thumbnails with {}", table.len(), backend.id());
    Ok(())
}

pub async fn serve(a: ServeArgs) -> Result<()> {
    let h = server::serve(&a.root, &a.addr).await?;
    println!("listening on {}", h.base_url());
    std::io::stdout().flush()?;
    h.wait().await?;
    Ok(())
}

pub async fn summarize(a: SummarizeArgs) -> Result<()> {
    let backend = a.backend.build()?;
    let origin = OriginClient::new(&a.origin)?;
    let events: Vec<&str> = a.events.iter().map(String::as_str).collect();
    let mut req = SummaryRequest::new(&a.video, &events, &a.out);
    req.threshold_override = a.threshold;
    req.pad_segments = a.pad;
    req.emit_concatenated = a.concat;
    req.remux = a.remux;
    let result = client::summarize(&req, &origin, backend, &|phase| {
        tracing::info!(phase = phase.as_str(), "summarize");
    })
    .await?;
    print_json(&result)
}

pub async fn jobs(a: JobsArgs) -> Result<()> {
    let backend = a.backend.build()?;
    let origin = OriginClient::new(&a.origin)?;
    let mut config = JobApiConfig::new(origin, backend, &a.work_dir);
    config.workers = a.workers.max(1);
    config.ui_dir = a.ui_dir;
    let h = job_api(config, &a.addr).await?;
    println!("listening on {}", h.base_url());
    std::io::stdout().flush()?;
    h.wait().await?;
    Ok(())
}

fn resolve_title(title: &str, root: &Path) -> Result<PathBuf> {
    let direct = PathBuf::from(title);
    let dir = if direct.join(MANIFEST_FILE).is_file() {
        direct
    } else {
        root.join(title)
    };
    if !dir.join(MANIFEST_FILE).is_file() {
        bail!(Error::Usage(format!(
            "{title:?} is neither a packaged title directory nor a title under {}",
            root.display()
        )));
    }
    Ok(dir)
}

pub async fn bench(a: BenchArgs) -> Result<()> {
    let backend = a.backend.build()?;
    let config = BenchConfig {
        title_dir: resolve_title(&a.title, &a.root)?,
        events: a.events,
        threshold: a.threshold,
        work_dir: a.work_dir,
        origin: a.origin,
    };
    let modes: &[BenchMode] = match a.mode {
        ModeArg::Thumbnail => &[BenchMode::Thumbnail],
        ModeArg::Frame => &[BenchMode::Frame],
        ModeArg::Both => &[BenchMode::Thumbnail, BenchMode::Frame],
    };
    let mut reports = Vec::new();
    for &mode in modes {
        let r = run_benchmark(&config, mode, backend.clone()).await?;
        eprintln!(
            "{}: {} images, total {:.3}s (extract {:.3} recognize {:.3} download {:.3} aggregate {:.3})",
            mode.as_str(),
            r.images_processed,
            r.timings.total,
            r.timings.extract,
            r.timings.recognize,
            r.timings.download_segments,
            r.timings.aggregate
        );
        reports.push(r);
    }
    let file = std::fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    report_csv(&reports, file)?;
    Ok(())
}
