//! The external transcoder boundary. All decoding, encoding and muxing of
//! real media happens in an `ffmpeg` child process; this crate never links a
//! codec.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use image::RgbImage;

use super::ProbeInfo;
use crate::error::{Error, IoContext, Result};
use crate::mapping::ThumbGeometry;

/// Environment variable overriding the transcoder executable.
pub const TRANSCODER_ENV: &str = "LTCSUM_FFMPEG";

/// Picks the first frame of every new whole second (smallest timestamp at or
/// after the integer second) and scales it to the tile size.
const THUMB_SELECT: &str = "select='isnan(prev_selected_t)+gte(floor(t)-floor(prev_selected_t),1)'";

#[derive(Debug, Clone)]
pub struct Transcoder {
    program: PathBuf,
}

impl Transcoder {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        Self {
            program: program.into(),
        }
    }

    /// Find the transcoder via `LTCSUM_FFMPEG` or `PATH`.
    pub fn locate() -> Result<Self> {
        if let Some(p) = std::env::var_os(TRANSCODER_ENV).filter(|p| !p.is_empty()) {
            let p = PathBuf::from(p);
            if p.is_file() {
                return Ok(Self::new(p));
            }
            return Err(missing(format!("{TRANSCODER_ENV} points at {} which does not exist", p.display())));
        }
        let path = std::env::var_os("PATH").unwrap_or_default();
        std::env::split_paths(&path)
            .map(|d| d.join("ffmpeg"))
            .find(|p| p.is_file())
            .map(Self::new)
            .ok_or_else(|| missing("ffmpeg not found on PATH".into()))
    }

    pub fn program(&self) -> &Path {
        &self.program
    }

    fn command(&self) -> Command {
        let mut cmd = Command::new(&self.program);
        cmd.arg("-hide_banner").arg("-nostdin");
        cmd
    }

    fn run(&self, args: &[OsString]) -> Result<Vec<u8>> {
        let output = self
            .command()
            .args(args)
            .stdin(Stdio::null())
            .output()
            .map_err(|e| spawn_error(&self.program, e))?;
        if !output.status.success() {
            return Err(Error::Transcoder {
                status: output.status.to_string(),
                diagnostics: tail(&output.stderr),
            });
        }
        Ok(output.stdout)
    }

    pub fn probe(&self, input: &Path) -> Result<ProbeInfo> {
        ensure_readable(input)?;
        // Without an output ffmpeg exits non-zero after printing stream info.
        let output = self
            .command()
            .arg("-i")
            .arg(input)
            .stdin(Stdio::null())
            .output()
            .map_err(|e| spawn_error(&self.program, e))?;
        let text = String::from_utf8_lossy(&output.stderr);
        parse_probe(&text).ok_or_else(|| Error::Transcoder {
            status: output.status.to_string(),
            diagnostics: tail(&output.stderr),
        })
    }

    /// HLS segmentation with keyframes forced on the `target` grid. Writes
    /// `segment_dir/seg_%05d.ts` and returns ffmpeg's playlist text.
    pub fn segment(&self, input: &Path, segment_dir: &Path, target: f64) -> Result<String> {
        ensure_readable(input)?;
        let playlist = segment_dir.join("ffmpeg.m3u8");
        let args: Vec<OsString> = vec![
            "-loglevel".into(),
            "error".into(),
            "-y".into(),
            "-i".into(),
            input.into(),
            "-map".into(),
            "0:v:0".into(),
            "-map".into(),
            "0:a:0?".into(),
            "-c:v".into(),
            "libx264".into(),
            "-preset".into(),
            "veryfast".into(),
            "-pix_fmt".into(),
            "yuv420p".into(),
            "-force_key_frames".into(),
            format!("expr:gte(t,n_forced*{target})").into(),
            "-sc_threshold".into(),
            "0".into(),
            "-c:a".into(),
            "aac".into(),
            "-f".into(),
            "hls".into(),
            "-hls_time".into(),
            target.to_string().into(),
            "-hls_playlist_type".into(),
            "vod".into(),
            "-hls_list_size".into(),
            "0".into(),
            "-hls_segment_filename".into(),
            segment_dir.join("seg_%05d.ts").into(),
            playlist.clone().into(),
        ];
        self.run(&args)?;
        let text = std::fs::read_to_string(&playlist).at(&playlist)?;
        std::fs::remove_file(&playlist).at(&playlist)?;
        Ok(text)
    }

    /// One tile per second of media, decoded as raw RGB from the child's stdout.
    pub fn thumbnails(&self, input: &Path, geom: &ThumbGeometry, expected: u64) -> Result<Vec<RgbImage>> {
        ensure_readable(input)?;
        let filter = format!("{THUMB_SELECT},scale={}:{}", geom.tile_width, geom.tile_height);
        let args: Vec<OsString> = vec![
            "-loglevel".into(),
            "error".into(),
            "-i".into(),
            input.into(),
            "-vf".into(),
            filter.into(),
            "-fps_mode".into(),
            "passthrough".into(),
            "-f".into(),
            "rawvideo".into(),
            "-pix_fmt".into(),
            "rgb24".into(),
            "-".into(),
        ];
        let raw = self.run(&args)?;
        let frame_len = (geom.tile_width * geom.tile_height * 3) as usize;
        let mut tiles: Vec<RgbImage> = raw
            .chunks_exact(frame_len)
            .map(|c| RgbImage::from_raw(geom.tile_width, geom.tile_height, c.to_vec()).expect("sized chunk"))
            .collect();
        // A variable-rate source can leave a second without a frame; hold the
        // previous picture so indices stay aligned with seconds.
        if tiles.is_empty() {
            return Err(Error::Integrity(format!("no frames decoded from {}", input.display())));
        }
        while (tiles.len() as u64) < expected {
            let last = tiles.last().cloned().expect("non-empty");
            tiles.push(last);
        }
        tiles.truncate(expected as usize);
        Ok(tiles)
    }

    /// Decode every frame to `dir/frame_%06d.jpg`; returns the frame count.
    pub fn frames_to_dir(&self, input: &Path, dir: &Path) -> Result<u64> {
        ensure_readable(input)?;
        let args: Vec<OsString> = vec![
            "-loglevel".into(),
            "error".into(),
            "-i".into(),
            input.into(),
            "-fps_mode".into(),
            "passthrough".into(),
            "-q:v".into(),
            "2".into(),
            "-start_number".into(),
            "0".into(),
            dir.join("frame_%06d.jpg").into(),
        ];
        self.run(&args)?;
        let count = std::fs::read_dir(dir)
            .at(dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().starts_with("frame_"))
            .count();
        Ok(count as u64)
    }

    /// Join transport-stream segments into one file with rebased timestamps.
    pub fn remux_concat(&self, inputs: &[PathBuf], output: &Path) -> Result<()> {
        let list = output.with_extension("concat.txt");
        let mut body = String::from("ffconcat version 1.0\n");
        for p in inputs {
            let abs = std::fs::canonicalize(p).at(p)?;
            body.push_str(&format!("file '{}'\n", abs.display().to_string().replace('\'', "'\\''")));
        }
        std::fs::write(&list, body).at(&list)?;
        let args: Vec<OsString> = vec![
            "-loglevel".into(),
            "error".into(),
            "-y".into(),
            "-f".into(),
            "concat".into(),
            "-safe".into(),
            "0".into(),
            "-i".into(),
            list.clone().into(),
            "-c".into(),
            "copy".into(),
            output.into(),
        ];
        let result = self.run(&args);
        let _ = std::fs::remove_file(&list);
        result.map(|_| ())
    }

    /// Encode raw RGB frames into an H.264 file.
    pub fn encode_frames(
        &self,
        frames: impl Iterator<Item = RgbImage>,
        width: u32,
        height: u32,
        fps: f64,
        output: &Path,
    ) -> Result<()> {
        let mut child = self
            .command()
            .args(["-loglevel", "error", "-y", "-f", "rawvideo", "-pix_fmt", "rgb24"])
            .arg("-s")
            .arg(format!("{width}x{height}"))
            .arg("-r")
            .arg(fps.to_string())
            .args(["-i", "-", "-c:v", "libx264", "-preset", "ultrafast", "-pix_fmt", "yuv420p"])
            .arg(output)
            .stdin(Stdio::piped())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| spawn_error(&self.program, e))?;
        let mut stderr = child.stderr.take().expect("piped");
        let drain = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stderr.read_to_end(&mut buf);
            buf
        });
        {
            let mut stdin = child.stdin.take().expect("piped");
            for frame in frames {
                if stdin.write_all(frame.as_raw()).is_err() {
                    break;
                }
            }
        }
        let status = child.wait().at(&self.program)?;
        let diag = drain.join().unwrap_or_default();
        if !status.success() {
            return Err(Error::Transcoder {
                status: status.to_string(),
                diagnostics: tail(&diag),
            });
        }
        Ok(())
    }
}

fn missing(message: String) -> Error {
    Error::Environment {
        message,
        remedy: Some(format!(
            "install ffmpeg (with libx264) on PATH or set {TRANSCODER_ENV} to its location"
        )),
    }
}

fn spawn_error(program: &Path, e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::NotFound {
        missing(format!("cannot execute {}", program.display()))
    } else {
        Error::io(program, e)
    }
}

fn ensure_readable(input: &Path) -> Result<()> {
    std::fs::File::open(input).map(|_| ()).map_err(|e| Error::Environment {
        message: format!("cannot read source {}: {e}", input.display()),
        remedy: None,
    })
}

fn tail(stderr: &[u8]) -> String {
    let text = String::from_utf8_lossy(stderr);
    let lines: Vec<&str> = text.lines().collect();
    lines[lines.len().saturating_sub(20)..].join("\n")
}

/// Pull duration, frame rate and frame size out of `ffmpeg -i` output.
pub fn parse_probe(text: &str) -> Option<ProbeInfo> {
    let dur = text.split("Duration: ").nth(1)?.split(',').next()?.trim();
    let mut hms = dur.split(':').map(|p| p.parse::<f64>());
    let duration = hms.next()?.ok()? * 3600.0 + hms.next()?.ok()? * 60.0 + hms.next()?.ok()?;

    let video = text.lines().find(|l| l.contains("Stream #") && l.contains("Video:"))?;
    let fps = video
        .split(',')
        .map(str::trim)
        .find_map(|f| f.strip_suffix(" fps").and_then(|v| v.parse::<f64>().ok()))?;
    let (width, height) = video.split([',', ' ']).find_map(|tok| {
        let (w, h) = tok.split_once('x')?;
        let (w, h) = (w.parse::<u32>().ok()?, h.parse::<u32>().ok()?);
        (w > 0 && h > 0).then_some((w, h))
    })?;
    Some(ProbeInfo {
        duration,
        fps,
        width,
        height,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "Input #0, mov,mp4,m4a,3gp,3g2,mj2, from 'in.mp4':
  Duration: 00:05:00.04, start: 0.000000, bitrate: 95 kb/s
  Stream #0:0[0x1](und): Video: h264 (High) (avc1 / 0x31637661), yuv420p(progressive), 640x480 [SAR 1:1 DAR 4:3], 91 kb/s, 25 fps, 25 tbr, 12800 tbn (default)
At least one output file must be specified";

    #[test]
    fn probe_output_parses() {
        let p = parse_probe(SAMPLE).unwrap();
        assert!((p.duration - 300.04).abs() < 1e-9);
        assert_eq!(p.fps, 25.0);
        assert_eq!((p.width, p.height), (640, 480));
    }

    #[test]
    fn probe_rejects_garbage() {
        assert!(parse_probe("no such file").is_none());
    }

    #[test]
    fn missing_program_is_environment_error() {
        let t = Transcoder::new("/nonexistent/ffmpeg");
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("x.mp4");
        std::fs::write(&f, b"x").unwrap();
        match t.probe(&f) {
            Err(Error::Environment { remedy: Some(r), .. }) => assert!(r.contains("ffmpeg")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unreadable_source_is_environment_error() {
        let t = Transcoder::new("/nonexistent/ffmpeg");
        assert!(matches!(
            t.probe(Path::new("/definitely/not/here.mp4")),
            Err(Error::Environment { .. })
        ));
    }
}
