//! M3U8 media playlists: the small VoD dialect the packager writes and the
//! client reads back.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mapping::SegmentTimeline;

pub const CONTENT_TYPE: &str = "application/vnd.apple.mpegurl";

#[derive(Debug, Clone, PartialEq)]
pub struct MediaSegment {
    pub duration: f64,
    pub uri: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MediaPlaylist {
    pub version: u32,
    pub target_duration: u64,
    pub segments: Vec<MediaSegment>,
    pub end_list: bool,
    /// Positions (into `segments`) preceded by `#EXT-X-DISCONTINUITY`.
    pub discontinuity_before: BTreeSet<usize>,
}

impl MediaPlaylist {
    /// A finished VoD playlist; the target duration is the ceiling of the
    /// longest segment.
    pub fn vod(segments: Vec<MediaSegment>, discontinuity_before: BTreeSet<usize>) -> Self {
        let target_duration = target_duration_for(segments.iter().map(|s| s.duration));
        Self {
            version: 3,
            target_duration,
            segments,
            end_list: true,
            discontinuity_before,
        }
    }

    pub fn timeline(&self) -> Result<SegmentTimeline> {
        SegmentTimeline::new(self.segments.iter().map(|s| s.duration).collect())
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, seg) in self.segments.iter().enumerate() {
            if !(seg.duration.is_finite() && seg.duration > 0.0) {
                return Err(Error::Validation(format!(
                    "segment {i} has invalid duration {}",
                    seg.duration
                )));
            }
            if seg.duration > self.target_duration as f64 {
                return Err(Error::Validation(format!(
                    "segment {i} lasts {}s, above the target duration {}s",
                    seg.duration, self.target_duration
                )));
            }
        }
        if let Some(&pos) = self.discontinuity_before.iter().find(|&&p| p >= self.segments.len()) {
            return Err(Error::Validation(format!(
                "discontinuity before position {pos} but only {} segments",
                self.segments.len()
            )));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, "#EXTM3U")) => {}
            Some((line, _)) => {
                return Err(Error::Format {
                    line,
                    message: "playlist must start with #EXTM3U".into(),
                })
            }
            None => {
                return Err(Error::Format {
                    line: 1,
                    message: "empty playlist".into(),
                })
            }
        }

        let mut version = 1;
        let mut target_duration = None;
        let mut segments = Vec::new();
        let mut end_list = false;
        let mut discontinuity_before = BTreeSet::new();
        let mut pending: Option<(usize, f64)> = None;

        for (line, content) in lines {
            if content.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Format { line, message };
            if let Some(tag) = content.strip_prefix('#') {
                if end_list {
                    continue;
                }
                if let Some(v) = tag.strip_prefix("EXT-X-VERSION:") {
                    version = v.parse().map_err(|_| bad(format!("bad version {v:?}")))?;
                } else if let Some(v) = tag.strip_prefix("EXT-X-TARGETDURATION:") {
                    target_duration =
                        Some(v.parse().map_err(|_| bad(format!("bad target duration {v:?}")))?);
                } else if let Some(v) = tag.strip_prefix("EXTINF:") {
                    if pending.is_some() {
                        return Err(bad("two #EXTINF tags without a URI between them".into()));
                    }
                    let dur = v.split(',').next().unwrap_or_default().trim();
                    let dur: f64 = dur
                        .parse()
                        .map_err(|_| bad(format!("bad segment duration {dur:?}")))?;
                    pending = Some((line, dur));
                } else if tag == "EXT-X-DISCONTINUITY" {
                    discontinuity_before.insert(segments.len());
                } else if tag == "EXT-X-ENDLIST" {
                    end_list = true;
                }
                // Other tags and comments are tolerated and dropped.
                continue;
            }
            match pending.take() {
                Some((_, duration)) => segments.push(MediaSegment {
                    duration,
                    uri: content.to_string(),
                }),
                None => return Err(bad(format!("URI {content:?} without a preceding #EXTINF"))),
            }
        }
        if let Some((line, _)) = pending {
            return Err(Error::Format {
                line,
                message: "#EXTINF without a segment URI".into(),
            });
        }
        let target_duration = target_duration.ok_or(Error::Format {
            line: 1,
            message: "missing #EXT-X-TARGETDURATION".into(),
        })?;
        Ok(Self {
            version,
            target_duration,
            segments,
            end_list,
            discontinuity_before,
        })
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str("#EXTM3U\n");
        let _ = writeln!(out, "#EXT-X-VERSION:{}", self.version);
        let _ = writeln!(out, "#EXT-X-TARGETDURATION:{}", self.target_duration);
        for (i, seg) in self.segments.iter().enumerate() {
            if self.discontinuity_before.contains(&i) {
                out.push_str("#EXT-X-DISCONTINUITY\n");
            }
            let _ = writeln!(out, "#EXTINF:{},", format_duration(seg.duration));
            out.push_str(&seg.uri);
            out.push('\n');
        }
        if self.end_list {
            out.push_str("#EXT-X-ENDLIST\n");
        }
        out
    }
}

pub fn target_duration_for(durations: impl IntoIterator<Item = f64>) -> u64 {
    durations.into_iter().fold(0.0_f64, f64::max).ceil() as u64
}

/// Shortest decimal that parses back to the same `f64`, always with a
/// fractional part so version-3 players read it as a float.
fn format_duration(d: f64) -> String {
    let s = d.to_string();
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}
