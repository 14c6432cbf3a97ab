use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::mapping::{container_count, ThumbGeometry};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PLAYLIST_FILE: &str = "playlist.m3u8";
pub const CONTAINER_PATTERN: &str = "thumbs/thumb_%04d.jpg";
pub const SEGMENT_PATTERN: &str = "segments/seg_%05d.ts";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Genre {
    Western,
    Action,
    SportSoccer,
    SportCricket,
    #[default]
    Other,
}

impl Genre {
    pub const ALL: [Genre; 5] = [
        Genre::Western,
        Genre::Action,
        Genre::SportSoccer,
        Genre::SportCricket,
        Genre::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Genre::Western => "western",
            Genre::Action => "action",
            Genre::SportSoccer => "sport_soccer",
            Genre::SportCricket => "sport_cricket",
            Genre::Other => "other",
        }
    }

    /// Events offered for titles of this genre.
    pub fn default_vocabulary(self) -> Vec<String> {
        let labels: &[&str] = match self {
            Genre::Western => &["horse-race", "horse-riding", "archery", "punch"],
            Genre::Action => &["tai-chi", "nunchucks", "archery", "punch"],
            Genre::SportSoccer => &["soccer-juggling", "soccer-shot"],
            Genre::SportCricket => &["cricket-bowling", "cricket-shot"],
            Genre::Other => &EVENTS,
        };
        labels.iter().map(|s| s.to_string()).collect()
    }

    /// Preset preference sets shown to a viewer picking events.
    pub fn event_options(self) -> Vec<Vec<String>> {
        let sets: Vec<Vec<&str>> = match self {
            Genre::Western => vec![
                vec!["horse-riding", "horse-race"],
                vec!["archery", "punch"],
                vec!["horse-riding", "horse-race", "archery", "punch"],
            ],
            Genre::Action => vec![
                vec!["archery", "punch"],
                vec!["tai-chi", "nunchucks"],
                vec!["tai-chi", "nunchucks", "archery", "punch"],
            ],
            Genre::SportSoccer => vec![
                vec!["soccer-juggling"],
                vec!["soccer-shot"],
                vec!["soccer-juggling", "soccer-shot"],
            ],
            Genre::SportCricket => vec![
                vec!["cricket-bowling"],
                vec!["cricket-shot"],
                vec!["cricket-bowling", "cricket-shot"],
            ],
            Genre::Other => EVENTS.iter().map(|e| vec![*e]).collect(),
        };
        sets.into_iter()
            .map(|s| s.into_iter().map(String::from).collect())
            .collect()
    }
}

/// The ten events the default vocabulary draws from.
pub const EVENTS: [&str; 10] = [
    "archery",
    "cricket-bowling",
    "cricket-shot",
    "horse-race",
    "horse-riding",
    "nunchucks",
    "punch",
    "soccer-juggling",
    "soccer-shot",
    "tai-chi",
];

impl fmt::Display for Genre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Genre {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Genre::ALL
            .into_iter()
            .find(|g| g.as_str() == norm)
            .or(match norm.as_str() {
                "soccer" => Some(Genre::SportSoccer),
                "cricket" => Some(Genre::SportCricket),
                _ => None,
            })
            .ok_or_else(|| Error::Usage(format!("unknown genre {s:?}")))
    }
}

/// Per-title metadata written next to the packaged media.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoManifest {
    pub video_id: String,
    pub title: String,
    pub genre: Genre,
    pub duration: f64,
    pub fps: f64,
    pub total_thumbs: u64,
    pub container_count: u64,
    pub geometry: ThumbGeometry,
    pub segment_playlist: String,
    pub segment_count: usize,
    pub container_name_pattern: String,
    pub segment_name_pattern: String,
    pub event_vocabulary: Vec<String>,
    pub event_options: Vec<Vec<String>>,
    /// Original media the title was packaged from, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl VideoManifest {
    pub fn container_uri(&self, index: u64) -> String {
        expand_index_pattern(&self.container_name_pattern, index)
    }

    pub fn segment_uri(&self, index: usize) -> String {
        expand_index_pattern(&self.segment_name_pattern, index as u64)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        let expected = self.geometry.thumbs_for_duration(self.duration);
        if self.total_thumbs != expected {
            return Err(Error::Validation(format!(
                "manifest lists {} thumbnails but a {}s title has {expected}",
                self.total_thumbs, self.duration
            )));
        }
        if self.container_count != container_count(self.total_thumbs, &self.geometry) {
            return Err(Error::Validation(format!(
                "manifest lists {} containers for {} thumbnails",
                self.container_count, self.total_thumbs
            )));
        }
        Ok(())
    }

    /// Check that every container file is present under `title_dir`.
    pub fn check_files(&self, title_dir: &Path) -> Result<()> {
        for i in 0..self.container_count {
            let p = title_dir.join(self.container_uri(i));
            if !p.is_file() {
                return Err(Error::Integrity(format!("missing container {}", p.display())));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        let manifest: Self = serde_json::from_str(&text)?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).at(path)
    }
}

/// Expand a printf-style `%0Nd` / `%d` placeholder.
pub fn expand_index_pattern(pattern: &str, index: u64) -> String {
    let Some(pos) = pattern.find('%') else {
        return pattern.to_string();
    };
    let rest = &pattern[pos + 1..];
    let Some(d) = rest.find('d') else {
        return pattern.to_string();
    };
    let width: usize = rest[..d].trim_start_matches('0').parse().unwrap_or(0);
    format!(
        "{}{:0width$}{}",
        &pattern[..pos],
        index,
        &rest[d + 1..],
        width = width
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patterns_expand() {
        assert_eq!(expand_index_pattern(CONTAINER_PATTERN, 5), "thumbs/thumb_0005.jpg");
        assert_eq!(expand_index_pattern(SEGMENT_PATTERN, 123), "segments/seg_00123.ts");
        assert_eq!(expand_index_pattern("x_%d.ts", 7), "x_7.ts");
        assert_eq!(expand_index_pattern("plain", 7), "plain");
    }

    #[test]
    fn genre_parsing() {
        assert_eq!("western".parse::<Genre>().unwrap(), Genre::Western);
        assert_eq!("sport-soccer".parse::<Genre>().unwrap(), Genre::SportSoccer);
        assert_eq!("cricket".parse::<Genre>().unwrap(), Genre::SportCricket);
        assert!("romance".parse::<Genre>().is_err());
        assert_eq!(Genre::default(), Genre::Other);
    }

    #[test]
    fn western_presets() {
        let opts = Genre::Western.event_options();
        assert_eq!(opts.len(), 3);
        assert_eq!(opts[2], ["horse-riding", "horse-race", "archery", "punch"]);
        let vocab = Genre::Western.default_vocabulary();
        assert!(opts.iter().flatten().all(|e| vocab.contains(e)));
    }

    #[test]
    fn genre_serializes_snake_case() {
        assert_eq!(serde_json::to_string(&Genre::SportCricket).unwrap(), "\"sport_cricket\"");
    }
}
