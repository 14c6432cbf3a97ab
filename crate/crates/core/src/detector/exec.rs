//! Scoring through an external process.
//!
//! The child reads one JSON request per line on stdin,
//! `{"id": "...", "jpeg_b64": "..."}`, and answers one JSON line per request
//! on stdout, `{"id": "...", "scores": {"<label>": p, ...}}`. Responses are
//! matched by id, so a child may answer out of order.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};

use base64::Engine;
use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::ScoreBackend;
use crate::error::{BackendError, Result};
use crate::packager::grid::encode_jpeg;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub id: String,
    pub jpeg_b64: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub id: String,
    pub scores: HashMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct ExecBackend {
    program: PathBuf,
    args: Vec<String>,
    labels: Vec<String>,
    /// Children spawned per batch; each receives a contiguous share.
    pub pool: usize,
    pub jpeg_quality: u8,
}

impl ExecBackend {
    pub fn new(program: impl Into<PathBuf>, args: Vec<String>, labels: Vec<String>) -> Self {
        Self {
            program: program.into(),
            args,
            labels,
            pool: 1,
            jpeg_quality: 90,
        }
    }

    /// Split a shell-like command line on whitespace.
    pub fn from_command_line(cmd: &str, labels: Vec<String>) -> std::result::Result<Self, BackendError> {
        let mut parts = cmd.split_whitespace().map(String::from);
        let program = parts
            .next()
            .ok_or_else(|| BackendError::NotConfigured("empty backend command".into()))?;
        Ok(Self::new(program, parts.collect(), labels))
    }

    fn spawn(&self) -> std::result::Result<Child, BackendError> {
        if self.labels.is_empty() {
            return Err(BackendError::NotConfigured("no class labels given".into()));
        }
        Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| {
                BackendError::NotConfigured(format!("cannot start {}: {e}", self.program.display()))
            })
    }

    fn run_child(
        &self,
        requests: Vec<ScoreRequest>,
    ) -> std::result::Result<HashMap<String, Vec<f64>>, BackendError> {
        let mut child = self.spawn()?;
        let mut stdin = child.stdin.take().expect("piped");
        let stdout = child.stdout.take().expect("piped");
        let mut stderr = child.stderr.take().expect("piped");
        let wanted = requests.len();

        let writer = std::thread::spawn(move || -> std::io::Result<()> {
            for req in &requests {
                let line = serde_json::to_string(req).map_err(std::io::Error::other)?;
                stdin.write_all(line.as_bytes())?;
                stdin.write_all(b"\n")?;
            }
            stdin.flush()
            // dropping stdin closes the pipe
        });
        let err_drain = std::thread::spawn(move || {
            let mut buf = String::new();
            let _ = stderr.read_to_string(&mut buf);
            buf
        });

        let mut rows = HashMap::with_capacity(wanted);
        let mut failure = None;
        for line in BufReader::new(stdout).lines() {
            let line = match line {
                Ok(l) => l,
                Err(e) => {
                    failure = Some(format!("reading backend output: {e}"));
                    break;
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            match self.parse_response(&line) {
                Ok((id, probs)) => {
                    rows.insert(id, probs);
                }
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
            if rows.len() == wanted {
                break;
            }
        }
        if failure.is_some() {
            let _ = child.kill();
        }
        let status = child.wait().ok();
        let _ = writer.join();
        let diag = err_drain.join().unwrap_or_default();
        if let Some(f) = failure {
            return Err(BackendError::Crashed(f));
        }
        if rows.len() < wanted {
            return Err(BackendError::Crashed(format!(
                "backend exited ({}) after {} of {wanted} responses{}",
                status.map_or("unknown status".into(), |s| s.to_string()),
                rows.len(),
                if diag.trim().is_empty() {
                    String::new()
                } else {
                    format!(": {}", diag.trim())
                }
            )));
        }
        Ok(rows)
    }

    fn parse_response(&self, line: &str) -> std::result::Result<(String, Vec<f64>), String> {
        let resp: ScoreResponse =
            serde_json::from_str(line).map_err(|e| format!("malformed backend response {line:?}: {e}"))?;
        let probs = self
            .labels
            .iter()
            .map(|l| {
                resp.scores
                    .get(l)
                    .copied()
                    .ok_or_else(|| format!("response {} lacks label {l:?}", resp.id))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok((resp.id, probs))
    }
}

impl ScoreBackend for ExecBackend {
    fn id(&self) -> String {
        format!("exec:{}", self.program.display())
    }

    fn labels(&self) -> &[String] {
        &self.labels
    }

    fn score_batch(&self, first_index: u64, images: &[RgbImage]) -> Result<Vec<Vec<f64>>> {
        if images.is_empty() {
            return Ok(Vec::new());
        }
        let engine = base64::engine::general_purpose::STANDARD;
        let requests: Vec<ScoreRequest> = images
            .iter()
            .enumerate()
            .map(|(i, img)| {
                Ok(ScoreRequest {
                    id: (first_index + i as u64).to_string(),
                    jpeg_b64: engine.encode(encode_jpeg(img, self.jpeg_quality)?),
                })
            })
            .collect::<Result<_>>()?;

        let workers = self.pool.clamp(1, requests.len());
        let share = requests.len().div_ceil(workers);
        let mut chunks: Vec<Vec<ScoreRequest>> = Vec::with_capacity(workers);
        let mut it = requests.into_iter().peekable();
        while it.peek().is_some() {
            chunks.push(it.by_ref().take(share).collect());
        }
        let results: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|chunk| s.spawn(move || self.run_child(chunk)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(BackendError::Crashed("worker panicked".into()))))
                .collect()
        });
        let mut all = HashMap::with_capacity(images.len());
        for r in results {
            all.extend(r?);
        }
        (0..images.len() as u64)
            .map(|i| {
                let id = (first_index + i).to_string();
                all.remove(&id)
                    .ok_or_else(|| BackendError::Crashed(format!("no response for id {id}")).into())
            })
            .collect()
    }
}
