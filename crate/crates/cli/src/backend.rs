use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use ltcsum_core::detector::{load_scorefile, CentroidBackend, CentroidModel, ExecBackend, ScorefileBackend};
use ltcsum_core::ScoreBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Scorefile,
    Centroid,
    Exec,
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    /// Scoring backend.
    #[arg(long, value_enum, default_value = "centroid")]
    pub backend: BackendKind,

    /// Precomputed scores (`thumb_index,<label>,...`) for the scorefile backend.
    #[arg(long, value_name = "CSV")]
    pub scores: Option<PathBuf>,

    /// Centroid model (`label,f0..f47`) for the centroid backend.
    #[arg(long, value_name = "CSV")]
    pub model: Option<PathBuf>,

    /// Command line of an external scorer speaking line-delimited JSON.
    #[arg(long = "exec", value_name = "COMMAND")]
    pub exec_command: Option<String>,

    /// Class labels, in column order. Required for `exec`; read from the
    /// file header for `scorefile` when omitted.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,

    /// Child processes kept by the exec backend.
    #[arg(long, default_value_t = 1)]
    pub exec_pool: usize,
}

impl BackendArgs {
    pub fn build(&self) -> Result<Arc<dyn ScoreBackend>> {
        Ok(match self.backend {
            BackendKind::Scorefile => {
                let path = self.scores.as_deref().context("--backend scorefile needs --scores")?;
                let labels = if self.labels.is_empty() {
                    header_labels(path)?
                } else {
                    self.labels.clone()
                };
                Arc::new(ScorefileBackend::new(load_scorefile(path, &labels)?))
            }
            BackendKind::Centroid => {
                let path = self.model.as_deref().context("--backend centroid needs --model")?;
                Arc::new(CentroidBackend::new(CentroidModel::load(path)?))
            }
            BackendKind::Exec => {
                let cmd = self.exec_command.as_deref().context("--backend exec needs --exec")?;
                if self.labels.is_empty() {
                    bail!("--backend exec needs --labels");
                }
                let mut b = ExecBackend::from_command_line(cmd, self.labels.clone())?;
                b.pool = self.exec_pool.max(1);
                Arc::new(b)
            }
        })
    }
}

fn header_labels(path: &Path) -> Result<Vec<String>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = r.headers().with_context(|| format!("reading header of {}", path.display()))?;
    Ok(header.iter().skip(1).map(|s| s.trim().to_string()).collect())
}
