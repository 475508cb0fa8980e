//! Line-delimited JSON run records: one line per finished epoch followed by
//! a summary line.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::stopping::StopReason;
use crate::{Result, TrainError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_accuracy: f64,
    /// Learned temporal threshold, for variants with a temporal stream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Checkpoint written after this epoch, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
    pub train_samples: usize,
    pub val_samples: usize,
    /// Steps skipped because of non-finite gradients.
    pub aborted_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_checkpoint: Option<String>,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    /// Set when any step saw a non-finite gradient.
    pub non_finite: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecordLine {
    Epoch(EpochRecord),
    Summary(RunSummary),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub epochs: Vec<EpochRecord>,
    pub summary: RunSummary,
}

impl RunRecord {
    pub fn lines(&self) -> Vec<RecordLine> {
        self.epochs
            .iter()
            .cloned()
            .map(RecordLine::Epoch)
            .chain([RecordLine::Summary(self.summary.clone())])
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        self.lines().iter().map(|l| serde_json::to_string(l).expect("record serializes") + "\n").collect()
    }

    /// Parses a finished record; the summary must be the last line.
    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(io(path))?;
        let mut epochs = Vec::new();
        let mut summary = None;
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io(path))?;
            if line.trim().is_empty() {
                continue;
            }
            if summary.is_some() {
                return Err(TrainError::Format(format!("line {}: record continues after its summary", n + 1)));
            }
            match serde_json::from_str(&line).map_err(|e| TrainError::Format(format!("line {}: {e}", n + 1)))? {
                RecordLine::Epoch(e) => epochs.push(e),
                RecordLine::Summary(s) => summary = Some(s),
            }
        }
        let summary = summary.ok_or_else(|| TrainError::Format(format!("{} has no summary line", path.display())))?;
        Ok(Self { epochs, summary })
    }
}

/// Appends record lines as the run progresses.
pub struct RecordWriter {
    path: PathBuf,
    file: File,
}

impl RecordWriter {
    /// Starts a fresh record at `path`.
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io(dir))?;
        }
        File::create(path).map_err(io(path))?;
        let file = OpenOptions::new().append(true).open(path).map_err(io(path))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    /// Continues an existing record.
    pub fn append_to(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().append(true).open(path).map_err(io(path))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn append(&mut self, line: &RecordLine) -> Result<()> {
        let text = serde_json::to_string(line).expect("record serializes") + "\n";
        self.file.write_all(text.as_bytes()).map_err(io(&self.path))?;
        self.file.flush().map_err(io(&self.path))
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io {
        path: path.display().to_string(),
        source,
    }
}
