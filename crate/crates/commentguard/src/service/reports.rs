//! Append-only store for misclassification reports.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use commentguard_core::BinaryLabel;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub comment: String,
    pub predicted: BinaryLabel,
    pub reported: BinaryLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_ts: Option<String>,
    pub server_ts: String,
    pub model: String,
}

pub struct ReportStore {
    path: PathBuf,
    file: Mutex<File>,
}

impl ReportStore {
    pub fn open(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ReportStore {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes one line and syncs it to disk before returning.
    pub fn append(&self, record: &ReportRecord) -> io::Result<()> {
        let mut line = serde_json::to_vec(record).map_err(io::Error::other)?;
        line.push(b'\n');
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        file.write_all(&line)?;
        file.sync_data()
    }
}

/// All records in a store file.
pub fn read_reports(path: &Path) -> io::Result<Vec<ReportRecord>> {
    BufReader::new(File::open(path)?)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| {
            serde_json::from_str(&l?).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
        })
        .collect()
}
