//! CSV history file.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};

use crate::abc::{HistoryRecord, HistorySink};
use crate::error::{Error, Result};

/// Column order of `history.csv`.
pub const HISTORY_HEADER: [&str; 10] = [
    "iteration",
    "phase",
    "source_index",
    "candidate",
    "objective",
    "fitness",
    "trials",
    "cache_hit",
    "elapsed_seconds",
    "is_global_best",
];

/// Appends one row per evaluation event.
pub struct CsvHistory {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl CsvHistory {
    /// Creates (or truncates) the file and writes the header.
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(file);
        writer
            .write_record(HISTORY_HEADER)
            .and_then(|_| writer.flush().map_err(csv::Error::from))
            .map_err(|e| Error::io(path, into_io(e)))?;
        Ok(CsvHistory {
            path: path.to_owned(),
            writer,
        })
    }

    /// Keeps the header and the first `rows` data rows, dropping anything a
    /// previous run wrote after its last checkpoint, and appends from there.
    pub fn resume(path: &Path, rows: u64) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut kept = String::new();
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .transpose()
            .map_err(|e| Error::io(path, e))?
            .unwrap_or_default();
        if header != HISTORY_HEADER.join(",") {
            return Err(Error::ResumeRefused(format!(
                "{} does not start with the history header",
                path.display()
            )));
        }
        kept.push_str(&header);
        kept.push('\n');
        for i in 0..rows {
            match lines.next().transpose().map_err(|e| Error::io(path, e))? {
                Some(line) => {
                    kept.push_str(&line);
                    kept.push('\n');
                }
                None => {
                    return Err(Error::ResumeRefused(format!(
                        "{} holds {i} rows but the checkpoint expects {rows}",
                        path.display()
                    )))
                }
            }
        }
        fs::write(path, kept).map_err(|e| Error::io(path, e))?;
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(CsvHistory {
            path: path.to_owned(),
            writer: csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

fn into_io(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

impl HistorySink for CsvHistory {
    fn record(&mut self, record: &HistoryRecord) -> io::Result<()> {
        self.writer.serialize(record).map_err(into_io)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.writer.flush()
    }
}

/// Reads a history file back into records.
pub fn read_history(path: &Path) -> Result<Vec<HistoryRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::io(path, into_io(e)))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::io(path, into_io(e))))
        .collect()
}
