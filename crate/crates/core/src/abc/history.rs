use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordPhase {
    Scout,
    Employee,
    Onlooker,
    FullTrain,
}

impl fmt::Display for RecordPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordPhase::Scout => "scout",
            RecordPhase::Employee => "employee",
            RecordPhase::Onlooker => "onlooker",
            RecordPhase::FullTrain => "full_train",
        })
    }
}

/// One evaluation event. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    /// 0 for initialization, `t` for events of the t-th iteration.
    pub iteration: u64,
    pub phase: RecordPhase,
    pub source_index: usize,
    pub candidate: String,
    pub objective: f64,
    pub fitness: f64,
    /// Trial counter of the source right after this event.
    pub trials: u32,
    pub cache_hit: bool,
    pub elapsed_seconds: f64,
    /// True exactly when this event strictly improved the global best.
    pub is_global_best: bool,
}

pub trait HistorySink {
    fn record(&mut self, record: &HistoryRecord) -> io::Result<()>;

    /// Called at the end of every iteration and when a run stops.
    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl HistorySink for Vec<HistoryRecord> {
    fn record(&mut self, record: &HistoryRecord) -> io::Result<()> {
        self.push(record.clone());
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl HistorySink for NullSink {
    fn record(&mut self, _: &HistoryRecord) -> io::Result<()> {
        Ok(())
    }
}

impl<S: HistorySink + ?Sized> HistorySink for &mut S {
    fn record(&mut self, record: &HistoryRecord) -> io::Result<()> {
        (**self).record(record)
    }

    fn flush(&mut self) -> io::Result<()> {
        (**self).flush()
    }
}
