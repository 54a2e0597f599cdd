//! Run configuration, persistence and orchestration.
//!
//! A run directory holds:
//!
//! - `config.resolved.toml`: the config with every default filled in;
//! - `history.csv`: one row per evaluation event;
//! - `checkpoint.json`: the latest colony state, tagged with a config hash;
//! - `summary.json`: the best candidate and run counters;
//! - `best_network.bin`: trained parameters of the winner (lfe runs only).

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod history;
pub mod runner;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use config::{load_config, parse_config, DatasetName, Mode, RunConfig, Strategy};
pub use history::{read_history, CsvHistory, HISTORY_HEADER};
pub use runner::{
    evaluate_candidate, load_dataset, resume, run, RunControl, RunReport, Summary, CHECKPOINT_FILE,
    HISTORY_FILE, NETWORK_FILE, RESOLVED_CONFIG_FILE, SUMMARY_FILE,
};
