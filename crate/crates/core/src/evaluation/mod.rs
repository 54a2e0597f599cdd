//! Evaluation strategies: how a position becomes a "lower is better"
//! objective.
//!
//! - [`crate::benchmarks::BenchmarkEvaluator`] passes a continuous point to a
//!   benchmark function;
//! - [`SurrogateEvaluator`] scores architectures with a seeded hash table in
//!   constant time, so whole spaces can be enumerated for comparison;
//! - [`LfeEvaluator`] builds each architecture and trains it for a few epochs,
//!   scoring it by validation error.

pub mod data;
pub mod idx;
mod lfe;
mod surrogate;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use data::{Dataset, DatasetSplits, SplitData};
pub use lfe::{full_train_best, lfe_evaluate, FullTrainOutcome, LfeConfig, LfeEvaluator};
pub use surrogate::SurrogateEvaluator;

/// Side information reported with an objective. Fields a strategy does not
/// produce stay `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub loss: Option<f64>,
    pub param_count: Option<usize>,
    pub epochs_run: Option<usize>,
    pub test_accuracy: Option<f64>,
    /// Zero unless the engine was asked to record timings.
    pub wall_clock_seconds: f64,
    pub failed: bool,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub objective: f64,
    pub metrics: Metrics,
    pub cache_hit: bool,
}

impl EvaluationResult {
    pub fn new(objective: f64, metrics: Metrics) -> Self {
        EvaluationResult {
            objective,
            metrics,
            cache_hit: false,
        }
    }

    pub fn objective_only(objective: f64) -> Self {
        Self::new(objective, Metrics::default())
    }
}

/// Maps a position to an objective. Implementations are called from several
/// worker threads at once when the engine runs with `workers > 1`, and must
/// return the same result for the same position every time.
pub trait Evaluator<P>: Sync {
    fn evaluate(&self, position: &P) -> Result<EvaluationResult>;
}

impl<P, F> Evaluator<P> for F
where
    F: Fn(&P) -> Result<EvaluationResult> + Sync,
{
    fn evaluate(&self, position: &P) -> Result<EvaluationResult> {
        self(position)
    }
}
