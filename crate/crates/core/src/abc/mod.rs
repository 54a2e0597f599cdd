//! The Artificial Bee Colony loop.
//!
//! A run alternates three phases per iteration. Employees draw one neighbor
//! per food source, onlookers pick sources by roulette wheel over fitness and
//! draw a neighbor of each pick, and scouts re-sample every source whose
//! trial counter reached the abandonment limit. Replacement is greedy: a
//! candidate displaces its source only on strictly higher fitness.
//!
//! All random draws of a phase happen before any evaluation of that phase,
//! in a fixed order (sources in index order, onlookers in onlooker order).
//! Evaluations may then run on several workers and are merged back in order,
//! so results do not depend on the worker count.

mod colony;
mod history;
mod selection;

pub use colony::{
    BestRecord, ColonyConfig, ColonyState, Counters, Engine, EngineOptions, Flow, FoodSource,
    Phase, RunOutcome, FAILED_OBJECTIVE,
};
pub use history::{HistoryRecord, HistorySink, NullSink, RecordPhase};
pub use selection::{fitness_transform, roulette_index, roulette_select, selection_probabilities};

use std::fmt::Debug;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::Result;
use crate::rng::ColonyRng;

/// Where positions live and how the colony moves between them.
pub trait SearchDomain: Sync {
    type Position: Clone + Debug + PartialEq + Send + Sync + Serialize + DeserializeOwned;

    /// A fresh uniformly random position (initialization and scouting).
    fn random_position(&self, rng: &mut ColonyRng) -> Self::Position;

    /// Whether [`SearchDomain::neighbor`] wants a partner food source. When
    /// true the engine draws one uniformly among the other sources.
    fn uses_partner(&self) -> bool {
        false
    }

    /// A neighbor of `position`. `partner` is `None` when the domain does not
    /// use partners or the colony has a single source.
    fn neighbor(
        &self,
        position: &Self::Position,
        partner: Option<&Self::Position>,
        rng: &mut ColonyRng,
    ) -> Result<Self::Position>;

    /// Canonical string form, used as the visited-cache key and in history.
    fn key(&self, position: &Self::Position) -> String;
}
