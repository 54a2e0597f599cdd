//! TOML run configuration.
//!
//! A config file is parsed into an all-optional raw form, checked against the
//! selected mode (sections that do not belong to the mode are rejected) and
//! resolved into a [`RunConfig`] with every default filled in. The resolved
//! config serializes back to TOML in the same layout, so a snapshot reloads
//! to an identical value.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::abc::ColonyConfig;
use crate::benchmarks::{BenchmarkFunction, ContinuousBox};
use crate::error::{Error, Result};
use crate::evaluation::LfeConfig;
use crate::nas::{ArchitectureSpace, OperationSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Nas,
    Benchmark,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Lfe,
    Surrogate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetName {
    TwoMoons,
    Circles,
    Blobs,
    Idx,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColonySection {
    pub num_food_sources: usize,
    pub num_onlookers: usize,
    pub abandonment_limit: u32,
    pub iterations: u64,
    pub seed: u64,
    /// Cap on evaluation-strategy invocations; 0 means unlimited.
    pub max_evaluations: u64,
}

impl ColonySection {
    pub fn colony_config(&self) -> ColonyConfig {
        ColonyConfig {
            num_food_sources: self.num_food_sources,
            num_onlookers: self.num_onlookers,
            abandonment_limit: self.abandonment_limit,
            iterations: self.iterations,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSection {
    pub function: BenchmarkFunction,
    pub dimension: usize,
    pub lower: f64,
    pub upper: f64,
}

impl BenchmarkSection {
    pub fn domain(&self) -> Result<ContinuousBox> {
        ContinuousBox::cube(self.dimension, self.lower, self.upper)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    pub depth: usize,
    pub vocabulary: Vec<OperationSpec>,
}

impl SpaceSection {
    pub fn space(&self) -> Result<ArchitectureSpace> {
        ArchitectureSpace::new(self.depth, self.vocabulary.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lfe: Option<LfeConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub name: DatasetName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    pub test_fraction: f64,
    pub seed: u64,
}

/// Fully resolved run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub output_dir: PathBuf,
    /// Checkpoint every this many iterations; 0 checkpoints only at the end.
    pub checkpoint_every: u64,
    /// Wall-clock budget in seconds, checked at phase barriers; 0 disables.
    pub max_seconds: f64,
    pub workers: usize,
    pub memoize: bool,
    pub record_wall_clock: bool,
    pub colony: ColonySection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvaluationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<Mode>,
    output_dir: Option<PathBuf>,
    checkpoint_every: Option<u64>,
    max_seconds: Option<f64>,
    workers: Option<usize>,
    memoize: Option<bool>,
    record_wall_clock: Option<bool>,
    colony: Option<RawColony>,
    benchmark: Option<RawBenchmark>,
    space: Option<RawSpace>,
    evaluation: Option<RawEvaluation>,
    dataset: Option<RawDataset>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawColony {
    num_food_sources: Option<usize>,
    num_onlookers: Option<usize>,
    abandonment_limit: Option<u32>,
    iterations: Option<u64>,
    seed: Option<u64>,
    max_evaluations: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBenchmark {
    function: Option<BenchmarkFunction>,
    dimension: Option<usize>,
    lower: Option<f64>,
    upper: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpace {
    depth: Option<usize>,
    vocabulary: Option<Vec<OperationSpec>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvaluation {
    strategy: Option<Strategy>,
    surrogate_seed: Option<u64>,
    lfe: Option<RawLfe>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLfe {
    epsilon_epochs: Option<usize>,
    full_train_epochs: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    validation_fraction: Option<f64>,
    patience: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    name: Option<DatasetName>,
    samples: Option<usize>,
    noise: Option<f64>,
    classes: Option<usize>,
    factor: Option<f64>,
    images: Option<PathBuf>,
    labels: Option<PathBuf>,
    limit: Option<usize>,
    test_fraction: Option<f64>,
    seed: Option<u64>,
}

pub const DEFAULT_OUTPUT_DIR: &str = "apiary-out";

fn reject(present: bool, what: &str, context: &str) -> Result<()> {
    if present {
        Err(Error::Config(format!("`{what}` is not allowed {context}")))
    } else {
        Ok(())
    }
}

/// TOML integers are signed 64-bit, so seeds are capped accordingly.
fn check_seed(seed: u64, key: &str) -> Result<u64> {
    if seed > i64::MAX as u64 {
        return Err(Error::Config(format!(
            "`{key}` must be at most {} (TOML integer range)",
            i64::MAX
        )));
    }
    Ok(seed)
}

impl RawConfig {
    fn resolve(self) -> Result<RunConfig> {
        let mode = self.mode.ok_or_else(|| {
            Error::Config("missing required key `mode` (\"nas\" or \"benchmark\")".into())
        })?;
        let colony_raw = self.colony.unwrap_or_default();
        let num_food_sources = colony_raw.num_food_sources.unwrap_or(7);
        let colony = ColonySection {
            num_food_sources,
            num_onlookers: colony_raw.num_onlookers.unwrap_or(num_food_sources),
            abandonment_limit: colony_raw.abandonment_limit.unwrap_or(5),
            iterations: colony_raw.iterations.unwrap_or(10),
            seed: check_seed(colony_raw.seed.unwrap_or(0), "colony.seed")?,
            max_evaluations: colony_raw.max_evaluations.unwrap_or(0),
        };

        let (benchmark, space, evaluation, dataset) = match mode {
            Mode::Benchmark => {
                let ctx = "in benchmark mode";
                reject(self.space.is_some(), "[space]", ctx)?;
                reject(self.evaluation.is_some(), "[evaluation]", ctx)?;
                reject(self.dataset.is_some(), "[dataset]", ctx)?;
                let b = self.benchmark.unwrap_or_default();
                let section = BenchmarkSection {
                    function: b.function.unwrap_or(BenchmarkFunction::Sphere),
                    dimension: b.dimension.unwrap_or(10),
                    lower: b.lower.unwrap_or(-5.0),
                    upper: b.upper.unwrap_or(5.0),
                };
                (Some(section), None, None, None)
            }
            Mode::Nas => {
                reject(self.benchmark.is_some(), "[benchmark]", "in nas mode")?;
                let s = self.space.unwrap_or_default();
                let space = SpaceSection {
                    depth: s.depth.unwrap_or(5),
                    vocabulary: s
                        .vocabulary
                        .unwrap_or_else(ArchitectureSpace::default_vocabulary),
                };
                let e = self.evaluation.unwrap_or_default();
                let strategy = e.strategy.unwrap_or(Strategy::Lfe);
                let (evaluation, dataset) = match strategy {
                    Strategy::Surrogate => {
                        let ctx = "with the surrogate strategy";
                        reject(e.lfe.is_some(), "[evaluation.lfe]", ctx)?;
                        reject(self.dataset.is_some(), "[dataset]", ctx)?;
                        let seed =
                            check_seed(e.surrogate_seed.unwrap_or(0), "evaluation.surrogate_seed")?;
                        (
                            EvaluationSection {
                                strategy,
                                surrogate_seed: Some(seed),
                                lfe: None,
                            },
                            None,
                        )
                    }
                    Strategy::Lfe => {
                        reject(
                            e.surrogate_seed.is_some(),
                            "evaluation.surrogate_seed",
                            "with the lfe strategy",
                        )?;
                        let d = LfeConfig::default();
                        let l = e.lfe.unwrap_or_default();
                        let lfe = LfeConfig {
                            epsilon_epochs: l.epsilon_epochs.unwrap_or(d.epsilon_epochs),
                            full_train_epochs: l.full_train_epochs.unwrap_or(d.full_train_epochs),
                            batch_size: l.batch_size.unwrap_or(d.batch_size),
                            learning_rate: l.learning_rate.unwrap_or(d.learning_rate),
                            validation_fraction: l
                                .validation_fraction
                                .unwrap_or(d.validation_fraction),
                            patience: l.patience.unwrap_or(d.patience),
                        };
                        (
                            EvaluationSection {
                                strategy,
                                surrogate_seed: None,
                                lfe: Some(lfe),
                            },
                            Some(resolve_dataset(self.dataset.unwrap_or_default())?),
                        )
                    }
                };
                (None, Some(space), Some(evaluation), dataset)
            }
        };

        let config = RunConfig {
            mode,
            output_dir: self
                .output_dir
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
            checkpoint_every: self.checkpoint_every.unwrap_or(1),
            max_seconds: self.max_seconds.unwrap_or(0.0),
            workers: self.workers.unwrap_or(1),
            memoize: self.memoize.unwrap_or(mode == Mode::Nas),
            record_wall_clock: self.record_wall_clock.unwrap_or(false),
            colony,
            benchmark,
            space,
            evaluation,
            dataset,
        };
        config.validate()?;
        Ok(config)
    }
}

fn resolve_dataset(d: RawDataset) -> Result<DatasetSection> {
    let name = d.name.unwrap_or(DatasetName::TwoMoons);
    let ctx = format!("for dataset `{}`", dataset_name(name));
    let synthetic = name != DatasetName::Idx;
    reject(synthetic && d.images.is_some(), "dataset.images", &ctx)?;
    reject(synthetic && d.labels.is_some(), "dataset.labels", &ctx)?;
    reject(synthetic && d.limit.is_some(), "dataset.limit", &ctx)?;
    reject(!synthetic && d.samples.is_some(), "dataset.samples", &ctx)?;
    reject(!synthetic && d.noise.is_some(), "dataset.noise", &ctx)?;
    reject(
        name != DatasetName::Blobs && d.classes.is_some(),
        "dataset.classes",
        &ctx,
    )?;
    reject(
        name != DatasetName::Circles && d.factor.is_some(),
        "dataset.factor",
        &ctx,
    )?;
    let default_noise = match name {
        DatasetName::TwoMoons => 0.1,
        DatasetName::Circles => 0.05,
        DatasetName::Blobs => 1.0,
        DatasetName::Idx => 0.0,
    };
    let need = |v: Option<PathBuf>, key: &str| {
        v.map(Some)
            .ok_or_else(|| Error::Config(format!("`{key}` is required for dataset `idx`")))
    };
    Ok(DatasetSection {
        name,
        samples: synthetic.then(|| d.samples.unwrap_or(500)),
        noise: synthetic.then(|| d.noise.unwrap_or(default_noise)),
        classes: (name == DatasetName::Blobs).then(|| d.classes.unwrap_or(3)),
        factor: (name == DatasetName::Circles).then(|| d.factor.unwrap_or(0.5)),
        images: if synthetic {
            None
        } else {
            need(d.images, "dataset.images")?
        },
        labels: if synthetic {
            None
        } else {
            need(d.labels, "dataset.labels")?
        },
        limit: d.limit,
        test_fraction: d.test_fraction.unwrap_or(0.2),
        seed: check_seed(d.seed.unwrap_or(0), "dataset.seed")?,
    })
}

pub fn dataset_name(name: DatasetName) -> &'static str {
    match name {
        DatasetName::TwoMoons => "two_moons",
        DatasetName::Circles => "circles",
        DatasetName::Blobs => "blobs",
        DatasetName::Idx => "idx",
    }
}

impl RunConfig {
    /// Checks every value that the raw parse cannot.
    pub fn validate(&self) -> Result<()> {
        self.colony.colony_config().validate()?;
        check_seed(self.colony.seed, "colony.seed")?;
        if self.workers == 0 {
            return Err(Error::Config("`workers` must be at least 1".into()));
        }
        if !(self.max_seconds.is_finite() && self.max_seconds >= 0.0) {
            return Err(Error::Config(
                "`max_seconds` must be finite and >= 0".into(),
            ));
        }
        let m = self.colony.num_food_sources as u64;
        if self.colony.max_evaluations != 0 && self.colony.max_evaluations < m {
            return Err(Error::Config(format!(
                "`colony.max_evaluations` ({}) must be 0 or at least num_food_sources ({m})",
                self.colony.max_evaluations
            )));
        }
        if let Some(b) = &self.benchmark {
            b.domain()?;
            if b.dimension < b.function.min_dimension() {
                return Err(Error::Config(format!(
                    "{} needs dimension >= {}",
                    b.function,
                    b.function.min_dimension()
                )));
            }
        }
        if let Some(s) = &self.space {
            s.space()?;
        }
        if let Some(lfe) = self.evaluation.as_ref().and_then(|e| e.lfe.as_ref()) {
            lfe.validate()?;
        }
        if let Some(d) = &self.dataset {
            if !(d.test_fraction > 0.0 && d.test_fraction < 1.0) {
                return Err(Error::Config(format!(
                    "`dataset.test_fraction` must be in (0, 1), got {}",
                    d.test_fraction
                )));
            }
        }
        Ok(())
    }

    pub fn strategy(&self) -> Option<Strategy> {
        self.evaluation.as_ref().map(|e| e.strategy)
    }

    /// Canonical TOML, as written to `config.resolved.toml`.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// SHA-256 over the settings that determine a run's results. Output
    /// location, checkpoint cadence, time budget, worker count and timing
    /// capture are left out, so they may change between a run and its resume.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        canonical.checkpoint_every = 0;
        canonical.max_seconds = 0.0;
        canonical.workers = 1;
        canonical.record_wall_clock = false;
        let json = serde_json::to_vec(&canonical).expect("config serializes to JSON");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn with_seed(mut self, seed: u64) -> Result<Self> {
        self.colony.seed = check_seed(seed, "--seed")?;
        Ok(self)
    }

    pub fn with_output_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.output_dir = dir.into();
        self
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_owned()))?;
    raw.resolve()
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
