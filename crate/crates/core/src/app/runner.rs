//! Run orchestration: builds the domain and strategy from a config, drives
//! the engine with checkpoints and history, then finishes the run.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::checkpoint::{load_checkpoint, save_checkpoint};
use super::config::{DatasetName, DatasetSection, Mode, RunConfig, Strategy};
use super::history::CsvHistory;
use crate::abc::{
    BestRecord, ColonyState, Engine, EngineOptions, Flow, HistoryRecord, HistorySink, NullSink,
    Phase, RecordPhase, SearchDomain,
};
use crate::benchmarks::BenchmarkEvaluator;
use crate::error::{Error, Result};
use crate::evaluation::data::{blobs, circles, two_moons};
use crate::evaluation::idx::load_idx_dataset;
use crate::evaluation::{
    Dataset, DatasetSplits, EvaluationResult, Evaluator, LfeEvaluator, Metrics, SurrogateEvaluator,
};
use crate::nas::{decode, encode, ArchitectureEncoding};
use crate::nn::{io::write_network, Network};
use crate::rng::ColonyRng;

pub const HISTORY_FILE: &str = "history.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";
pub const NETWORK_FILE: &str = "best_network.bin";

/// Knobs that affect how a run is driven but not its results.
#[derive(Clone, Debug)]
pub struct RunControl {
    /// Stop (with a checkpoint) once this many iterations have completed.
    pub stop_after_iteration: Option<u64>,
    /// Suppress per-iteration progress lines on stderr.
    pub quiet: bool,
    /// Write history, checkpoints and the summary to the output directory.
    pub persist: bool,
}

impl Default for RunControl {
    fn default() -> Self {
        RunControl {
            stop_after_iteration: None,
            quiet: true,
            persist: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullTrainSummary {
    pub objective: f64,
    pub metrics: Metrics,
    pub stopped_early: bool,
}

/// Contents of `summary.json`. No timings, so reruns compare byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: Mode,
    pub config_hash: String,
    pub seed: u64,
    pub best_candidate: String,
    pub best_objective: f64,
    pub best_fitness: f64,
    pub best_iteration: u64,
    pub best_metrics: Metrics,
    pub iterations_completed: u64,
    /// False when the run stopped early and can be resumed.
    pub finished: bool,
    pub budget_exhausted: bool,
    pub evaluation_events: u64,
    pub evaluator_invocations: u64,
    pub cache_hits: u64,
    /// Rows in `history.csv`: every evaluation event plus the final
    /// training row, if any.
    pub history_rows: u64,
    pub full_train: Option<FullTrainSummary>,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub summary: Summary,
    pub output_dir: Option<PathBuf>,
}

struct FinalTraining {
    objective: f64,
    metrics: Metrics,
    stopped_early: bool,
    network: Network,
}

/// Builds the dataset named by a config section.
pub fn load_dataset(section: &DatasetSection) -> Result<Dataset> {
    let mut rng = ColonyRng::seed_from(section.seed);
    let samples = section.samples.unwrap_or(500);
    let noise = section.noise.unwrap_or(0.0);
    match section.name {
        DatasetName::TwoMoons => two_moons(samples, noise, &mut rng),
        DatasetName::Circles => circles(samples, noise, section.factor.unwrap_or(0.5), &mut rng),
        DatasetName::Blobs => blobs(samples, section.classes.unwrap_or(3), noise, &mut rng),
        DatasetName::Idx => {
            let need = |p: &Option<PathBuf>, key: &str| {
                p.clone()
                    .ok_or_else(|| Error::Config(format!("`{key}` is required for idx")))
            };
            load_idx_dataset(
                &need(&section.images, "dataset.images")?,
                &need(&section.labels, "dataset.labels")?,
                section.limit,
            )
        }
    }
}

/// The LFE evaluator a nas/lfe config describes.
pub fn lfe_evaluator(config: &RunConfig) -> Result<LfeEvaluator> {
    let (space, eval, dataset) = match (&config.space, &config.evaluation, &config.dataset) {
        (Some(s), Some(e), Some(d)) if e.strategy == Strategy::Lfe => (s, e, d),
        _ => return Err(Error::Config("config does not describe an lfe run".into())),
    };
    let lfe = eval
        .lfe
        .clone()
        .ok_or_else(|| Error::Config("missing [evaluation.lfe]".into()))?;
    let data = load_dataset(dataset)?;
    let splits = DatasetSplits::new(
        &data,
        dataset.test_fraction,
        lfe.validation_fraction,
        dataset.seed,
    )?;
    LfeEvaluator::new(space.space()?, splits, lfe, config.colony.seed)
}

pub fn surrogate_evaluator(config: &RunConfig) -> Result<SurrogateEvaluator> {
    match (&config.space, &config.evaluation) {
        (Some(s), Some(e)) if e.strategy == Strategy::Surrogate => Ok(SurrogateEvaluator::new(
            s.space()?,
            e.surrogate_seed.unwrap_or(0),
        )),
        _ => Err(Error::Config(
            "config does not describe a surrogate run".into(),
        )),
    }
}

/// Starts a fresh run.
pub fn run(config: &RunConfig, control: &RunControl) -> Result<RunReport> {
    dispatch(config, control, false)
}

/// Continues a run from `output_dir/checkpoint.json`. The checkpoint must
/// have been written under a config with the same hash.
pub fn resume(config: &RunConfig, control: &RunControl) -> Result<RunReport> {
    if !control.persist {
        return Err(Error::Config("resuming requires persistence".into()));
    }
    dispatch(config, control, true)
}

fn dispatch(config: &RunConfig, control: &RunControl, resuming: bool) -> Result<RunReport> {
    config.validate()?;
    match (config.mode, config.strategy()) {
        (Mode::Benchmark, _) => {
            let b = config
                .benchmark
                .as_ref()
                .ok_or_else(|| Error::Config("missing [benchmark]".into()))?;
            let domain = b.domain()?;
            let eval = BenchmarkEvaluator {
                function: b.function,
            };
            drive(config, control, resuming, &domain, &eval, |_| Ok(None))
        }
        (Mode::Nas, Some(Strategy::Surrogate)) => {
            let eval = surrogate_evaluator(config)?;
            drive(config, control, resuming, eval.space(), &eval, |_| Ok(None))
        }
        (Mode::Nas, _) => {
            let eval = lfe_evaluator(config)?;
            drive(config, control, resuming, &eval.space, &eval, |best| {
                let out = eval.full_train(best)?;
                Ok(Some(FinalTraining {
                    objective: out.result.objective,
                    metrics: out.result.metrics,
                    stopped_early: out.history.stopped_early,
                    network: out.network,
                }))
            })
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn drive<D, E>(
    config: &RunConfig,
    control: &RunControl,
    resuming: bool,
    domain: &D,
    evaluator: &E,
    finish: impl FnOnce(&D::Position) -> Result<Option<FinalTraining>>,
) -> Result<RunReport>
where
    D: SearchDomain,
    E: Evaluator<D::Position>,
{
    let hash = config.config_hash();
    let dir = config.output_dir.clone();
    let engine = Engine::new(domain, evaluator).with_options(EngineOptions {
        memoize: config.memoize,
        workers: config.workers,
        record_wall_clock: config.record_wall_clock,
        max_evaluations: (config.colony.max_evaluations > 0)
            .then_some(config.colony.max_evaluations),
    })?;
    let checkpoint_path = dir.join(CHECKPOINT_FILE);
    let history_path = dir.join(HISTORY_FILE);

    let mut state: ColonyState<D::Position>;
    let mut sink: Box<dyn HistorySink> = Box::new(NullSink);
    if control.persist {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    if resuming {
        state = load_checkpoint(&checkpoint_path, &hash)?;
        if state.config != config.colony.colony_config() {
            return Err(Error::ResumeRefused(
                "checkpoint colony settings differ from the config".into(),
            ));
        }
        sink = Box::new(CsvHistory::resume(&history_path, state.counters.events)?);
        write_text(&dir.join(RESOLVED_CONFIG_FILE), &config.to_toml()?)?;
    } else {
        if control.persist {
            write_text(&dir.join(RESOLVED_CONFIG_FILE), &config.to_toml()?)?;
            sink = Box::new(CsvHistory::create(&history_path)?);
        }
        state = engine.initialize(config.colony.colony_config(), &mut *sink)?;
        if control.persist {
            save_checkpoint(&checkpoint_path, &hash, &state)?;
        }
    }

    let started = Instant::now();
    let mut interrupted = false;
    let total = config.colony.iterations;
    let mut barrier = |s: &ColonyState<D::Position>| -> Result<Flow> {
        let at_boundary = s.next_phase == Phase::Employee;
        if at_boundary && !control.quiet {
            eprintln!(
                "iteration {}/{total}  best {:.6e}  {}",
                s.iteration,
                s.global_best.objective,
                domain.key(&s.global_best.position)
            );
        }
        if s.is_finished() {
            return Ok(Flow::Continue);
        }
        if at_boundary {
            if control.persist
                && config.checkpoint_every > 0
                && s.iteration % config.checkpoint_every == 0
            {
                save_checkpoint(&checkpoint_path, &hash, s)?;
            }
            if control
                .stop_after_iteration
                .is_some_and(|k| s.iteration >= k)
            {
                interrupted = true;
                return Ok(Flow::Stop);
            }
        }
        if config.max_seconds > 0.0 && started.elapsed().as_secs_f64() >= config.max_seconds {
            interrupted = true;
            return Ok(Flow::Stop);
        }
        Ok(Flow::Continue)
    };
    engine.run_from(&mut state, &mut *sink, &mut barrier)?;
    if control.persist {
        save_checkpoint(&checkpoint_path, &hash, &state)?;
    }

    let mut history_rows = state.counters.events;
    let mut full_train = None;
    if !interrupted {
        if let Some(done) = finish(&state.global_best.position)? {
            let record = HistoryRecord {
                iteration: state.iteration,
                phase: RecordPhase::FullTrain,
                source_index: 0,
                candidate: domain.key(&state.global_best.position),
                objective: done.objective,
                fitness: crate::abc::fitness_transform(done.objective)?,
                trials: 0,
                cache_hit: false,
                elapsed_seconds: done.metrics.wall_clock_seconds,
                is_global_best: false,
            };
            sink.record(&record)
                .and_then(|_| sink.flush())
                .map_err(|e| Error::Persistence {
                    message: e.to_string(),
                    best_candidate: Some(record.candidate.clone()),
                    best_objective: Some(state.global_best.objective),
                })?;
            history_rows += 1;
            if control.persist {
                let path = dir.join(NETWORK_FILE);
                let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
                write_network(BufWriter::new(file), &done.network)
                    .map_err(|e| Error::io(&path, e))?;
            }
            full_train = Some(FullTrainSummary {
                objective: done.objective,
                metrics: done.metrics,
                stopped_early: done.stopped_early,
            });
        }
    }

    let summary = summarize(
        config,
        &hash,
        domain,
        &state,
        !interrupted,
        history_rows,
        full_train,
    );
    if control.persist {
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        write_text(&dir.join(SUMMARY_FILE), &(json + "\n"))?;
    }
    Ok(RunReport {
        summary,
        output_dir: control.persist.then_some(dir),
    })
}

fn summarize<D: SearchDomain>(
    config: &RunConfig,
    hash: &str,
    domain: &D,
    state: &ColonyState<D::Position>,
    finished: bool,
    history_rows: u64,
    full_train: Option<FullTrainSummary>,
) -> Summary {
    let best: &BestRecord<D::Position> = &state.global_best;
    Summary {
        mode: config.mode,
        config_hash: hash.to_owned(),
        seed: config.colony.seed,
        best_candidate: domain.key(&best.position),
        best_objective: best.objective,
        best_fitness: best.fitness,
        best_iteration: best.iteration,
        best_metrics: best.metrics.clone(),
        iterations_completed: state.iteration,
        finished,
        budget_exhausted: state.budget_exhausted,
        evaluation_events: state.counters.events,
        evaluator_invocations: state.counters.invocations,
        cache_hits: state.counters.cache_hits,
        history_rows,
        full_train,
    }
}

/// Scores a single candidate under the config's strategy. Benchmark
/// candidates are comma-separated coordinates; architectures use the
/// canonical `|`-joined form. Returns the canonical candidate string.
pub fn evaluate_candidate(
    config: &RunConfig,
    candidate: &str,
) -> Result<(String, EvaluationResult)> {
    config.validate()?;
    match (config.mode, config.strategy()) {
        (Mode::Benchmark, _) => {
            let b = config
                .benchmark
                .as_ref()
                .ok_or_else(|| Error::Config("missing [benchmark]".into()))?;
            let domain = b.domain()?;
            let point: Vec<f64> = candidate
                .split(',')
                .enumerate()
                .map(|(i, s)| {
                    s.trim().parse::<f64>().map_err(|e| Error::Parse {
                        position: i,
                        message: format!("`{}` is not a number: {e}", s.trim()),
                    })
                })
                .collect::<Result<_>>()?;
            if point.len() != domain.dimension() || !domain.contains(&point) {
                return Err(Error::Domain(format!(
                    "candidate must have {} coordinates inside the box",
                    domain.dimension()
                )));
            }
            let eval = BenchmarkEvaluator {
                function: b.function,
            };
            Ok((domain.key(&point), eval.evaluate(&point)?))
        }
        (Mode::Nas, Some(Strategy::Surrogate)) => {
            let eval = surrogate_evaluator(config)?;
            let arch = decode(eval.space(), candidate)?;
            Ok((encode(&arch), eval.evaluate(&arch)?))
        }
        (Mode::Nas, _) => {
            let eval = lfe_evaluator(config)?;
            let arch: ArchitectureEncoding = decode(&eval.space, candidate)?;
            Ok((encode(&arch), eval.evaluate(&arch)?))
        }
    }
}
