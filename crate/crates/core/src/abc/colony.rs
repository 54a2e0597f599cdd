use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::history::{HistoryRecord, HistorySink, RecordPhase};
use super::selection::{fitness_transform, roulette_select, selection_probabilities};
use super::SearchDomain;
use crate::error::{Error, Result};
use crate::evaluation::{EvaluationResult, Evaluator, Metrics};
use crate::nas::{CachedEvaluation, VisitedCache};
use crate::rng::ColonyRng;

/// Objective assigned to a candidate whose evaluation failed.
pub const FAILED_OBJECTIVE: f64 = 1e9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoodSource<P> {
    pub position: P,
    pub objective: f64,
    pub fitness: f64,
    /// Consecutive non-improving evaluations since the last improvement or
    /// reset.
    pub trials: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColonyConfig {
    pub num_food_sources: usize,
    pub num_onlookers: usize,
    pub abandonment_limit: u32,
    pub iterations: u64,
    pub seed: u64,
}

impl ColonyConfig {
    /// Equal employee and onlooker counts, limit 5, ten iterations.
    pub fn new(num_food_sources: usize, seed: u64) -> Self {
        ColonyConfig {
            num_food_sources,
            num_onlookers: num_food_sources,
            abandonment_limit: 5,
            iterations: 10,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_food_sources == 0 {
            return Err(Error::Config("num_food_sources must be at least 1".into()));
        }
        if self.abandonment_limit == 0 {
            return Err(Error::Config("abandonment_limit must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestRecord<P> {
    pub position: P,
    pub objective: f64,
    pub fitness: f64,
    /// Iteration in which the record was set (0 = initialization).
    pub iteration: u64,
    pub metrics: Metrics,
}

/// The phase a run executes next.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Employee,
    Onlooker,
    Scout,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// Evaluation events, one per history record emitted by the engine.
    pub events: u64,
    /// Calls into the evaluation strategy.
    pub invocations: u64,
    pub cache_hits: u64,
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColonyState<P> {
    pub config: ColonyConfig,
    pub sources: Vec<FoodSource<P>>,
    pub global_best: BestRecord<P>,
    /// Completed iterations.
    pub iteration: u64,
    pub next_phase: Phase,
    pub rng: ColonyRng,
    pub visited: VisitedCache,
    pub counters: Counters,
    /// Set when the evaluation budget ran out; the run is over.
    pub budget_exhausted: bool,
}

impl<P> ColonyState<P> {
    pub fn is_finished(&self) -> bool {
        self.budget_exhausted
            || (self.iteration >= self.config.iterations && self.next_phase == Phase::Employee)
    }

    pub fn fitnesses(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.fitness).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EngineOptions {
    /// Consult and fill the visited cache before invoking the evaluator.
    pub memoize: bool,
    /// Evaluation threads per phase batch. 1 evaluates inline.
    pub workers: usize,
    /// Record measured wall-clock seconds. Off keeps history byte-stable.
    pub record_wall_clock: bool,
    /// Upper bound on evaluator invocations for the whole run.
    pub max_evaluations: Option<u64>,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            memoize: true,
            workers: 1,
            record_wall_clock: false,
            max_evaluations: None,
        }
    }
}

/// Returned by a barrier callback to continue or pause a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Clone, Debug)]
pub struct RunOutcome<P> {
    pub best: BestRecord<P>,
    pub state: ColonyState<P>,
}

struct Outcome {
    objective: f64,
    fitness: f64,
    metrics: Metrics,
    cache_hit: bool,
    elapsed: f64,
}

enum Slot {
    Cached(CachedEvaluation),
    Job(usize),
    Duplicate(usize),
}

/// Drives a colony over a domain with an evaluation strategy.
pub struct Engine<'a, D, E> {
    domain: &'a D,
    evaluator: &'a E,
    options: EngineOptions,
    pool: Option<rayon::ThreadPool>,
}

impl<'a, D, E> Engine<'a, D, E>
where
    D: SearchDomain,
    E: Evaluator<D::Position>,
{
    pub fn new(domain: &'a D, evaluator: &'a E) -> Self {
        Engine {
            domain,
            evaluator,
            options: EngineOptions::default(),
            pool: None,
        }
    }

    pub fn with_options(mut self, options: EngineOptions) -> Result<Self> {
        self.pool = if options.workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(options.workers)
                    .build()
                    .map_err(|e| Error::Config(format!("cannot start workers: {e}")))?,
            )
        } else {
            None
        };
        self.options = options;
        Ok(self)
    }

    pub fn options(&self) -> &EngineOptions {
        &self.options
    }

    pub fn domain(&self) -> &D {
        self.domain
    }

    /// Initializes and runs all configured iterations.
    pub fn run(
        &self,
        config: ColonyConfig,
        sink: &mut dyn HistorySink,
    ) -> Result<RunOutcome<D::Position>> {
        let mut state = self.initialize(config, sink)?;
        self.run_from(&mut state, sink, &mut |_| Ok(Flow::Continue))?;
        Ok(RunOutcome {
            best: state.global_best.clone(),
            state,
        })
    }

    /// Scouts sample `num_food_sources` random positions, each evaluated once.
    pub fn initialize(
        &self,
        config: ColonyConfig,
        sink: &mut dyn HistorySink,
    ) -> Result<ColonyState<D::Position>> {
        config.validate()?;
        let mut rng = ColonyRng::seed_from(config.seed);
        let positions: Vec<_> = (0..config.num_food_sources)
            .map(|_| self.domain.random_position(&mut rng))
            .collect();

        // The best record is provisional until the first merge below.
        let mut state = ColonyState {
            sources: Vec::with_capacity(positions.len()),
            global_best: BestRecord {
                position: positions[0].clone(),
                objective: f64::INFINITY,
                fitness: f64::NEG_INFINITY,
                iteration: 0,
                metrics: Metrics::default(),
            },
            config,
            iteration: 0,
            next_phase: Phase::Employee,
            rng,
            visited: VisitedCache::default(),
            counters: Counters::default(),
            budget_exhausted: false,
        };

        let outcomes = self.evaluate_batch(&mut state, &positions)?;
        if outcomes.len() < positions.len() {
            return Err(Error::Config(
                "evaluation budget is smaller than the number of food sources".into(),
            ));
        }
        for (m, (position, out)) in positions.into_iter().zip(outcomes).enumerate() {
            state.sources.push(FoodSource {
                position: position.clone(),
                objective: out.objective,
                fitness: out.fitness,
                trials: 0,
            });
            self.emit(&mut state, sink, RecordPhase::Scout, 0, m, &position, &out)?;
        }
        sink.flush()
            .map_err(|e| persistence(&state, self.domain, e))?;
        Ok(state)
    }

    /// One neighbor per source, greedy replacement.
    pub fn employee_phase(
        &self,
        state: &mut ColonyState<D::Position>,
        sink: &mut dyn HistorySink,
    ) -> Result<()> {
        let snapshot: Vec<D::Position> = state.sources.iter().map(|s| s.position.clone()).collect();
        let mut targets = Vec::with_capacity(snapshot.len());
        let mut candidates = Vec::with_capacity(snapshot.len());
        for m in 0..snapshot.len() {
            candidates.push(self.draw_neighbor(&snapshot, m, &mut state.rng)?);
            targets.push(m);
        }
        self.evaluate_and_merge(state, sink, RecordPhase::Employee, &targets, candidates)?;
        state.next_phase = Phase::Onlooker;
        Ok(())
    }

    /// Roulette-assigned onlookers each draw one neighbor of their source.
    pub fn onlooker_phase(
        &self,
        state: &mut ColonyState<D::Position>,
        sink: &mut dyn HistorySink,
    ) -> Result<()> {
        if state.config.num_onlookers > 0 {
            let snapshot: Vec<D::Position> =
                state.sources.iter().map(|s| s.position.clone()).collect();
            let probabilities = selection_probabilities(&state.fitnesses())?;
            let mut targets = Vec::with_capacity(state.config.num_onlookers);
            let mut candidates = Vec::with_capacity(state.config.num_onlookers);
            for _ in 0..state.config.num_onlookers {
                let m = roulette_select(&probabilities, &mut state.rng);
                candidates.push(self.draw_neighbor(&snapshot, m, &mut state.rng)?);
                targets.push(m);
            }
            self.evaluate_and_merge(state, sink, RecordPhase::Onlooker, &targets, candidates)?;
        }
        state.next_phase = Phase::Scout;
        Ok(())
    }

    /// Re-samples every exhausted source. The global best is left untouched.
    pub fn scout_phase(
        &self,
        state: &mut ColonyState<D::Position>,
        sink: &mut dyn HistorySink,
    ) -> Result<()> {
        let limit = state.config.abandonment_limit;
        let exhausted: Vec<usize> = state
            .sources
            .iter()
            .enumerate()
            .filter(|(_, s)| s.trials >= limit)
            .map(|(m, _)| m)
            .collect();
        if !exhausted.is_empty() {
            let candidates: Vec<D::Position> = exhausted
                .iter()
                .map(|_| self.domain.random_position(&mut state.rng))
                .collect();
            let outcomes = self.evaluate_batch(state, &candidates)?;
            for ((&m, position), out) in exhausted.iter().zip(candidates).zip(outcomes) {
                state.sources[m] = FoodSource {
                    position: position.clone(),
                    objective: out.objective,
                    fitness: out.fitness,
                    trials: 0,
                };
                let iteration = state.iteration + 1;
                self.emit(
                    state,
                    sink,
                    RecordPhase::Scout,
                    iteration,
                    m,
                    &position,
                    &out,
                )?;
            }
        }
        if !state.budget_exhausted {
            state.iteration += 1;
            state.next_phase = Phase::Employee;
        }
        sink.flush()
            .map_err(|e| persistence(state, self.domain, e))?;
        Ok(())
    }

    /// Executes the next phase of the iteration.
    pub fn step(
        &self,
        state: &mut ColonyState<D::Position>,
        sink: &mut dyn HistorySink,
    ) -> Result<()> {
        match state.next_phase {
            Phase::Employee => self.employee_phase(state, sink),
            Phase::Onlooker => self.onlooker_phase(state, sink),
            Phase::Scout => self.scout_phase(state, sink),
        }
    }

    /// Steps until the run finishes or `barrier` asks to stop. `barrier` is
    /// called after every phase.
    pub fn run_from(
        &self,
        state: &mut ColonyState<D::Position>,
        sink: &mut dyn HistorySink,
        barrier: &mut dyn FnMut(&ColonyState<D::Position>) -> Result<Flow>,
    ) -> Result<()> {
        while !state.is_finished() {
            self.step(state, sink)?;
            if barrier(state)? == Flow::Stop {
                break;
            }
        }
        sink.flush()
            .map_err(|e| persistence(state, self.domain, e))?;
        Ok(())
    }

    fn draw_neighbor(
        &self,
        snapshot: &[D::Position],
        m: usize,
        rng: &mut ColonyRng,
    ) -> Result<D::Position> {
        let partner = if self.domain.uses_partner() && snapshot.len() > 1 {
            let k = rng.index(snapshot.len() - 1);
            Some(&snapshot[if k >= m { k + 1 } else { k }])
        } else {
            None
        };
        self.domain.neighbor(&snapshot[m], partner, rng)
    }

    fn evaluate_and_merge(
        &self,
        state: &mut ColonyState<D::Position>,
        sink: &mut dyn HistorySink,
        phase: RecordPhase,
        targets: &[usize],
        candidates: Vec<D::Position>,
    ) -> Result<()> {
        let outcomes = self.evaluate_batch(state, &candidates)?;
        for ((&m, candidate), out) in targets.iter().zip(candidates).zip(outcomes) {
            let source = &mut state.sources[m];
            if out.fitness > source.fitness {
                source.position = candidate.clone();
                source.objective = out.objective;
                source.fitness = out.fitness;
                source.trials = 0;
            } else {
                source.trials += 1;
            }
            let iteration = state.iteration + 1;
            self.emit(state, sink, phase, iteration, m, &candidate, &out)?;
        }
        Ok(())
    }

    /// Updates the global best and writes one history record.
    fn emit(
        &self,
        state: &mut ColonyState<D::Position>,
        sink: &mut dyn HistorySink,
        phase: RecordPhase,
        iteration: u64,
        m: usize,
        candidate: &D::Position,
        out: &Outcome,
    ) -> Result<()> {
        let improved = out.fitness > state.global_best.fitness;
        if improved {
            state.global_best = BestRecord {
                position: candidate.clone(),
                objective: out.objective,
                fitness: out.fitness,
                iteration,
                metrics: out.metrics.clone(),
            };
        }
        state.counters.events += 1;
        let record = HistoryRecord {
            iteration,
            phase,
            source_index: m,
            candidate: self.domain.key(candidate),
            objective: out.objective,
            fitness: out.fitness,
            trials: state.sources[m].trials,
            cache_hit: out.cache_hit,
            elapsed_seconds: out.elapsed,
            is_global_best: improved,
        };
        sink.record(&record)
            .map_err(|e| persistence(state, self.domain, e))
    }

    /// Evaluates a batch in order. The result is shorter than `candidates`
    /// only when the evaluation budget ran out, in which case
    /// `state.budget_exhausted` is set.
    fn evaluate_batch(
        &self,
        state: &mut ColonyState<D::Position>,
        candidates: &[D::Position],
    ) -> Result<Vec<Outcome>> {
        let keys: Vec<String> = candidates.iter().map(|c| self.domain.key(c)).collect();
        let mut remaining = self
            .options
            .max_evaluations
            .map(|max| max.saturating_sub(state.counters.invocations));
        let mut slots = Vec::with_capacity(candidates.len());
        let mut jobs: Vec<usize> = Vec::new();
        let mut pending: HashMap<&str, usize> = HashMap::new();

        for (i, key) in keys.iter().enumerate() {
            if self.options.memoize {
                if let Some(hit) = state.visited.lookup(key) {
                    slots.push(Slot::Cached(hit.clone()));
                    continue;
                }
                if let Some(&job) = pending.get(key.as_str()) {
                    slots.push(Slot::Duplicate(job));
                    continue;
                }
            }
            match remaining.as_mut() {
                Some(0) => {
                    state.budget_exhausted = true;
                    break;
                }
                Some(left) => *left -= 1,
                None => {}
            }
            pending.insert(key, jobs.len());
            slots.push(Slot::Job(jobs.len()));
            jobs.push(i);
        }

        let record_time = self.options.record_wall_clock;
        let run_job = |&i: &usize| -> (Result<EvaluationResult>, f64) {
            let start = Instant::now();
            let result = self.evaluator.evaluate(&candidates[i]);
            let elapsed = if record_time {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            };
            (result, elapsed)
        };
        let raw: Vec<(Result<EvaluationResult>, f64)> = match &self.pool {
            Some(pool) if jobs.len() > 1 => pool.install(|| jobs.par_iter().map(run_job).collect()),
            _ => jobs.iter().map(run_job).collect(),
        };

        let computed: Vec<(f64, Metrics, f64)> = raw
            .into_iter()
            .map(|(result, elapsed)| {
                let (objective, mut metrics) = settle(result);
                metrics.wall_clock_seconds = elapsed;
                (objective, metrics, elapsed)
            })
            .collect();

        let mut outcomes = Vec::with_capacity(slots.len());
        for (slot, key) in slots.into_iter().zip(&keys) {
            let out = match slot {
                Slot::Cached(hit) => {
                    state.counters.cache_hits += 1;
                    Outcome {
                        objective: hit.objective,
                        fitness: hit.fitness,
                        metrics: hit.metrics,
                        cache_hit: true,
                        elapsed: 0.0,
                    }
                }
                Slot::Duplicate(job) => {
                    state.counters.cache_hits += 1;
                    let (objective, metrics, _) = &computed[job];
                    Outcome {
                        objective: *objective,
                        fitness: fitness_transform(*objective)?,
                        metrics: metrics.clone(),
                        cache_hit: true,
                        elapsed: 0.0,
                    }
                }
                Slot::Job(job) => {
                    state.counters.invocations += 1;
                    let (objective, metrics, elapsed) = &computed[job];
                    let fitness = fitness_transform(*objective)?;
                    if self.options.memoize {
                        state.visited.store(
                            key,
                            CachedEvaluation {
                                objective: *objective,
                                fitness,
                                metrics: metrics.clone(),
                            },
                        );
                    }
                    Outcome {
                        objective: *objective,
                        fitness,
                        metrics: metrics.clone(),
                        cache_hit: false,
                        elapsed: *elapsed,
                    }
                }
            };
            outcomes.push(out);
        }
        Ok(outcomes)
    }
}

/// Turns an evaluator result into a finite objective, substituting
/// [`FAILED_OBJECTIVE`] for errors and non-finite values.
fn settle(result: Result<EvaluationResult>) -> (f64, Metrics) {
    match result {
        Ok(r) if r.objective.is_finite() => (r.objective, r.metrics),
        Ok(r) => {
            let mut metrics = r.metrics;
            metrics.failed = true;
            metrics.failure = Some(format!("non-finite objective {}", r.objective));
            (FAILED_OBJECTIVE, metrics)
        }
        Err(e) => (
            FAILED_OBJECTIVE,
            Metrics {
                failed: true,
                failure: Some(e.to_string()),
                ..Metrics::default()
            },
        ),
    }
}

fn persistence<D: SearchDomain>(
    state: &ColonyState<D::Position>,
    domain: &D,
    err: std::io::Error,
) -> Error {
    let known = state.global_best.fitness.is_finite();
    Error::Persistence {
        message: err.to_string(),
        best_candidate: known.then(|| domain.key(&state.global_best.position)),
        best_objective: known.then_some(state.global_best.objective),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abc::NullSink;
    use crate::benchmarks::{BenchmarkFunction, ContinuousBox};
    use crate::evaluation::SurrogateEvaluator;
    use crate::nas::{ArchitectureEncoding, ArchitectureSpace, OpKind, OperationSpec};
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicU64, Ordering};

    #[allow(clippy::ptr_arg)]
    fn sphere(x: &Vec<f64>) -> Result<EvaluationResult> {
        Ok(EvaluationResult::objective_only(
            BenchmarkFunction::Sphere.evaluate(x),
        ))
    }

    #[allow(clippy::ptr_arg)]
    fn rastrigin(x: &Vec<f64>) -> Result<EvaluationResult> {
        Ok(EvaluationResult::objective_only(
            BenchmarkFunction::Rastrigin.evaluate(x),
        ))
    }

    #[test]
    fn initialization_is_seeded_and_in_bounds() {
        let domain = ContinuousBox::cube(2, 0.0, 1.0).unwrap();
        let engine = Engine::new(&domain, &sphere);
        let mut first = Vec::new();
        let a = engine
            .initialize(ColonyConfig::new(3, 42), &mut first)
            .unwrap();
        let b = engine
            .initialize(ColonyConfig::new(3, 42), &mut NullSink)
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sources.len(), 3);
        assert_eq!(first.len(), 3);
        for s in &a.sources {
            assert!(domain.contains(&s.position));
            assert_eq!(s.trials, 0);
            assert_eq!(s.fitness, fitness_transform(s.objective).unwrap());
        }
        assert!(first
            .iter()
            .all(|r| r.iteration == 0 && r.phase == RecordPhase::Scout));
        let c = engine
            .initialize(ColonyConfig::new(3, 43), &mut NullSink)
            .unwrap();
        assert_ne!(a.sources, c.sources);
    }

    #[test]
    fn initialization_in_architecture_space() {
        let space = ArchitectureSpace::with_default_vocabulary(5).unwrap();
        let eval = SurrogateEvaluator::new(space.clone(), 3);
        let engine = Engine::new(&space, &eval);
        let state = engine
            .initialize(ColonyConfig::new(7, 0), &mut NullSink)
            .unwrap();
        assert_eq!(state.sources.len(), 7);
        for s in &state.sources {
            assert_eq!(s.position.len(), 5);
            assert!(space.contains(&s.position));
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let domain = ContinuousBox::cube(2, 0.0, 1.0).unwrap();
        let engine = Engine::new(&domain, &sphere);
        let mut config = ColonyConfig::new(0, 1);
        assert!(matches!(
            engine.initialize(config.clone(), &mut NullSink),
            Err(Error::Config(_))
        ));
        config.num_food_sources = 2;
        config.abandonment_limit = 0;
        assert!(matches!(
            engine.initialize(config, &mut NullSink),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn constant_objective_counts_one_trial_per_employee() {
        let domain = ContinuousBox::cube(3, -1.0, 1.0).unwrap();
        let flat = |_: &Vec<f64>| Ok(EvaluationResult::objective_only(2.0));
        let engine = Engine::new(&domain, &flat);
        let mut state = engine
            .initialize(ColonyConfig::new(5, 9), &mut NullSink)
            .unwrap();
        let before = state.sources.clone();
        engine.employee_phase(&mut state, &mut NullSink).unwrap();
        for (old, new) in before.iter().zip(&state.sources) {
            assert_eq!(old.position, new.position);
            assert_eq!(new.trials, 1);
        }
        assert_eq!(state.next_phase, Phase::Onlooker);
    }

    #[test]
    fn employee_replacement_is_greedy() {
        let domain = ContinuousBox::cube(4, -5.0, 5.0).unwrap();
        let engine = Engine::new(&domain, &sphere);
        let mut state = engine
            .initialize(ColonyConfig::new(6, 5), &mut NullSink)
            .unwrap();
        for _ in 0..5 {
            let before = state.sources.clone();
            let mut records = Vec::new();
            engine.employee_phase(&mut state, &mut records).unwrap();
            assert_eq!(records.len(), before.len());
            for (m, r) in records.iter().enumerate() {
                assert_eq!(r.source_index, m);
                let now = &state.sources[m];
                if r.fitness > before[m].fitness {
                    assert_eq!(domain.key(&now.position), r.candidate);
                    assert_eq!(now.trials, 0);
                } else {
                    assert_eq!(now.position, before[m].position);
                    assert_eq!(now.trials, before[m].trials + 1);
                }
                assert_eq!(r.trials, now.trials);
            }
            state.next_phase = Phase::Employee;
        }
    }

    fn two_source_state(
        engine: &Engine<'_, ContinuousBox, impl Evaluator<Vec<f64>>>,
        onlookers: usize,
    ) -> ColonyState<Vec<f64>> {
        let mut config = ColonyConfig::new(2, 17);
        config.num_onlookers = onlookers;
        config.abandonment_limit = u32::MAX;
        let mut state = engine.initialize(config, &mut NullSink).unwrap();
        for (s, objective) in state.sources.iter_mut().zip([0.0, -2.0]) {
            s.objective = objective;
            s.fitness = fitness_transform(objective).unwrap();
        }
        state.next_phase = Phase::Onlooker;
        state
    }

    #[test]
    fn onlookers_follow_fitness_proportions() {
        let domain = ContinuousBox::cube(1, -1.0, 1.0).unwrap();
        let worse = |_: &Vec<f64>| Ok(EvaluationResult::objective_only(1e6));
        let engine = Engine::new(&domain, &worse);
        let n = 20_000;
        let mut state = two_source_state(&engine, n);
        assert_eq!(state.fitnesses(), vec![1.0, 3.0]);
        let mut records = Vec::new();
        engine.onlooker_phase(&mut state, &mut records).unwrap();
        assert_eq!(records.len(), n);
        let share = records.iter().filter(|r| r.source_index == 1).count() as f64 / n as f64;
        assert!((share - 0.75).abs() < 0.02, "share {share}");
        assert_eq!(state.next_phase, Phase::Scout);
    }

    #[test]
    fn zero_onlookers_leave_sources_alone() {
        let domain = ContinuousBox::cube(1, -1.0, 1.0).unwrap();
        let engine = Engine::new(&domain, &sphere);
        let mut state = two_source_state(&engine, 0);
        let before = state.sources.clone();
        let mut records = Vec::new();
        engine.onlooker_phase(&mut state, &mut records).unwrap();
        assert!(records.is_empty());
        assert_eq!(state.sources, before);
        assert_eq!(state.next_phase, Phase::Scout);
    }

    #[test]
    fn scouts_reset_exhausted_sources_and_keep_the_best() {
        let domain = ContinuousBox::cube(2, -5.0, 5.0).unwrap();
        let engine = Engine::new(&domain, &sphere);
        let mut config = ColonyConfig::new(3, 21);
        config.abandonment_limit = 4;
        let mut state = engine.initialize(config, &mut NullSink).unwrap();
        let best_m = (0..3)
            .max_by(|&a, &b| {
                state.sources[a]
                    .fitness
                    .total_cmp(&state.sources[b].fitness)
            })
            .unwrap();
        state.sources[best_m].trials = 4;
        let other = (best_m + 1) % 3;
        state.sources[other].trials = 3;
        let best = state.global_best.clone();
        let kept = state.sources[other].clone();
        state.next_phase = Phase::Scout;
        let mut records = Vec::new();
        engine.scout_phase(&mut state, &mut records).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].source_index, best_m);
        assert_eq!(records[0].phase, RecordPhase::Scout);
        assert_eq!(state.sources[best_m].trials, 0);
        assert_ne!(state.sources[best_m].position, best.position);
        assert_eq!(state.sources[other], kept);
        assert_eq!(state.global_best.position, best.position);
        assert_eq!(state.iteration, 1);
        assert_eq!(state.next_phase, Phase::Employee);
    }

    #[test]
    fn no_scouting_below_the_limit() {
        let domain = ContinuousBox::cube(2, -5.0, 5.0).unwrap();
        let engine = Engine::new(&domain, &sphere);
        let mut state = engine
            .initialize(ColonyConfig::new(3, 2), &mut NullSink)
            .unwrap();
        state.sources[0].trials = 4;
        let before = state.sources.clone();
        let mut records = Vec::new();
        engine.scout_phase(&mut state, &mut records).unwrap();
        assert!(records.is_empty());
        assert_eq!(state.sources, before);
    }

    #[test]
    fn zero_iterations_return_the_best_initial_source() {
        let domain = ContinuousBox::cube(3, -5.0, 5.0).unwrap();
        let engine = Engine::new(&domain, &sphere);
        let mut config = ColonyConfig::new(6, 8);
        config.iterations = 0;
        let mut records = Vec::new();
        let out = engine.run(config, &mut records).unwrap();
        assert_eq!(records.len(), 6);
        let best = out
            .state
            .sources
            .iter()
            .max_by(|a, b| a.fitness.total_cmp(&b.fitness))
            .unwrap();
        assert_eq!(out.best.position, best.position);
        assert_eq!(out.best.iteration, 0);
        assert_eq!(out.state.iteration, 0);
    }

    #[test]
    fn failed_evaluations_score_the_sentinel() {
        let domain = ContinuousBox::cube(1, -1.0, 1.0).unwrap();
        let failing = |x: &Vec<f64>| {
            if x[0] < 0.0 {
                Err(Error::Evaluation("diverged".into()))
            } else {
                Ok(EvaluationResult::objective_only(f64::NAN))
            }
        };
        let engine = Engine::new(&domain, &failing);
        let mut records = Vec::new();
        let state = engine
            .initialize(ColonyConfig::new(8, 1), &mut records)
            .unwrap();
        for s in &state.sources {
            assert_eq!(s.objective, FAILED_OBJECTIVE);
        }
        assert!(records.iter().all(|r| r.objective == FAILED_OBJECTIVE));
        assert!(state.global_best.metrics.failed);
        assert!(state.global_best.metrics.failure.is_some());
    }

    #[test]
    fn budget_caps_invocations() {
        let domain = ContinuousBox::cube(2, -5.0, 5.0).unwrap();
        let calls = AtomicU64::new(0);
        let counted = |x: &Vec<f64>| {
            calls.fetch_add(1, Ordering::Relaxed);
            sphere(x)
        };
        let options = EngineOptions {
            max_evaluations: Some(10),
            ..EngineOptions::default()
        };
        let engine = Engine::new(&domain, &counted)
            .with_options(options)
            .unwrap();
        let mut records = Vec::new();
        let out = engine.run(ColonyConfig::new(4, 6), &mut records).unwrap();
        assert!(out.state.budget_exhausted);
        assert!(out.state.is_finished());
        assert_eq!(calls.load(Ordering::Relaxed), 10);
        assert_eq!(out.state.counters.invocations, 10);
        assert_eq!(records.len() as u64, out.state.counters.events);

        let tiny = EngineOptions {
            max_evaluations: Some(3),
            ..EngineOptions::default()
        };
        let engine = Engine::new(&domain, &sphere).with_options(tiny).unwrap();
        assert!(matches!(
            engine.initialize(ColonyConfig::new(4, 6), &mut NullSink),
            Err(Error::Config(_))
        ));
    }

    fn small_space() -> ArchitectureSpace {
        let vocabulary = vec![
            OperationSpec::new("dense8", OpKind::Dense { units: 8 }).unwrap(),
            OperationSpec::new("dense16", OpKind::Dense { units: 16 }).unwrap(),
            OperationSpec::new("identity", OpKind::Identity).unwrap(),
        ];
        ArchitectureSpace::new(3, vocabulary).unwrap()
    }

    fn run_nas(
        memoize: bool,
        workers: usize,
    ) -> (Vec<HistoryRecord>, ColonyState<ArchitectureEncoding>, u64) {
        let space = small_space();
        let surrogate = SurrogateEvaluator::new(space.clone(), 11);
        let calls = AtomicU64::new(0);
        let counted = |a: &ArchitectureEncoding| {
            calls.fetch_add(1, Ordering::Relaxed);
            surrogate.evaluate(a)
        };
        let options = EngineOptions {
            memoize,
            workers,
            ..EngineOptions::default()
        };
        let engine = Engine::new(&space, &counted).with_options(options).unwrap();
        let mut config = ColonyConfig::new(5, 4);
        config.iterations = 8;
        let mut records = Vec::new();
        let out = engine.run(config, &mut records).unwrap();
        let n = calls.load(Ordering::Relaxed);
        (records, out.state, n)
    }

    #[test]
    fn memoization_changes_cost_not_trajectory() {
        let (with, state_with, calls_with) = run_nas(true, 1);
        let (without, state_without, calls_without) = run_nas(false, 1);
        let strip = |rs: &[HistoryRecord]| -> Vec<(String, f64, u32)> {
            rs.iter()
                .map(|r| (r.candidate.clone(), r.objective, r.trials))
                .collect()
        };
        assert_eq!(strip(&with), strip(&without));
        assert_eq!(state_with.global_best, state_without.global_best);
        assert_eq!(calls_without, without.len() as u64);
        assert_eq!(calls_with, state_with.counters.invocations);
        assert!(
            calls_with <= 27,
            "at most one call per distinct architecture"
        );
        let hits = with.iter().filter(|r| r.cache_hit).count() as u64;
        assert_eq!(hits, state_with.counters.cache_hits);
        assert_eq!(hits + calls_with, with.len() as u64);
        assert!(without.iter().all(|r| !r.cache_hit));
    }

    #[test]
    fn duplicates_within_a_batch_are_evaluated_once() {
        let vocabulary = vec![
            OperationSpec::new("dense8", OpKind::Dense { units: 8 }).unwrap(),
            OperationSpec::new("identity", OpKind::Identity).unwrap(),
        ];
        let space = ArchitectureSpace::new(1, vocabulary).unwrap();
        let surrogate = SurrogateEvaluator::new(space.clone(), 2);
        let calls = AtomicU64::new(0);
        let counted = |a: &ArchitectureEncoding| {
            calls.fetch_add(1, Ordering::Relaxed);
            surrogate.evaluate(a)
        };
        let engine = Engine::new(&space, &counted);
        let mut records = Vec::new();
        let state = engine
            .initialize(ColonyConfig::new(6, 0), &mut records)
            .unwrap();
        assert!(calls.load(Ordering::Relaxed) <= 2);
        let first_seen: std::collections::HashSet<_> = records
            .iter()
            .filter(|r| !r.cache_hit)
            .map(|r| r.candidate.clone())
            .collect();
        assert_eq!(first_seen.len() as u64, state.counters.invocations);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let (serial, serial_state, _) = run_nas(true, 1);
        let (parallel, parallel_state, _) = run_nas(true, 4);
        assert_eq!(serial, parallel);
        assert_eq!(serial_state, parallel_state);

        let domain = ContinuousBox::cube(4, -5.12, 5.12).unwrap();
        let run = |workers| {
            let options = EngineOptions {
                workers,
                ..EngineOptions::default()
            };
            let engine = Engine::new(&domain, &rastrigin)
                .with_options(options)
                .unwrap();
            let mut records = Vec::new();
            engine.run(ColonyConfig::new(8, 3), &mut records).unwrap();
            records
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn stepping_matches_a_full_run() {
        let domain = ContinuousBox::cube(2, -5.0, 5.0).unwrap();
        let engine = Engine::new(&domain, &sphere);
        let config = ColonyConfig::new(4, 12);
        let mut whole = Vec::new();
        let out = engine.run(config.clone(), &mut whole).unwrap();

        let mut parts = Vec::new();
        let mut state = engine.initialize(config, &mut parts).unwrap();
        let mut stops = 0;
        while !state.is_finished() {
            engine
                .run_from(&mut state, &mut parts, &mut |_| {
                    stops += 1;
                    Ok(Flow::Stop)
                })
                .unwrap();
        }
        assert_eq!(stops, 30);
        assert_eq!(parts, whole);
        assert_eq!(state, out.state);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn run_invariants(
            seed in any::<u64>(),
            sources in 1usize..7,
            onlookers in 0usize..9,
            limit in 1u32..6,
            iterations in 0u64..12,
        ) {
            let domain = ContinuousBox::cube(3, -5.12, 5.12).unwrap();
            let engine = Engine::new(&domain, &rastrigin);
            let config = ColonyConfig {
                num_food_sources: sources,
                num_onlookers: onlookers,
                abandonment_limit: limit,
                iterations,
                seed,
            };
            let mut records = Vec::new();
            let mut state = engine.initialize(config, &mut records).unwrap();
            let mut best = state.global_best.fitness;
            engine.run_from(&mut state, &mut records, &mut |s| {
                assert!(s.global_best.fitness >= best);
                best = s.global_best.fitness;
                if s.next_phase == Phase::Employee {
                    assert!(s.sources.iter().all(|src| src.trials < s.config.abandonment_limit));
                }
                for src in &s.sources {
                    assert!(domain.contains(&src.position));
                    assert_eq!(src.fitness, fitness_transform(src.objective).unwrap());
                }
                Ok(Flow::Continue)
            }).unwrap();

            prop_assert_eq!(state.iteration, iterations);
            prop_assert_eq!(
                records.len(),
                sources + iterations as usize * (sources + onlookers)
                    + records.iter().filter(|r| r.iteration > 0 && r.phase == RecordPhase::Scout).count()
            );
            let mut running = f64::NEG_INFINITY;
            for r in &records {
                prop_assert_eq!(r.fitness, fitness_transform(r.objective).unwrap());
                prop_assert_eq!(r.is_global_best, r.fitness > running);
                running = running.max(r.fitness);
            }
            prop_assert_eq!(running, state.global_best.fitness);
            let best_source = state.sources.iter().map(|s| s.fitness).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(state.global_best.fitness >= best_source);
        }
    }
}
