//! Architecture search against the deterministic surrogate objective,
//! compared with exhaustive enumeration of the same space.
//!
//!     cargo run --release --example surrogate_nas

use apiary::abc::{ColonyConfig, Engine, EngineOptions};
use apiary::evaluation::SurrogateEvaluator;
use apiary::nas::ArchitectureSpace;

fn main() -> apiary::Result<()> {
    let space = ArchitectureSpace::with_default_vocabulary(4)?;
    let eval = SurrogateEvaluator::new(space.clone(), 7);

    let (optimum, best) = space
        .enumerate_all()
        .map(|a| {
            let f = eval.objective(&a).expect("member of the space");
            (a, f)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty space");

    let engine = Engine::new(&space, &eval).with_options(EngineOptions {
        workers: 4,
        ..EngineOptions::default()
    })?;
    let mut config = ColonyConfig::new(10, 3);
    config.iterations = 40;
    let mut history = Vec::new();
    let out = engine.run(config, &mut history)?;

    println!("space of {} candidates", space.cardinality().unwrap_or(0));
    println!("exhaustive optimum: {optimum}  objective {best:.4}");
    println!(
        "colony best:        {}  objective {:.4}",
        out.best.position, out.best.objective
    );
    println!(
        "{} evaluation events, {} evaluator calls, {} cache hits",
        history.len(),
        out.state.counters.invocations,
        out.state.counters.cache_hits
    );
    Ok(())
}
