//! Minimizes sphere, Rosenbrock and Rastrigin with a small colony.
//!
//!     cargo run --release --example benchmark_functions

use apiary::abc::{ColonyConfig, Engine, NullSink};
use apiary::benchmarks::{BenchmarkEvaluator, BenchmarkFunction, ContinuousBox};

fn main() -> apiary::Result<()> {
    for (function, dimension) in [
        (BenchmarkFunction::Sphere, 10),
        (BenchmarkFunction::Rosenbrock, 4),
        (BenchmarkFunction::Rastrigin, 5),
    ] {
        let domain = ContinuousBox::cube(dimension, -5.0, 5.0)?;
        let eval = BenchmarkEvaluator { function };
        let config = ColonyConfig {
            num_food_sources: 10,
            num_onlookers: 10,
            abandonment_limit: 25,
            iterations: 200,
            seed: 1,
        };
        let out = Engine::new(&domain, &eval).run(config, &mut NullSink)?;
        let (_, optimum) = function.known_optimum(dimension);
        println!(
            "{:<10} n={dimension:<2} best {:.3e} (optimum {optimum}) at iteration {}",
            function.name(),
            out.best.objective,
            out.best.iteration
        );
    }
    Ok(())
}
