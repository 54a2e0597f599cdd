//! End-to-end search on two-moons: partial training ranks candidates, the
//! winner is trained fully and saved.
//!
//!     cargo run --release --example two_moons_nas

use std::fs::File;
use std::io::BufWriter;

use apiary::abc::{ColonyConfig, Engine, EngineOptions};
use apiary::evaluation::data::two_moons;
use apiary::evaluation::{DatasetSplits, LfeConfig, LfeEvaluator};
use apiary::nas::{ArchitectureSpace, OpKind, OperationSpec};
use apiary::nn::io::write_network;
use apiary::rng::ColonyRng;

fn main() -> apiary::Result<()> {
    let vocabulary = [8, 16, 32, 64, 128]
        .into_iter()
        .map(|units| OperationSpec::new(format!("dense{units}"), OpKind::Dense { units }))
        .collect::<apiary::Result<Vec<_>>>()?;
    let space = ArchitectureSpace::new(3, vocabulary)?;

    let data = two_moons(500, 0.1, &mut ColonyRng::seed_from(0))?;
    let splits = DatasetSplits::new(&data, 0.2, 0.2, 0)?;
    let lfe = LfeConfig {
        epsilon_epochs: 2,
        learning_rate: 0.05,
        ..LfeConfig::default()
    };
    let eval = LfeEvaluator::new(space.clone(), splits, lfe, 0)?;

    let engine = Engine::new(&space, &eval).with_options(EngineOptions {
        workers: 2,
        ..EngineOptions::default()
    })?;
    let mut history = Vec::new();
    let out = engine.run(ColonyConfig::new(7, 0), &mut history)?;
    println!(
        "search: best {} with validation accuracy {:.3} after {} trainings",
        out.best.position,
        out.best.metrics.accuracy.unwrap_or(f64::NAN),
        out.state.counters.invocations
    );

    let full = eval.full_train(&out.best.position)?;
    println!(
        "full training: {} epochs, validation accuracy {:.3}, test accuracy {:.3}",
        full.history.epochs_run(),
        full.result.metrics.accuracy.unwrap_or(f64::NAN),
        full.result.metrics.test_accuracy.unwrap_or(f64::NAN)
    );

    let path = std::env::temp_dir().join("two_moons_best.bin");
    let file = File::create(&path).map_err(|e| apiary::Error::io(&path, e))?;
    write_network(BufWriter::new(file), &full.network).map_err(|e| apiary::Error::io(&path, e))?;
    println!("parameters written to {}", path.display());
    Ok(())
}
