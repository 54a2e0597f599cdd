//! Uses the built-in trainer directly: builds a network from tokens, trains
//! it on gaussian blobs with early stopping and reports per-epoch losses.
//!
//!     cargo run --release --example train_network

use apiary::evaluation::data::blobs;
use apiary::evaluation::DatasetSplits;
use apiary::nas::{decode, ArchitectureSpace};
use apiary::nn::{build_network, train, TensorShape, TrainOptions};
use apiary::rng::ColonyRng;

fn main() -> apiary::Result<()> {
    let mut rng = ColonyRng::seed_from(3);
    let data = blobs(600, 4, 1.5, &mut rng)?;
    let splits = DatasetSplits::new(&data, 0.2, 0.2, 3)?;

    let space = ArchitectureSpace::with_default_vocabulary(3)?;
    let arch = decode(&space, "dense64|dropout0.3|dense64")?;
    let mut net = build_network(
        &space,
        &arch,
        &TensorShape::flat(2),
        data.num_classes,
        &mut rng,
    )?;
    println!("{arch}: {} parameters", net.param_count());

    let options = TrainOptions {
        epochs: 60,
        batch_size: 32,
        learning_rate: 0.05,
        patience: Some(8),
    };
    let history = train(
        &mut net,
        splits.train.samples(),
        Some(splits.validation.samples()),
        &options,
        &mut rng,
    )?;
    for e in history.epochs.iter().step_by(5) {
        println!(
            "epoch {:>3}  train loss {:.4}  validation loss {:.4}  accuracy {:.3}",
            e.epoch, e.train_loss, e.validation_loss, e.validation_accuracy
        );
    }
    if history.stopped_early {
        println!("stopped early, restored epoch {:?}", history.restored_epoch);
    }
    let (accuracy, _) = net.evaluate(&splits.test.features, &splits.test.labels)?;
    println!("test accuracy {accuracy:.3}");
    Ok(())
}
