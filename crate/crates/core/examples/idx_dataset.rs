//! Writes a tiny synthetic image set in IDX format, loads it back the way
//! MNIST files are loaded and runs a short convolutional search on it.
//!
//!     cargo run --release --example idx_dataset

use apiary::abc::{ColonyConfig, Engine};
use apiary::evaluation::idx::{load_idx_dataset, write_idx, IdxArray};
use apiary::evaluation::{DatasetSplits, LfeConfig, LfeEvaluator};
use apiary::nas::{ArchitectureSpace, OpKind, OperationSpec};
use apiary::rng::ColonyRng;

/// 8x8 images: class 0 is a bright horizontal bar, class 1 a vertical bar.
fn images(count: usize, rng: &mut ColonyRng) -> (Vec<u8>, Vec<u8>) {
    let mut pixels = Vec::with_capacity(count * 64);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let class = (i % 2) as u8;
        let line = 1 + rng.index(6);
        for r in 0..8 {
            for c in 0..8 {
                let on = if class == 0 { r == line } else { c == line };
                let noise = (rng.unit() * 40.0) as u8;
                pixels.push(if on { 215 + noise } else { noise });
            }
        }
        labels.push(class);
    }
    (pixels, labels)
}

fn main() -> apiary::Result<()> {
    let dir = std::env::temp_dir().join("apiary-idx-example");
    std::fs::create_dir_all(&dir).map_err(|e| apiary::Error::io(&dir, e))?;
    let (pixels, labels) = images(200, &mut ColonyRng::seed_from(1));
    let image_path = dir.join("images.idx");
    let label_path = dir.join("labels.idx");
    write_idx(
        &image_path,
        &IdxArray {
            dims: vec![200, 8, 8],
            data: pixels,
        },
    )?;
    write_idx(
        &label_path,
        &IdxArray {
            dims: vec![200],
            data: labels,
        },
    )?;

    let data = load_idx_dataset(&image_path, &label_path, None)?;
    println!("loaded {} images of shape {}", data.len(), data.shape);
    let splits = DatasetSplits::new(&data, 0.2, 0.2, 1)?;

    let vocabulary = vec![
        OperationSpec::new(
            "conv3x4",
            OpKind::Conv {
                filters: 4,
                kernel: 3,
            },
        )?,
        OperationSpec::new("maxpool2", OpKind::MaxPool)?,
        OperationSpec::new("dense16", OpKind::Dense { units: 16 })?,
        OperationSpec::new("identity", OpKind::Identity)?,
    ];
    let space = ArchitectureSpace::new(3, vocabulary)?;
    let lfe = LfeConfig {
        epsilon_epochs: 2,
        full_train_epochs: 20,
        learning_rate: 0.05,
        ..LfeConfig::default()
    };
    let eval = LfeEvaluator::new(space.clone(), splits, lfe, 1)?;
    let mut config = ColonyConfig::new(4, 1);
    config.iterations = 3;
    let out = Engine::new(&space, &eval).run(config, &mut apiary::abc::NullSink)?;
    let full = eval.full_train(&out.best.position)?;
    println!(
        "best {}  test accuracy {:.3}",
        out.best.position,
        full.result.metrics.test_accuracy.unwrap_or(f64::NAN)
    );
    Ok(())
}
