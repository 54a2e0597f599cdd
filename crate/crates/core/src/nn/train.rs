use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::Network;
use crate::error::{Error, Result};
use crate::rng::ColonyRng;

/// Borrowed view of a labelled sample set, features row-major.
#[derive(Clone, Copy, Debug)]
pub struct Samples<'a> {
    pub features: &'a [f64],
    pub labels: &'a [usize],
}

impl Samples<'_> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Stop once validation loss has not improved for this many epochs and
    /// roll back to the best epoch. `None` disables early stopping.
    pub patience: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
    pub validation_accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    pub stopped_early: bool,
    /// Epoch (1-based) whose parameters the network holds after an early
    /// stop.
    pub restored_epoch: Option<usize>,
}

impl TrainingHistory {
    pub fn epochs_run(&self) -> usize {
        self.epochs.len()
    }
}

/// Minibatch SGD with a seeded shuffle per epoch. Each record carries the
/// mean minibatch training loss and, when a validation set is given, its
/// loss and accuracy after the epoch.
pub fn train(
    net: &mut Network,
    training: Samples<'_>,
    validation: Option<Samples<'_>>,
    options: &TrainOptions,
    rng: &mut ColonyRng,
) -> Result<TrainingHistory> {
    if training.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    if options.batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    if !(options.learning_rate.is_finite() && options.learning_rate >= 0.0) {
        return Err(Error::Config(format!(
            "learning_rate must be finite and non-negative, got {}",
            options.learning_rate
        )));
    }
    let width = net.input_shape.size();
    if training.features.len() != width * training.len() {
        return Err(Error::Shape(format!(
            "training features hold {} values, expected {} x {}",
            training.features.len(),
            training.len(),
            width
        )));
    }
    let validation = validation.filter(|v| !v.is_empty());

    let mut history = TrainingHistory::default();
    let mut order: Vec<usize> = (0..training.len()).collect();
    let mut batch_x = Vec::with_capacity(options.batch_size * width);
    let mut batch_y = Vec::with_capacity(options.batch_size);
    let mut best: Option<(f64, usize, Vec<Vec<f64>>)> = None;

    for epoch in 1..=options.epochs {
        order.shuffle(rng.inner());
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(options.batch_size) {
            batch_x.clear();
            batch_y.clear();
            for &i in chunk {
                batch_x.extend_from_slice(&training.features[i * width..(i + 1) * width]);
                batch_y.push(training.labels[i]);
            }
            let (loss, grads) = net.loss_and_gradients(&batch_x, &batch_y, Some(rng))?;
            net.sgd_step(&grads, options.learning_rate)?;
            loss_sum += loss;
            batches += 1;
        }
        let (validation_accuracy, validation_loss) = match validation {
            Some(v) => net.evaluate(v.features, v.labels)?,
            None => (f64::NAN, f64::NAN),
        };
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            validation_loss,
            validation_accuracy,
        });

        if let (Some(patience), Some(_)) = (options.patience, validation) {
            let improved = best
                .as_ref()
                .is_none_or(|(loss, _, _)| validation_loss < *loss);
            if improved {
                best = Some((validation_loss, epoch, net.snapshot()));
            } else if epoch - best.as_ref().map_or(0, |b| b.1) >= patience {
                let (_, best_epoch, params) = best.take().expect("best epoch recorded");
                net.restore(&params);
                history.stopped_early = true;
                history.restored_epoch = Some(best_epoch);
                break;
            }
        }
    }
    Ok(history)
}
