use serde::{Deserialize, Serialize};

use super::data::DatasetSplits;
use super::{EvaluationResult, Evaluator, Metrics};
use crate::error::{Error, Result};
use crate::nas::{encode, ArchitectureEncoding, ArchitectureSpace};
use crate::nn::{build_network, train, Network, TrainOptions, TrainingHistory};
use crate::rng::{derive_seed, ColonyRng};

/// Partial-training budget and SGD settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LfeConfig {
    /// Epochs of partial training per candidate, below 10.
    pub epsilon_epochs: usize,
    /// Epoch cap for the final training of the winner.
    pub full_train_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    /// Early stopping patience in epochs, on validation loss.
    pub patience: usize,
}

impl Default for LfeConfig {
    fn default() -> Self {
        LfeConfig {
            epsilon_epochs: 7,
            full_train_epochs: 200,
            batch_size: 32,
            learning_rate: 0.01,
            validation_fraction: 0.2,
            patience: 10,
        }
    }
}

impl LfeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..10).contains(&self.epsilon_epochs) {
            return Err(Error::Config(format!(
                "epsilon_epochs must be in 1..=9, got {}",
                self.epsilon_epochs
            )));
        }
        if self.full_train_epochs < self.epsilon_epochs {
            return Err(Error::Config(format!(
                "full_train_epochs ({}) must be at least epsilon_epochs ({})",
                self.full_train_epochs, self.epsilon_epochs
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation_fraction must be in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        Ok(())
    }
}

fn train_candidate(
    space: &ArchitectureSpace,
    arch: &ArchitectureEncoding,
    data: &DatasetSplits,
    cfg: &LfeConfig,
    epochs: usize,
    seed: u64,
) -> Result<(Network, TrainingHistory, Metrics)> {
    if !space.contains(arch) {
        return Err(Error::Domain(format!(
            "`{}` is not in the search space",
            encode(arch)
        )));
    }
    // One private stream per architecture: initialization, shuffling and
    // dropout all depend only on (seed, encoding).
    let mut rng = ColonyRng::seed_from(derive_seed(seed, &encode(arch)));
    let mut net = build_network(space, arch, &data.shape, data.num_classes, &mut rng)?;
    let options = TrainOptions {
        epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        patience: Some(cfg.patience),
    };
    let history = train(
        &mut net,
        data.train.samples(),
        Some(data.validation.samples()),
        &options,
        &mut rng,
    )?;
    let (accuracy, loss) = net.evaluate(&data.validation.features, &data.validation.labels)?;
    let metrics = Metrics {
        accuracy: Some(accuracy),
        loss: Some(loss),
        param_count: Some(net.param_count()),
        epochs_run: Some(history.epochs_run()),
        ..Metrics::default()
    };
    Ok((net, history, metrics))
}

fn objective_of(metrics: &Metrics) -> f64 {
    1.0 - metrics.accuracy.unwrap_or(0.0)
}

/// Trains `arch` for `cfg.epsilon_epochs` and scores it by validation error.
pub fn lfe_evaluate(
    space: &ArchitectureSpace,
    arch: &ArchitectureEncoding,
    data: &DatasetSplits,
    cfg: &LfeConfig,
    seed: u64,
) -> Result<EvaluationResult> {
    let (_, _, metrics) = train_candidate(space, arch, data, cfg, cfg.epsilon_epochs, seed)?;
    if !metrics.loss.is_some_and(f64::is_finite) {
        return Err(Error::Evaluation(format!(
            "`{}` diverged during training",
            encode(arch)
        )));
    }
    Ok(EvaluationResult::new(objective_of(&metrics), metrics))
}

#[derive(Clone, Debug)]
pub struct FullTrainOutcome {
    pub result: EvaluationResult,
    pub network: Network,
    pub history: TrainingHistory,
}

/// Trains `arch` for up to `cfg.full_train_epochs` with early stopping, then
/// reports test accuracy alongside the validation metrics.
pub fn full_train_best(
    space: &ArchitectureSpace,
    arch: &ArchitectureEncoding,
    data: &DatasetSplits,
    cfg: &LfeConfig,
    seed: u64,
) -> Result<FullTrainOutcome> {
    let (network, history, mut metrics) =
        train_candidate(space, arch, data, cfg, cfg.full_train_epochs, seed)?;
    let (test_accuracy, _) = network.evaluate(&data.test.features, &data.test.labels)?;
    metrics.test_accuracy = Some(test_accuracy);
    Ok(FullTrainOutcome {
        result: EvaluationResult::new(objective_of(&metrics), metrics),
        network,
        history,
    })
}

/// Lower-fidelity estimator over a fixed dataset split.
#[derive(Clone, Debug)]
pub struct LfeEvaluator {
    pub space: ArchitectureSpace,
    pub data: DatasetSplits,
    pub config: LfeConfig,
    pub seed: u64,
}

impl LfeEvaluator {
    pub fn new(
        space: ArchitectureSpace,
        data: DatasetSplits,
        config: LfeConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        Ok(LfeEvaluator {
            space,
            data,
            config,
            seed,
        })
    }

    pub fn full_train(&self, arch: &ArchitectureEncoding) -> Result<FullTrainOutcome> {
        full_train_best(&self.space, arch, &self.data, &self.config, self.seed)
    }
}

impl Evaluator<ArchitectureEncoding> for LfeEvaluator {
    fn evaluate(&self, position: &ArchitectureEncoding) -> Result<EvaluationResult> {
        lfe_evaluate(&self.space, position, &self.data, &self.config, self.seed)
    }
}
