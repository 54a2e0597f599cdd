//! Labelled datasets, synthetic generators and the train/validation/test
//! split used by the trainer.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::nn::{Samples, TensorShape};
use crate::rng::ColonyRng;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// Row-major, `shape.size()` values per sample.
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    pub shape: TensorShape,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Vec<f64>,
        labels: Vec<usize>,
        shape: TensorShape,
        num_classes: usize,
    ) -> Result<Self> {
        let name = name.into();
        if features.len() != labels.len() * shape.size() {
            return Err(Error::Dataset(format!(
                "{name}: {} feature values do not fit {} samples of shape {shape}",
                features.len(),
                labels.len()
            )));
        }
        if num_classes < 2 {
            return Err(Error::Dataset(format!("{name}: need at least 2 classes")));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Dataset(format!(
                "{name}: label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Dataset {
            name,
            features,
            labels,
            shape,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn sample(&self, i: usize) -> &[f64] {
        let w = self.shape.size();
        &self.features[i * w..(i + 1) * w]
    }
}

fn noise(std_dev: f64) -> Result<Normal<f64>> {
    if !(std_dev >= 0.0 && std_dev.is_finite()) {
        return Err(Error::Dataset(format!(
            "noise must be finite and non-negative, got {std_dev}"
        )));
    }
    Normal::new(0.0, std_dev)
        .map_err(|e| Error::Dataset(format!("invalid noise level {std_dev}: {e}")))
}

fn check_count(name: &str, samples: usize) -> Result<()> {
    if samples < 4 {
        return Err(Error::Dataset(format!("{name}: need at least 4 samples")));
    }
    Ok(())
}

/// Two interleaving half circles. Half the samples sit on the upper moon
/// (class 0), half on the lower, shifted one (class 1), with gaussian noise.
pub fn two_moons(samples: usize, noise_std: f64, rng: &mut ColonyRng) -> Result<Dataset> {
    check_count("two_moons", samples)?;
    let dist = noise(noise_std)?;
    let outer = samples / 2;
    let inner = samples - outer;
    let mut features = Vec::with_capacity(samples * 2);
    let mut labels = Vec::with_capacity(samples);
    for i in 0..outer {
        let t = PI * i as f64 / (outer - 1).max(1) as f64;
        features.push(t.cos() + dist.sample(rng.inner()));
        features.push(t.sin() + dist.sample(rng.inner()));
        labels.push(0);
    }
    for i in 0..inner {
        let t = PI * i as f64 / (inner - 1).max(1) as f64;
        features.push(1.0 - t.cos() + dist.sample(rng.inner()));
        features.push(0.5 - t.sin() + dist.sample(rng.inner()));
        labels.push(1);
    }
    Dataset::new("two_moons", features, labels, TensorShape::flat(2), 2)
}

/// Two concentric rings, the inner one scaled by `factor` in `(0, 1)`.
pub fn circles(
    samples: usize,
    noise_std: f64,
    factor: f64,
    rng: &mut ColonyRng,
) -> Result<Dataset> {
    check_count("circles", samples)?;
    if !(factor > 0.0 && factor < 1.0) {
        return Err(Error::Dataset(format!(
            "circles: factor must be in (0, 1), got {factor}"
        )));
    }
    let dist = noise(noise_std)?;
    let outer = samples / 2;
    let inner = samples - outer;
    let mut features = Vec::with_capacity(samples * 2);
    let mut labels = Vec::with_capacity(samples);
    for (count, radius, label) in [(outer, 1.0, 0), (inner, factor, 1)] {
        for i in 0..count {
            let t = 2.0 * PI * i as f64 / count as f64;
            features.push(radius * t.cos() + dist.sample(rng.inner()));
            features.push(radius * t.sin() + dist.sample(rng.inner()));
            labels.push(label);
        }
    }
    Dataset::new("circles", features, labels, TensorShape::flat(2), 2)
}

/// Isotropic gaussian clusters in 2-D with centers evenly spaced on a circle
/// of radius 5. Sample `i` belongs to class `i % classes`.
pub fn blobs(
    samples: usize,
    classes: usize,
    noise_std: f64,
    rng: &mut ColonyRng,
) -> Result<Dataset> {
    check_count("blobs", samples)?;
    if classes < 2 {
        return Err(Error::Dataset("blobs: need at least 2 classes".into()));
    }
    let dist = noise(noise_std)?;
    let mut features = Vec::with_capacity(samples * 2);
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let c = i % classes;
        let angle = 2.0 * PI * c as f64 / classes as f64;
        features.push(5.0 * angle.cos() + dist.sample(rng.inner()));
        features.push(5.0 * angle.sin() + dist.sample(rng.inner()));
        labels.push(c);
    }
    Dataset::new("blobs", features, labels, TensorShape::flat(2), classes)
}

/// One owned partition of a dataset.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplitData {
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
}

impl SplitData {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn samples(&self) -> Samples<'_> {
        Samples {
            features: &self.features,
            labels: &self.labels,
        }
    }
}

/// Train, validation and test partitions, standardized with statistics of
/// the training partition.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplits {
    pub train: SplitData,
    pub validation: SplitData,
    pub test: SplitData,
    pub shape: TensorShape,
    pub num_classes: usize,
    /// Per-feature `(mean, std)` used for standardization.
    pub standardization: Vec<(f64, f64)>,
}

impl DatasetSplits {
    /// Shuffles with `seed`, holds out `round(n * test_fraction)` samples for
    /// testing, then `round(rest * validation_fraction)` for validation. Every
    /// partition must end up non-empty.
    pub fn new(
        dataset: &Dataset,
        test_fraction: f64,
        validation_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        for (name, f) in [
            ("test_fraction", test_fraction),
            ("validation_fraction", validation_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("{name} must be in (0, 1), got {f}")));
            }
        }
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(ColonyRng::seed_from(seed).inner());
        let n_test = (dataset.len() as f64 * test_fraction).round() as usize;
        let rest = dataset.len() - n_test;
        let n_val = (rest as f64 * validation_fraction).round() as usize;
        let n_train = rest.saturating_sub(n_val);
        if n_test == 0 || n_val == 0 || n_train == 0 {
            return Err(Error::Dataset(format!(
                "{}: {} samples leave an empty partition (train {n_train}, validation {n_val}, test {n_test})",
                dataset.name,
                dataset.len()
            )));
        }
        let take = |idx: &[usize]| SplitData {
            features: idx
                .iter()
                .flat_map(|&i| dataset.sample(i).iter().copied())
                .collect(),
            labels: idx.iter().map(|&i| dataset.labels[i]).collect(),
        };
        let mut test = take(&order[..n_test]);
        let mut validation = take(&order[n_test..n_test + n_val]);
        let mut train = take(&order[n_test + n_val..]);

        let width = dataset.shape.size();
        let standardization: Vec<(f64, f64)> = (0..width)
            .map(|j| {
                let n = train.len() as f64;
                let mean = train.features.iter().skip(j).step_by(width).sum::<f64>() / n;
                let var = train
                    .features
                    .iter()
                    .skip(j)
                    .step_by(width)
                    .map(|v| (v - mean).powi(2))
                    .sum::<f64>()
                    / n;
                let std = var.sqrt();
                (mean, if std > 1e-12 { std } else { 1.0 })
            })
            .collect();
        for part in [&mut train, &mut validation, &mut test] {
            for (k, v) in part.features.iter_mut().enumerate() {
                let (mean, std) = standardization[k % width];
                *v = (*v - mean) / std;
            }
        }
        Ok(DatasetSplits {
            train,
            validation,
            test,
            shape: dataset.shape.clone(),
            num_classes: dataset.num_classes,
            standardization,
        })
    }
}
