//! Continuous box domain and classical benchmark functions, used to check the
//! colony engine independently of architecture search.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::abc::SearchDomain;
use crate::error::{Error, Result};
use crate::evaluation::{EvaluationResult, Evaluator, Metrics};
use crate::rng::ColonyRng;

/// Axis-aligned box `[lower_i, upper_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ContinuousBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Config(format!(
                "box bounds must have the same positive length (got {} and {})",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::Config(format!(
                    "bound {i}: need finite lower < upper, got [{l}, {u}]"
                )));
            }
        }
        Ok(ContinuousBox { lower, upper })
    }

    /// The same interval in every coordinate.
    pub fn cube(dimension: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dimension], vec![upper; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// `l_i + u * (u_i - l_i)` for coordinate `i` and a unit draw `u`.
    pub fn sample_coordinate(&self, i: usize, u: f64) -> f64 {
        self.lower[i] + u * (self.upper[i] - self.lower[i])
    }

    /// Coordinate-wise uniform sample.
    pub fn random_point(&self, rng: &mut ColonyRng) -> Vec<f64> {
        (0..self.dimension())
            .map(|i| self.sample_coordinate(i, rng.unit()))
            .collect()
    }

    /// Moves coordinate `i` to `x_i + phi * (x_i - partner_i)`, clamped to
    /// the box.
    pub fn perturb(
        &self,
        position: &[f64],
        partner: &[f64],
        i: usize,
        phi: f64,
    ) -> Result<Vec<f64>> {
        let n = self.dimension();
        if position.len() != n || partner.len() != n {
            return Err(Error::Domain(format!(
                "dimension mismatch: box has {n}, position {} and partner {}",
                position.len(),
                partner.len()
            )));
        }
        let mut next = position.to_vec();
        let moved = position[i] + phi * (position[i] - partner[i]);
        next[i] = moved.clamp(self.lower[i], self.upper[i]);
        Ok(next)
    }
}

impl SearchDomain for ContinuousBox {
    type Position = Vec<f64>;

    fn random_position(&self, rng: &mut ColonyRng) -> Vec<f64> {
        self.random_point(rng)
    }

    fn uses_partner(&self) -> bool {
        true
    }

    fn neighbor(
        &self,
        position: &Vec<f64>,
        partner: Option<&Vec<f64>>,
        rng: &mut ColonyRng,
    ) -> Result<Vec<f64>> {
        let i = rng.index(self.dimension());
        let phi = rng.symmetric_unit();
        self.perturb(position, partner.unwrap_or(position), i, phi)
    }

    fn key(&self, position: &Vec<f64>) -> String {
        position
            .iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkFunction {
    /// `sum x_i^2`, minimum 0 at the origin.
    Sphere,
    /// `sum 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2`, minimum 0 at all-ones.
    Rosenbrock,
    /// `10 n + sum x_i^2 - 10 cos(2 pi x_i)`, minimum 0 at the origin.
    Rastrigin,
}

impl BenchmarkFunction {
    pub const ALL: [BenchmarkFunction; 3] = [
        BenchmarkFunction::Sphere,
        BenchmarkFunction::Rosenbrock,
        BenchmarkFunction::Rastrigin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkFunction::Sphere => "sphere",
            BenchmarkFunction::Rosenbrock => "rosenbrock",
            BenchmarkFunction::Rastrigin => "rastrigin",
        }
    }

    pub fn min_dimension(self) -> usize {
        match self {
            BenchmarkFunction::Rosenbrock => 2,
            _ => 1,
        }
    }

    pub fn evaluate(self, x: &[f64]) -> f64 {
        match self {
            BenchmarkFunction::Sphere => x.iter().map(|v| v * v).sum(),
            BenchmarkFunction::Rosenbrock => x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum(),
            BenchmarkFunction::Rastrigin => {
                10.0 * x.len() as f64
                    + x.iter()
                        .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
                        .sum::<f64>()
            }
        }
    }

    /// Known global minimizer and minimum for dimension `n`.
    pub fn known_optimum(self, n: usize) -> (Vec<f64>, f64) {
        match self {
            BenchmarkFunction::Rosenbrock => (vec![1.0; n], 0.0),
            _ => (vec![0.0; n], 0.0),
        }
    }
}

impl fmt::Display for BenchmarkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchmarkFunction::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown benchmark `{s}` (expected sphere, rosenbrock or rastrigin)"
                ))
            })
    }
}

/// Passes a point straight to a benchmark function.
#[derive(Clone, Copy, Debug)]
pub struct BenchmarkEvaluator {
    pub function: BenchmarkFunction,
}

impl Evaluator<Vec<f64>> for BenchmarkEvaluator {
    fn evaluate(&self, position: &Vec<f64>) -> Result<EvaluationResult> {
        Ok(EvaluationResult::new(
            self.function.evaluate(position),
            Metrics::default(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sampling_substitution() {
        let unit = ContinuousBox::cube(1, 0.0, 1.0).unwrap();
        assert_eq!(unit.sample_coordinate(0, 0.5), 0.5);
        let wide = ContinuousBox::cube(1, -5.0, 5.0).unwrap();
        assert_eq!(wide.sample_coordinate(0, 0.0), -5.0);
    }

    #[test]
    fn sample_mean_is_centered() {
        let b = ContinuousBox::cube(3, 2.0, 4.0).unwrap();
        let mut rng = ColonyRng::seed_from(99);
        let n = 100_000;
        let mut sums = [0.0; 3];
        for _ in 0..n {
            for (s, v) in sums.iter_mut().zip(b.random_point(&mut rng)) {
                *s += v;
            }
        }
        for s in sums {
            assert!((s / n as f64 - 3.0).abs() < 0.02);
        }
    }

    #[test]
    fn perturb_examples() {
        let b = ContinuousBox::cube(1, -5.0, 5.0).unwrap();
        assert_eq!(b.perturb(&[2.0], &[1.0], 0, 0.5).unwrap(), vec![2.5]);
        assert_eq!(b.perturb(&[1.5], &[1.5], 0, 0.9).unwrap(), vec![1.5]);
        assert_eq!(b.perturb(&[4.9], &[-5.0], 0, 1.0).unwrap(), vec![5.0]);
        assert!(matches!(
            b.perturb(&[1.0, 2.0], &[1.0], 0, 0.1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn invalid_boxes() {
        assert!(ContinuousBox::new(vec![0.0], vec![0.0]).is_err());
        assert!(ContinuousBox::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(ContinuousBox::new(vec![], vec![]).is_err());
        assert!(ContinuousBox::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn benchmark_optima() {
        assert_eq!(BenchmarkFunction::Sphere.evaluate(&[0.0; 10]), 0.0);
        assert_eq!(BenchmarkFunction::Rosenbrock.evaluate(&[1.0; 5]), 0.0);
        assert_eq!(BenchmarkFunction::Rastrigin.evaluate(&[0.0; 10]), 0.0);
        for f in BenchmarkFunction::ALL {
            for n in f.min_dimension()..8 {
                let (x, v) = f.known_optimum(n);
                assert!((f.evaluate(&x) - v).abs() < 1e-12);
            }
            assert_eq!(f.name().parse::<BenchmarkFunction>().unwrap(), f);
        }
        assert!("ackley".parse::<BenchmarkFunction>().is_err());
    }

    #[test]
    fn benchmark_spot_values() {
        assert_eq!(BenchmarkFunction::Sphere.evaluate(&[1.0, -2.0]), 5.0);
        // 100 (1 - 0)^2 + (1 - 0)^2
        assert_eq!(BenchmarkFunction::Rosenbrock.evaluate(&[0.0, 1.0]), 101.0);
        // 10 + 0.25 - 10 cos(pi) = 20.25
        assert!((BenchmarkFunction::Rastrigin.evaluate(&[0.5]) - 20.25).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn neighbors_stay_in_box_and_move_one_coordinate(seed in any::<u64>(), n in 1usize..12) {
            let b = ContinuousBox::cube(n, -5.0, 5.0).unwrap();
            let mut rng = ColonyRng::seed_from(seed);
            let x = b.random_point(&mut rng);
            let p = b.random_point(&mut rng);
            prop_assert!(b.contains(&x));
            let y = b.neighbor(&x, Some(&p), &mut rng).unwrap();
            prop_assert!(b.contains(&y));
            prop_assert!(x.iter().zip(&y).filter(|(a, c)| a != c).count() <= 1);
        }

        #[test]
        fn benchmarks_are_pure(x in proptest::collection::vec(-5.0f64..5.0, 2..10)) {
            for f in BenchmarkFunction::ALL {
                prop_assert_eq!(f.evaluate(&x).to_bits(), f.evaluate(&x).to_bits());
            }
        }
    }
}
