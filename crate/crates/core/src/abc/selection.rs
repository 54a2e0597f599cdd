//! Fitness shaping and fitness-proportionate (roulette wheel) selection.

use crate::error::{Error, Result};
use crate::rng::ColonyRng;

/// Maps a raw objective (lower is better) to a strictly positive fitness
/// (higher is better): `1 / (1 + f)` for `f >= 0`, `1 + |f|` otherwise.
pub fn fitness_transform(objective: f64) -> Result<f64> {
    if !objective.is_finite() {
        return Err(Error::Domain(format!(
            "objective must be finite, got {objective}"
        )));
    }
    Ok(if objective >= 0.0 {
        1.0 / (1.0 + objective)
    } else {
        1.0 + objective.abs()
    })
}

/// Normalizes fitnesses into selection probabilities `fit_m / sum(fit)`.
pub fn selection_probabilities(fitnesses: &[f64]) -> Result<Vec<f64>> {
    if fitnesses.is_empty() {
        return Err(Error::Domain("cannot select from an empty colony".into()));
    }
    if let Some((i, f)) = fitnesses
        .iter()
        .enumerate()
        .find(|(_, f)| !(f.is_finite() && **f > 0.0))
    {
        return Err(Error::Domain(format!(
            "fitness at index {i} must be finite and positive, got {f}"
        )));
    }
    let total: f64 = fitnesses.iter().sum();
    Ok(fitnesses.iter().map(|f| f / total).collect())
}

/// Cumulative-sum roulette rule: the smallest index whose running sum
/// exceeds `u`. Falls back to the last index when rounding leaves the total
/// just below `u`.
pub fn roulette_index(probabilities: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        cumulative += p;
        if cumulative > u {
            return i;
        }
    }
    probabilities.len() - 1
}

/// Draws `u` uniformly in `[0, 1)` and applies [`roulette_index`].
pub fn roulette_select(probabilities: &[f64], rng: &mut ColonyRng) -> usize {
    debug_assert!(!probabilities.is_empty());
    let u = rng.unit();
    roulette_index(probabilities, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fitness_examples() {
        assert_eq!(fitness_transform(0.0).unwrap(), 1.0);
        assert_eq!(fitness_transform(1.0).unwrap(), 0.5);
        assert_eq!(fitness_transform(-1.0).unwrap(), 2.0);
    }

    #[test]
    fn fitness_rejects_non_finite() {
        assert!(matches!(fitness_transform(f64::NAN), Err(Error::Domain(_))));
        assert!(fitness_transform(f64::INFINITY).is_err());
        assert!(fitness_transform(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn probability_examples() {
        assert_eq!(
            selection_probabilities(&[1.0, 1.0, 2.0]).unwrap(),
            vec![0.25, 0.25, 0.5]
        );
        assert_eq!(selection_probabilities(&[5.0]).unwrap(), vec![1.0]);
        assert_eq!(selection_probabilities(&[0.5; 4]).unwrap(), vec![0.25; 4]);
    }

    #[test]
    fn probabilities_reject_bad_input() {
        assert!(selection_probabilities(&[]).is_err());
        assert!(selection_probabilities(&[1.0, 0.0]).is_err());
        assert!(selection_probabilities(&[1.0, -2.0]).is_err());
        assert!(selection_probabilities(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn roulette_hand_trace() {
        // cumulative [0.5, 1.0]; 0.5 is not > 0.7, 1.0 is.
        assert_eq!(roulette_index(&[0.5, 0.5], 0.7), 1);
        assert_eq!(roulette_index(&[0.5, 0.5], 0.0), 0);
        assert_eq!(roulette_index(&[0.5, 0.5], 0.5), 1);
        let mut rng = ColonyRng::seed_from(3);
        for _ in 0..100 {
            assert_eq!(roulette_select(&[1.0], &mut rng), 0);
        }
    }

    #[test]
    fn roulette_frequencies_follow_probabilities() {
        let probs = [0.25, 0.25, 0.5];
        let mut rng = ColonyRng::seed_from(11);
        let mut counts = [0usize; 3];
        let n = 100_000;
        for _ in 0..n {
            counts[roulette_select(&probs, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip(probs) {
            assert!((*c as f64 / n as f64 - p).abs() < 0.02);
        }
    }

    proptest! {
        #[test]
        fn fitness_is_positive_and_decreasing(a in 0.0f64..1e12, b in 0.0f64..1e12) {
            let (fa, fb) = (fitness_transform(a).unwrap(), fitness_transform(b).unwrap());
            prop_assert!(fa > 0.0 && fb > 0.0);
            if a < b {
                prop_assert!(fa >= fb);
            }
        }

        #[test]
        fn probabilities_are_scale_invariant(
            fits in proptest::collection::vec(1e-6f64..1e6, 1..40),
            scale in 1e-3f64..1e3,
        ) {
            let p = selection_probabilities(&fits).unwrap();
            let scaled: Vec<f64> = fits.iter().map(|f| f * scale).collect();
            let q = selection_probabilities(&scaled).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (x, y) in p.iter().zip(&q) {
                prop_assert!((x - y).abs() < 1e-12);
                prop_assert!(*x > 0.0 && *x <= 1.0);
            }
        }
    }
}
