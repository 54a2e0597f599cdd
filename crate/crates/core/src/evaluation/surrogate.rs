use super::{EvaluationResult, Evaluator, Metrics};
use crate::error::{Error, Result};
use crate::nas::{encode, ArchitectureEncoding, ArchitectureSpace};
use crate::rng::derive_seed;

/// Deterministic stand-in for training.
///
/// Every (slot, token) pair gets a unary weight and every (slot, token,
/// next token) triple a pairwise weight, each in `[0, 1)`, taken from the top
/// 53 bits of `derive_seed(seed, label)` with labels `"w|{slot}|{token}"` and
/// `"v|{slot}|{token}|{next}"`. The score of an architecture is the sum of its
/// unary and pairwise weights, and the objective is
/// `1 - score / best_score`, where `best_score` is the exact maximum over the
/// whole space (found by dynamic programming along the chain).
#[derive(Clone, Debug)]
pub struct SurrogateEvaluator {
    space: ArchitectureSpace,
    unary: Vec<Vec<f64>>,
    pairwise: Vec<Vec<Vec<f64>>>,
    best_score: f64,
}

fn unit_hash(seed: u64, label: &str) -> f64 {
    (derive_seed(seed, label) >> 11) as f64 / (1u64 << 53) as f64
}

impl SurrogateEvaluator {
    pub fn new(space: ArchitectureSpace, seed: u64) -> Self {
        let tokens: Vec<&str> = space.vocabulary().iter().map(|o| o.id.as_str()).collect();
        let depth = space.depth();
        let unary: Vec<Vec<f64>> = (0..depth)
            .map(|i| {
                tokens
                    .iter()
                    .map(|t| unit_hash(seed, &format!("w|{i}|{t}")))
                    .collect()
            })
            .collect();
        let pairwise: Vec<Vec<Vec<f64>>> = (0..depth.saturating_sub(1))
            .map(|i| {
                tokens
                    .iter()
                    .map(|a| {
                        tokens
                            .iter()
                            .map(|b| unit_hash(seed, &format!("v|{i}|{a}|{b}")))
                            .collect()
                    })
                    .collect()
            })
            .collect();

        // best[j]: highest score of slots i.. given token j at slot i.
        let mut best = unary[depth - 1].clone();
        for i in (0..depth - 1).rev() {
            best = (0..tokens.len())
                .map(|a| {
                    let tail = (0..tokens.len())
                        .map(|b| pairwise[i][a][b] + best[b])
                        .fold(f64::NEG_INFINITY, f64::max);
                    unary[i][a] + tail
                })
                .collect();
        }
        let best_score = best.into_iter().fold(f64::NEG_INFINITY, f64::max);
        SurrogateEvaluator {
            space,
            unary,
            pairwise,
            best_score,
        }
    }

    pub fn space(&self) -> &ArchitectureSpace {
        &self.space
    }

    /// Highest attainable raw score in the space.
    pub fn best_score(&self) -> f64 {
        self.best_score
    }

    pub fn score(&self, arch: &ArchitectureEncoding) -> Result<f64> {
        let idx: Vec<usize> = arch
            .ops()
            .iter()
            .map(|t| self.space.token_index(t))
            .collect::<Option<_>>()
            .filter(|v: &Vec<usize>| v.len() == self.space.depth())
            .ok_or_else(|| {
                Error::Domain(format!("`{}` is not in the search space", encode(arch)))
            })?;
        let mut score: f64 = idx.iter().enumerate().map(|(i, &a)| self.unary[i][a]).sum();
        for (i, pair) in idx.windows(2).enumerate() {
            score += self.pairwise[i][pair[0]][pair[1]];
        }
        Ok(score)
    }

    pub fn objective(&self, arch: &ArchitectureEncoding) -> Result<f64> {
        let score = self.score(arch)?;
        if self.best_score <= 0.0 {
            return Ok(0.0);
        }
        Ok((1.0 - score / self.best_score).clamp(0.0, 1.0))
    }
}

impl Evaluator<ArchitectureEncoding> for SurrogateEvaluator {
    fn evaluate(&self, position: &ArchitectureEncoding) -> Result<EvaluationResult> {
        Ok(EvaluationResult::new(
            self.objective(position)?,
            Metrics::default(),
        ))
    }
}
