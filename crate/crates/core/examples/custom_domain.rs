//! Plugging a new search space into the engine: a bit string domain whose
//! neighbors flip one bit, scored by a closure.
//!
//!     cargo run --release --example custom_domain

use apiary::abc::{ColonyConfig, Engine, SearchDomain};
use apiary::evaluation::EvaluationResult;
use apiary::rng::ColonyRng;

struct BitStrings {
    len: usize,
}

impl SearchDomain for BitStrings {
    type Position = Vec<bool>;

    fn random_position(&self, rng: &mut ColonyRng) -> Vec<bool> {
        (0..self.len).map(|_| rng.unit() < 0.5).collect()
    }

    fn neighbor(
        &self,
        position: &Vec<bool>,
        _partner: Option<&Vec<bool>>,
        rng: &mut ColonyRng,
    ) -> apiary::Result<Vec<bool>> {
        let mut next = position.clone();
        let i = rng.index(self.len);
        next[i] = !next[i];
        Ok(next)
    }

    fn key(&self, position: &Vec<bool>) -> String {
        position
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }
}

fn main() -> apiary::Result<()> {
    let domain = BitStrings { len: 24 };
    // Alternating pattern scores 0; each mismatching bit costs 1.
    let mismatches = |bits: &Vec<bool>| {
        let cost = bits
            .iter()
            .enumerate()
            .filter(|&(i, &b)| b != (i % 2 == 0))
            .count();
        Ok(EvaluationResult::objective_only(cost as f64))
    };
    let mut config = ColonyConfig::new(8, 5);
    config.abandonment_limit = 30;
    config.iterations = 150;
    let mut history = Vec::new();
    let out = Engine::new(&domain, &mismatches).run(config, &mut history)?;
    println!(
        "best {} with {} mismatches, found in iteration {}",
        domain.key(&out.best.position),
        out.best.objective,
        out.best.iteration
    );
    println!(
        "{} events, {} distinct strings evaluated",
        history.len(),
        out.state.counters.invocations
    );
    Ok(())
}
