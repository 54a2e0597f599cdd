//! Oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use apiary::abc::HistoryRecord;
use apiary::evaluation::SurrogateEvaluator;
use apiary::nas::{ArchitectureEncoding, ArchitectureSpace, OpKind, OperationSpec};
use apiary::nn::{build_network, Network, TensorShape};
use apiary::rng::ColonyRng;

pub fn op(id: &str, kind: OpKind) -> OperationSpec {
    OperationSpec::new(id, kind).unwrap()
}

pub fn arch(tokens: &[&str]) -> ArchitectureEncoding {
    ArchitectureEncoding::new(tokens.iter().map(|t| t.to_string()).collect())
}

/// Exhaustive minimum of the surrogate objective. Ties go to the first
/// architecture in enumeration order.
pub fn brute_force_optimum(eval: &SurrogateEvaluator) -> (ArchitectureEncoding, f64) {
    let mut best: Option<(ArchitectureEncoding, f64)> = None;
    for a in eval.space().enumerate_all() {
        let f = eval.objective(&a).unwrap();
        if best.as_ref().is_none_or(|(_, b)| f < *b) {
            best = Some((a, f));
        }
    }
    best.unwrap()
}

/// The vocabulary used by the small-space oracle runs.
pub fn dense_space(units: &[usize], depth: usize) -> ArchitectureSpace {
    let mut vocabulary: Vec<OperationSpec> = units
        .iter()
        .map(|&u| op(&format!("dense{u}"), OpKind::Dense { units: u }))
        .collect();
    vocabulary.push(op("identity", OpKind::Identity));
    ArchitectureSpace::new(depth, vocabulary).unwrap()
}

pub struct GradientCase {
    pub name: &'static str,
    pub network: Network,
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    /// Seed of the dropout masks; `None` runs in inference mode.
    pub dropout_seed: Option<u64>,
}

fn case(
    name: &'static str,
    vocabulary: Vec<OperationSpec>,
    tokens: &[&str],
    shape: TensorShape,
    dropout_seed: Option<u64>,
) -> GradientCase {
    let space = ArchitectureSpace::new(tokens.len().max(1), vocabulary).unwrap();
    let mut rng = ColonyRng::seed_from(name.len() as u64 * 7919);
    let network = build_network(&space, &arch(tokens), &shape, 3, &mut rng).unwrap();
    let batch = 3;
    let features = (0..batch * shape.size())
        .map(|_| rng.symmetric_unit())
        .collect();
    let labels = (0..batch).map(|i| i % 3).collect();
    GradientCase {
        name,
        network,
        features,
        labels,
        dropout_seed,
    }
}

/// One small network per layer kind, each ending in the softmax head.
pub fn gradient_cases() -> Vec<GradientCase> {
    use OpKind::*;
    let spatial = TensorShape::spatial(4, 4, 2);
    vec![
        case(
            "softmax cross-entropy head",
            vec![op("identity", Identity)],
            &["identity"],
            TensorShape::flat(5),
            None,
        ),
        case(
            "dense",
            vec![op("dense6", Dense { units: 6 })],
            &["dense6", "dense6"],
            TensorShape::flat(5),
            None,
        ),
        case(
            "conv",
            vec![op(
                "conv3x3",
                Conv {
                    filters: 3,
                    kernel: 3,
                },
            )],
            &["conv3x3", "conv3x3"],
            spatial.clone(),
            None,
        ),
        case(
            "maxpool",
            vec![
                op(
                    "conv3x3",
                    Conv {
                        filters: 3,
                        kernel: 3,
                    },
                ),
                op("maxpool2", MaxPool),
            ],
            &["conv3x3", "maxpool2"],
            spatial.clone(),
            None,
        ),
        case(
            "dropout",
            vec![
                op("dense8", Dense { units: 8 }),
                op("dropout0.5", Dropout { rate: 0.5 }),
            ],
            &["dense8", "dropout0.5", "dense8"],
            TensorShape::flat(5),
            Some(99),
        ),
        case(
            "residual identity skip",
            vec![op("res2", ResidualBlock { filters: 2 })],
            &["res2"],
            spatial.clone(),
            None,
        ),
        case(
            "residual projection skip",
            vec![op("res3", ResidualBlock { filters: 3 })],
            &["res3"],
            spatial,
            None,
        ),
    ]
}

/// Largest per-array relative error `|a - n| / (|a| + |n|)` (Euclidean norms)
/// between analytic and central-difference gradients over every parameter
/// array of the case.
pub fn gradient_error(case: &GradientCase) -> f64 {
    let h = 1e-6;
    let loss = |net: &Network| {
        let mut rng = case.dropout_seed.map(ColonyRng::seed_from);
        net.loss_and_gradients(&case.features, &case.labels, rng.as_mut())
            .unwrap()
    };
    let (_, analytic) = loss(&case.network);
    let mut net = case.network.clone();
    let mut worst: f64 = 0.0;
    for (k, grad) in analytic.arrays.iter().enumerate() {
        let mut diff = 0.0;
        let mut a_norm = 0.0;
        let mut n_norm = 0.0;
        for (i, a) in grad.iter().enumerate() {
            let original = net.params()[k].values[i];
            net.params_mut()[k].values[i] = original + h;
            let up = loss(&net).0;
            net.params_mut()[k].values[i] = original - h;
            let down = loss(&net).0;
            net.params_mut()[k].values[i] = original;
            let numeric = (up - down) / (2.0 * h);
            diff += (a - numeric).powi(2);
            a_norm += a * a;
            n_norm += numeric * numeric;
        }
        let denominator = a_norm.sqrt() + n_norm.sqrt();
        if denominator > 0.0 {
            worst = worst.max(diff.sqrt() / denominator);
        }
    }
    worst
}

/// History as `(candidate, objective)` pairs.
pub fn trajectory(records: &[HistoryRecord]) -> Vec<(String, f64)> {
    records
        .iter()
        .map(|r| (r.candidate.clone(), r.objective))
        .collect()
}
