mod common;

use apiary::nas::{ArchitectureEncoding, ArchitectureSpace, OpKind};
use apiary::nn::{build_network, TensorShape};
use apiary::rng::ColonyRng;

/// Expected body output dimensions and total parameter count, computed
/// directly from the tokens.
fn expected(
    space: &ArchitectureSpace,
    arch: &ArchitectureEncoding,
    input: &[usize],
    classes: usize,
) -> (Vec<usize>, usize) {
    let conv = |k: usize, c: usize, f: usize| k * k * c * f + f;
    let mut dims = input.to_vec();
    let mut params = 0;
    for token in arch.ops() {
        let spatial = dims.len() == 3;
        match space.operation(token).unwrap().kind {
            OpKind::Conv { filters, kernel } if spatial => {
                params += conv(kernel, dims[2], filters);
                dims[2] = filters;
            }
            OpKind::MaxPool if spatial && dims[0] >= 2 && dims[1] >= 2 => {
                dims = vec![dims[0] / 2, dims[1] / 2, dims[2]];
            }
            OpKind::ResidualBlock { filters } if spatial => {
                let c = dims[2];
                params += conv(3, c, filters) + conv(3, filters, filters);
                if c != filters {
                    params += conv(1, c, filters);
                }
                dims[2] = filters;
            }
            OpKind::Dense { units } => {
                let inputs: usize = dims.iter().product();
                params += inputs * units + units;
                dims = vec![units];
            }
            _ => {}
        }
    }
    let features: usize = dims.iter().product();
    (dims, params + features * classes + classes)
}

#[test]
fn random_architectures_follow_the_shape_rules() {
    let space = ArchitectureSpace::with_default_vocabulary(6).unwrap();
    let inputs: [Vec<usize>; 4] = [vec![8, 8, 1], vec![5, 7, 3], vec![2, 2, 2], vec![12]];
    let mut rng = ColonyRng::seed_from(2024);
    for i in 0..1000 {
        let input = &inputs[i % inputs.len()];
        let classes = 2 + i % 4;
        let arch = space.random_architecture(&mut rng);
        let shape = TensorShape::new(input.clone()).unwrap();
        let net = build_network(&space, &arch, &shape, classes, &mut rng).unwrap();
        let (dims, params) = expected(&space, &arch, input, classes);
        let body_out = net
            .layers
            .last()
            .map_or(shape.clone(), |l| l.output_shape.clone());
        assert_eq!(body_out.dims(), &dims[..], "{arch}");
        assert_eq!(net.param_count(), params, "{arch}");
        for pair in net.layers.windows(2) {
            assert_eq!(pair[0].output_shape, pair[1].input_shape, "{arch}");
        }
        if i % 25 == 0 {
            let x: Vec<f64> = (0..shape.size()).map(|_| rng.symmetric_unit()).collect();
            let probs = net.forward(&x).unwrap();
            assert_eq!(probs[0].len(), classes);
        }
    }
}
