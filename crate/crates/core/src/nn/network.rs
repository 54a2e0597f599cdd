use serde::{Deserialize, Serialize};

use super::layers::{
    dropout_mask, maxpool_backward, maxpool_forward, softmax, Conv2d, Dense, ParamArray, Residual,
};
use super::shape::TensorShape;
use crate::error::{Error, Result};
use crate::nas::{ArchitectureEncoding, ArchitectureSpace, OpKind};
use crate::rng::ColonyRng;

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Conv(Conv2d),
    MaxPool,
    Dense(Dense),
    Dropout { rate: f64 },
    Identity,
    Residual(Residual),
    Flatten,
}

impl Layer {
    /// Tag used by the binary parameter container.
    pub fn tag(&self) -> u8 {
        match self {
            Layer::Identity => 0,
            Layer::Conv(_) => 1,
            Layer::MaxPool => 2,
            Layer::Dense(_) => 3,
            Layer::Dropout { .. } => 4,
            Layer::Residual(_) => 5,
            Layer::Flatten => 6,
        }
    }

    pub(crate) fn params(&self) -> Vec<&ParamArray> {
        match self {
            Layer::Conv(c) => vec![&c.weight, &c.bias],
            Layer::Dense(d) => vec![&d.weight, &d.bias],
            Layer::Residual(r) => {
                let mut v = vec![
                    &r.first.weight,
                    &r.first.bias,
                    &r.second.weight,
                    &r.second.bias,
                ];
                if let Some(p) = &r.projection {
                    v.extend([&p.weight, &p.bias]);
                }
                v
            }
            _ => Vec::new(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut ParamArray> {
        match self {
            Layer::Conv(c) => vec![&mut c.weight, &mut c.bias],
            Layer::Dense(d) => vec![&mut d.weight, &mut d.bias],
            Layer::Residual(r) => {
                let mut v = vec![
                    &mut r.first.weight,
                    &mut r.first.bias,
                    &mut r.second.weight,
                    &mut r.second.bias,
                ];
                if let Some(p) = &mut r.projection {
                    v.extend([&mut p.weight, &mut p.bias]);
                }
                v
            }
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerInstance {
    /// Vocabulary token this layer came from, or `"flatten"` for an implicit
    /// flatten.
    pub token: String,
    pub layer: Layer,
    pub input_shape: TensorShape,
    pub output_shape: TensorShape,
    /// True when a repair rule turned the requested op into an identity.
    pub repaired: bool,
}

/// Gradients aligned with [`Network::params`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    pub arrays: Vec<Vec<f64>>,
}

/// Linear body plus a flatten and affine softmax head.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub input_shape: TensorShape,
    pub num_classes: usize,
    pub layers: Vec<LayerInstance>,
    pub head: Dense,
    /// Flatten inserted before the head when the body ends spatially.
    pub head_flatten: bool,
}

enum Trace {
    None,
    Conv {
        input: Vec<f64>,
        pre: Vec<f64>,
    },
    Dense {
        input: Vec<f64>,
        pre: Vec<f64>,
    },
    Pool {
        input_len: usize,
        argmax: Vec<usize>,
    },
    Dropout {
        mask: Option<Vec<f64>>,
    },
    Residual {
        input: Vec<f64>,
        pre1: Vec<f64>,
        act1: Vec<f64>,
    },
}

/// Instantiates `arch` on `input_shape`, repairing structurally impossible
/// sequences:
///
/// - conv, maxpool and residual ops on a flat tensor become identity;
/// - maxpool on a spatial size below 2 becomes identity;
/// - dense on a spatial tensor is preceded by an implicit flatten.
pub fn build_network(
    space: &ArchitectureSpace,
    arch: &ArchitectureEncoding,
    input_shape: &TensorShape,
    num_classes: usize,
    rng: &mut ColonyRng,
) -> Result<Network> {
    if num_classes < 2 {
        return Err(Error::Build(format!(
            "need at least 2 classes, got {num_classes}"
        )));
    }
    let mut shape = input_shape.clone();
    let mut layers = Vec::with_capacity(arch.len() + 1);
    for token in arch.ops() {
        let op = space
            .operation(token)
            .ok_or_else(|| Error::Build(format!("unknown operation token `{token}`")))?;
        let input = shape.clone();
        let identity = |repaired: bool| LayerInstance {
            token: token.clone(),
            layer: Layer::Identity,
            input_shape: input.clone(),
            output_shape: input.clone(),
            repaired,
        };
        let instance = match (&op.kind, shape.hwc()) {
            (OpKind::Conv { filters, kernel }, Some((h, w, c))) => {
                shape = TensorShape::spatial(h, w, *filters);
                LayerInstance {
                    token: token.clone(),
                    layer: Layer::Conv(Conv2d::new(*kernel, c, *filters, true, rng)),
                    input_shape: input,
                    output_shape: shape.clone(),
                    repaired: false,
                }
            }
            (OpKind::MaxPool, Some((h, w, c))) if h >= 2 && w >= 2 => {
                shape = TensorShape::spatial(h / 2, w / 2, c);
                LayerInstance {
                    token: token.clone(),
                    layer: Layer::MaxPool,
                    input_shape: input,
                    output_shape: shape.clone(),
                    repaired: false,
                }
            }
            (OpKind::ResidualBlock { filters }, Some((h, w, c))) => {
                shape = TensorShape::spatial(h, w, *filters);
                LayerInstance {
                    token: token.clone(),
                    layer: Layer::Residual(Residual::new(c, *filters, rng)),
                    input_shape: input,
                    output_shape: shape.clone(),
                    repaired: false,
                }
            }
            (OpKind::Conv { .. } | OpKind::MaxPool | OpKind::ResidualBlock { .. }, _) => {
                identity(true)
            }
            (OpKind::Dense { units }, spatial) => {
                let mut inputs = shape.size();
                if spatial.is_some() {
                    let flat = shape.flattened();
                    layers.push(LayerInstance {
                        token: "flatten".into(),
                        layer: Layer::Flatten,
                        input_shape: shape.clone(),
                        output_shape: flat.clone(),
                        repaired: false,
                    });
                    inputs = flat.size();
                }
                shape = TensorShape::flat(*units);
                LayerInstance {
                    token: token.clone(),
                    layer: Layer::Dense(Dense::new(inputs, *units, true, rng)),
                    input_shape: TensorShape::flat(inputs),
                    output_shape: shape.clone(),
                    repaired: false,
                }
            }
            (OpKind::Dropout { rate }, _) => LayerInstance {
                token: token.clone(),
                layer: Layer::Dropout { rate: *rate },
                input_shape: input.clone(),
                output_shape: input,
                repaired: false,
            },
            (OpKind::Identity, _) => identity(false),
        };
        layers.push(instance);
    }
    let head_flatten = shape.is_spatial();
    let head = Dense::new(shape.size(), num_classes, false, rng);
    Ok(Network {
        input_shape: input_shape.clone(),
        num_classes,
        layers,
        head,
        head_flatten,
    })
}

impl Network {
    /// Shape fed to the head (always flat).
    pub fn head_input_shape(&self) -> TensorShape {
        self.layers
            .last()
            .map(|l| l.output_shape.flattened())
            .unwrap_or_else(|| self.input_shape.flattened())
    }

    /// Parameter arrays in a fixed order: body layers front to back, then the
    /// head.
    pub fn params(&self) -> Vec<&ParamArray> {
        let mut v: Vec<&ParamArray> = self.layers.iter().flat_map(|l| l.layer.params()).collect();
        v.extend([&self.head.weight, &self.head.bias]);
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamArray> {
        let mut v: Vec<&mut ParamArray> = self
            .layers
            .iter_mut()
            .flat_map(|l| l.layer.params_mut())
            .collect();
        v.extend([&mut self.head.weight, &mut self.head.bias]);
        v
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Parameters of the body alone (without the head).
    pub fn body_param_count(&self) -> usize {
        self.param_count() - self.head.weight.len() - self.head.bias.len()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            arrays: self.params().iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    fn check_input(&self, features: &[f64], count: usize) -> Result<()> {
        let width = self.input_shape.size();
        if features.len() != width * count {
            return Err(Error::Shape(format!(
                "expected {count} samples of {} = {width} values, got {} values",
                self.input_shape,
                features.len()
            )));
        }
        Ok(())
    }

    /// Logits for one sample, with the traces needed for backpropagation.
    /// Dropout is active only when `dropout` carries a generator.
    fn forward_sample(
        &self,
        x: &[f64],
        mut dropout: Option<&mut ColonyRng>,
    ) -> (Vec<f64>, Vec<Trace>, Vec<f64>) {
        let mut traces = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for l in &self.layers {
            let (h, w, c) = l.input_shape.hwc().unwrap_or((1, 1, 1));
            let (next, trace) = match &l.layer {
                Layer::Identity | Layer::Flatten => (cur, Trace::None),
                Layer::Conv(conv) => {
                    let (pre, out) = conv.forward(&cur, h, w);
                    (out, Trace::Conv { input: cur, pre })
                }
                Layer::Dense(d) => {
                    let (pre, out) = d.forward(&cur);
                    (out, Trace::Dense { input: cur, pre })
                }
                Layer::MaxPool => {
                    let (out, argmax) = maxpool_forward(&cur, h, w, c);
                    (
                        out,
                        Trace::Pool {
                            input_len: cur.len(),
                            argmax,
                        },
                    )
                }
                Layer::Dropout { rate } => match dropout.as_deref_mut() {
                    Some(rng) => {
                        let mask = dropout_mask(cur.len(), *rate, rng);
                        let out = cur.iter().zip(&mask).map(|(v, m)| v * m).collect();
                        (out, Trace::Dropout { mask: Some(mask) })
                    }
                    None => (cur, Trace::Dropout { mask: None }),
                },
                Layer::Residual(r) => {
                    let (pre1, act1) = r.first.forward(&cur, h, w);
                    let mut out = r.second.forward_pre(&act1, h, w);
                    match &r.projection {
                        Some(p) => {
                            let skip = p.forward_pre(&cur, h, w);
                            for (o, s) in out.iter_mut().zip(skip) {
                                *o += s;
                            }
                        }
                        None => {
                            for (o, s) in out.iter_mut().zip(&cur) {
                                *o += s;
                            }
                        }
                    }
                    (
                        out,
                        Trace::Residual {
                            input: cur,
                            pre1,
                            act1,
                        },
                    )
                }
            };
            traces.push(trace);
            cur = next;
        }
        let (logits, _) = self.head.forward(&cur);
        (logits, traces, cur)
    }

    /// Body output for one sample in inference mode (before the head).
    pub fn body_output(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x, 1)?;
        Ok(self.forward_sample(x, None).2)
    }

    /// Softmax class probabilities for every sample, inference mode.
    pub fn forward(&self, features: &[f64]) -> Result<Vec<Vec<f64>>> {
        let width = self.input_shape.size();
        self.check_input(features, features.len() / width.max(1))?;
        Ok(features
            .chunks(width)
            .map(|x| softmax(&self.forward_sample(x, None).0))
            .collect())
    }

    /// Mean cross-entropy over the batch and its exact gradient. Dropout
    /// masks are drawn from `dropout` when given (training mode).
    pub fn loss_and_gradients(
        &self,
        features: &[f64],
        labels: &[usize],
        mut dropout: Option<&mut ColonyRng>,
    ) -> Result<(f64, Gradients)> {
        self.check_input(features, labels.len())?;
        if labels.is_empty() {
            return Err(Error::Shape("empty batch".into()));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= self.num_classes) {
            return Err(Error::Shape(format!(
                "label {bad} out of range for {} classes",
                self.num_classes
            )));
        }
        let width = self.input_shape.size();
        let scale = 1.0 / labels.len() as f64;
        let mut grads = self.zero_gradients();
        let mut loss = 0.0;
        for (x, &y) in features.chunks(width).zip(labels) {
            let (logits, traces, head_in) = self.forward_sample(x, dropout.as_deref_mut());
            let mut probs = softmax(&logits);
            loss -= probs[y].max(1e-300).ln() * scale;
            probs[y] -= 1.0;
            for p in probs.iter_mut() {
                *p *= scale;
            }
            self.backward_sample(&traces, &head_in, &probs, &mut grads);
        }
        Ok((loss, grads))
    }

    fn backward_sample(
        &self,
        traces: &[Trace],
        head_in: &[f64],
        grad_logits: &[f64],
        grads: &mut Gradients,
    ) {
        let n = grads.arrays.len();
        let (body, head) = grads.arrays.split_at_mut(n - 2);
        let (hw, hb) = head.split_at_mut(1);
        let mut g = self
            .head
            .backward(head_in, &[], grad_logits, &mut hw[0], &mut hb[0]);

        let mut offset = body.len();
        for (l, trace) in self.layers.iter().zip(traces).rev() {
            let (h, w, _) = l.input_shape.hwc().unwrap_or((1, 1, 1));
            g = match (&l.layer, trace) {
                (Layer::Conv(conv), Trace::Conv { input, pre }) => {
                    offset -= 2;
                    let (gw, gb) = body[offset..offset + 2].split_at_mut(1);
                    conv.backward(input, pre, h, w, &g, &mut gw[0], &mut gb[0])
                }
                (Layer::Dense(d), Trace::Dense { input, pre }) => {
                    offset -= 2;
                    let (gw, gb) = body[offset..offset + 2].split_at_mut(1);
                    d.backward(input, pre, &g, &mut gw[0], &mut gb[0])
                }
                (Layer::MaxPool, Trace::Pool { input_len, argmax }) => {
                    maxpool_backward(*input_len, argmax, &g)
                }
                (Layer::Dropout { .. }, Trace::Dropout { mask: Some(mask) }) => {
                    g.iter().zip(mask).map(|(a, m)| a * m).collect()
                }
                (Layer::Residual(r), Trace::Residual { input, pre1, act1 }) => {
                    let count = if r.projection.is_some() { 6 } else { 4 };
                    offset -= count;
                    let slots = &mut body[offset..offset + count];
                    let (first, rest) = slots.split_at_mut(2);
                    let (second, proj) = rest.split_at_mut(2);
                    let (g2w, g2b) = second.split_at_mut(1);
                    let g_act1 = r
                        .second
                        .backward_pre(act1, h, w, &g, &mut g2w[0], &mut g2b[0]);
                    let (g1w, g1b) = first.split_at_mut(1);
                    let mut g_in =
                        r.first
                            .backward(input, pre1, h, w, &g_act1, &mut g1w[0], &mut g1b[0]);
                    let g_skip = match &r.projection {
                        Some(p) => {
                            let (gpw, gpb) = proj.split_at_mut(1);
                            p.backward_pre(input, h, w, &g, &mut gpw[0], &mut gpb[0])
                        }
                        None => g.clone(),
                    };
                    for (a, b) in g_in.iter_mut().zip(g_skip) {
                        *a += b;
                    }
                    g_in
                }
                _ => g,
            };
        }
    }

    /// `param -= lr * grad` for every parameter.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != grads.arrays.len() {
            return Err(Error::Shape(format!(
                "gradient has {} arrays, network has {}",
                grads.arrays.len(),
                params.len()
            )));
        }
        for (p, g) in params.iter_mut().zip(&grads.arrays) {
            if p.len() != g.len() {
                return Err(Error::Shape("gradient array size mismatch".into()));
            }
            for (v, d) in p.values.iter_mut().zip(g) {
                *v -= learning_rate * d;
            }
        }
        Ok(())
    }

    /// Fraction of samples whose arg-max class equals the label, with the
    /// mean cross-entropy.
    pub fn evaluate(&self, features: &[f64], labels: &[usize]) -> Result<(f64, f64)> {
        if labels.is_empty() {
            return Err(Error::Shape("cannot evaluate on zero samples".into()));
        }
        let probs = self.forward(features)?;
        if probs.len() != labels.len() {
            return Err(Error::Shape("feature and label counts differ".into()));
        }
        let mut correct = 0usize;
        let mut loss = 0.0;
        for (p, &y) in probs.iter().zip(labels) {
            let pred = p
                .iter()
                .enumerate()
                .fold(0, |best, (i, v)| if *v > p[best] { i } else { best });
            if pred == y {
                correct += 1;
            }
            loss -= p[y].max(1e-300).ln();
        }
        let n = labels.len() as f64;
        Ok((correct as f64 / n, loss / n))
    }

    /// Copies every parameter value out (used to snapshot the best epoch).
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.params().iter().map(|p| p.values.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Vec<f64>]) {
        for (p, s) in self.params_mut().into_iter().zip(snapshot) {
            p.values.copy_from_slice(s);
        }
    }
}
