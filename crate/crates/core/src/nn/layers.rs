//! Per-sample forward and backward kernels. Tensors are flat `f64` slices in
//! height-width-channel order.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::ColonyRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamArray {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl ParamArray {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        ParamArray {
            shape,
            values: vec![0.0; n],
        }
    }

    /// He-scaled normal initialization, `std = sqrt(2 / fan_in)`.
    pub fn he_normal(shape: Vec<usize>, fan_in: usize, rng: &mut ColonyRng) -> Self {
        let std = (2.0 / fan_in as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("finite std");
        let n = shape.iter().product();
        let values = (0..n).map(|_| normal.sample(rng.inner())).collect();
        ParamArray { shape, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Zeroes gradient entries whose pre-activation was not positive.
fn relu_backward(grad: &mut [f64], pre: &[f64]) {
    for (g, p) in grad.iter_mut().zip(pre) {
        if *p <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Same-padded 2-D convolution, stride 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub kernel: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub relu: bool,
    /// `[kernel, kernel, in_channels, out_channels]`
    pub weight: ParamArray,
    pub bias: ParamArray,
}

impl Conv2d {
    pub fn new(
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
        relu: bool,
        rng: &mut ColonyRng,
    ) -> Self {
        Conv2d {
            kernel,
            in_channels,
            out_channels,
            relu,
            weight: ParamArray::he_normal(
                vec![kernel, kernel, in_channels, out_channels],
                kernel * kernel * in_channels,
                rng,
            ),
            bias: ParamArray::zeros(vec![out_channels]),
        }
    }

    fn pad(&self) -> isize {
        ((self.kernel - 1) / 2) as isize
    }

    /// Pre-activation output for an `(h, w, in_channels)` input.
    pub fn forward_pre(&self, x: &[f64], h: usize, w: usize) -> Vec<f64> {
        let (k, cin, cout) = (self.kernel, self.in_channels, self.out_channels);
        let pad = self.pad();
        let mut out = Vec::with_capacity(h * w * cout);
        for _ in 0..h * w {
            out.extend_from_slice(&self.bias.values);
        }
        for y in 0..h {
            for xx in 0..w {
                let o = (y * w + xx) * cout;
                for ky in 0..k {
                    let iy = y as isize + ky as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = xx as isize + kx as isize - pad;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let i = (iy as usize * w + ix as usize) * cin;
                        for ci in 0..cin {
                            let xv = x[i + ci];
                            if xv == 0.0 {
                                continue;
                            }
                            let wb = ((ky * k + kx) * cin + ci) * cout;
                            let row = &self.weight.values[wb..wb + cout];
                            for (acc, wv) in out[o..o + cout].iter_mut().zip(row) {
                                *acc += xv * wv;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Accumulates parameter gradients and returns the input gradient, given
    /// the gradient with respect to the pre-activation.
    pub fn backward_pre(
        &self,
        x: &[f64],
        h: usize,
        w: usize,
        grad_pre: &[f64],
        grad_weight: &mut [f64],
        grad_bias: &mut [f64],
    ) -> Vec<f64> {
        let (k, cin, cout) = (self.kernel, self.in_channels, self.out_channels);
        let pad = self.pad();
        let mut grad_x = vec![0.0; h * w * cin];
        for y in 0..h {
            for xx in 0..w {
                let o = (y * w + xx) * cout;
                let g = &grad_pre[o..o + cout];
                for (gb, gv) in grad_bias.iter_mut().zip(g) {
                    *gb += gv;
                }
                for ky in 0..k {
                    let iy = y as isize + ky as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = xx as isize + kx as isize - pad;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let i = (iy as usize * w + ix as usize) * cin;
                        for ci in 0..cin {
                            let wb = ((ky * k + kx) * cin + ci) * cout;
                            let xv = x[i + ci];
                            let row = &self.weight.values[wb..wb + cout];
                            let mut acc = 0.0;
                            for c in 0..cout {
                                acc += g[c] * row[c];
                                grad_weight[wb + c] += xv * g[c];
                            }
                            grad_x[i + ci] += acc;
                        }
                    }
                }
            }
        }
        grad_x
    }

    pub fn forward(&self, x: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
        let pre = self.forward_pre(x, h, w);
        let mut out = pre.clone();
        if self.relu {
            relu_in_place(&mut out);
        }
        (pre, out)
    }

    pub fn backward(
        &self,
        x: &[f64],
        pre: &[f64],
        h: usize,
        w: usize,
        grad_out: &[f64],
        grad_weight: &mut [f64],
        grad_bias: &mut [f64],
    ) -> Vec<f64> {
        let mut g = grad_out.to_vec();
        if self.relu {
            relu_backward(&mut g, pre);
        }
        self.backward_pre(x, h, w, &g, grad_weight, grad_bias)
    }
}

/// Fully connected layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub units: usize,
    pub relu: bool,
    /// `[inputs, units]`
    pub weight: ParamArray,
    pub bias: ParamArray,
}

impl Dense {
    pub fn new(inputs: usize, units: usize, relu: bool, rng: &mut ColonyRng) -> Self {
        Dense {
            inputs,
            units,
            relu,
            weight: ParamArray::he_normal(vec![inputs, units], inputs, rng),
            bias: ParamArray::zeros(vec![units]),
        }
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut pre = self.bias.values.clone();
        for (i, xv) in x.iter().enumerate() {
            if *xv == 0.0 {
                continue;
            }
            let row = &self.weight.values[i * self.units..(i + 1) * self.units];
            for (acc, wv) in pre.iter_mut().zip(row) {
                *acc += xv * wv;
            }
        }
        let mut out = pre.clone();
        if self.relu {
            relu_in_place(&mut out);
        }
        (pre, out)
    }

    pub fn backward(
        &self,
        x: &[f64],
        pre: &[f64],
        grad_out: &[f64],
        grad_weight: &mut [f64],
        grad_bias: &mut [f64],
    ) -> Vec<f64> {
        let mut g = grad_out.to_vec();
        if self.relu {
            relu_backward(&mut g, pre);
        }
        for (gb, gv) in grad_bias.iter_mut().zip(&g) {
            *gb += gv;
        }
        let mut grad_x = vec![0.0; self.inputs];
        for (i, xv) in x.iter().enumerate() {
            let row = &self.weight.values[i * self.units..(i + 1) * self.units];
            let grow = &mut grad_weight[i * self.units..(i + 1) * self.units];
            let mut acc = 0.0;
            for u in 0..self.units {
                acc += g[u] * row[u];
                grow[u] += xv * g[u];
            }
            grad_x[i] = acc;
        }
        grad_x
    }
}

/// 2x2 max pooling with stride 2 (floor on odd sizes). Returns the pooled
/// tensor and, per output cell, the flat input index that won.
pub fn maxpool_forward(x: &[f64], h: usize, w: usize, c: usize) -> (Vec<f64>, Vec<usize>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut argmax = Vec::with_capacity(oh * ow * c);
    for y in 0..oh {
        for xx in 0..ow {
            for ch in 0..c {
                let mut best_i = ((2 * y) * w + 2 * xx) * c + ch;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = ((2 * y + dy) * w + 2 * xx + dx) * c + ch;
                    if x[i] > x[best_i] {
                        best_i = i;
                    }
                }
                out.push(x[best_i]);
                argmax.push(best_i);
            }
        }
    }
    (out, argmax)
}

pub fn maxpool_backward(input_len: usize, argmax: &[usize], grad_out: &[f64]) -> Vec<f64> {
    let mut grad = vec![0.0; input_len];
    for (&i, g) in argmax.iter().zip(grad_out) {
        grad[i] += g;
    }
    grad
}

/// Inverted dropout mask: each entry is 0 with probability `rate`, else
/// `1 / (1 - rate)`.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut ColonyRng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.unit() < rate { 0.0 } else { keep })
        .collect()
}

/// `conv(relu) -> conv` plus a skip path that is the identity or a 1x1
/// projection when channel counts differ. No activation after the sum.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub first: Conv2d,
    pub second: Conv2d,
    pub projection: Option<Conv2d>,
}

impl Residual {
    pub fn new(in_channels: usize, filters: usize, rng: &mut ColonyRng) -> Self {
        let first = Conv2d::new(3, in_channels, filters, true, rng);
        let second = Conv2d::new(3, filters, filters, false, rng);
        let projection =
            (in_channels != filters).then(|| Conv2d::new(1, in_channels, filters, false, rng));
        Residual {
            first,
            second,
            projection,
        }
    }
}

/// Softmax probabilities, shifted by the max logit for stability.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1000.0, -3.0, 2.5, 0.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn maxpool_routes_to_the_maximum() {
        // 2x2x1 input, max at index 2.
        let (out, arg) = maxpool_forward(&[1.0, -1.0, 4.0, 3.0], 2, 2, 1);
        assert_eq!(out, vec![4.0]);
        assert_eq!(arg, vec![2]);
        assert_eq!(maxpool_backward(4, &arg, &[2.0]), vec![0.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn one_by_one_conv_is_channel_mixing() {
        let mut rng = ColonyRng::seed_from(1);
        let mut conv = Conv2d::new(1, 2, 1, false, &mut rng);
        conv.weight.values = vec![2.0, -1.0];
        conv.bias.values = vec![0.5];
        // 1x2 spatial, 2 channels.
        let out = conv.forward_pre(&[1.0, 1.0, 3.0, 2.0], 1, 2);
        assert_eq!(out, vec![1.5, 4.5]);
    }

    #[test]
    fn dropout_mask_rate() {
        let mut rng = ColonyRng::seed_from(8);
        let mask = dropout_mask(100_000, 0.3, &mut rng);
        let dropped = mask.iter().filter(|m| **m == 0.0).count() as f64 / 100_000.0;
        assert!((dropped - 0.3).abs() < 0.01);
        assert!(mask
            .iter()
            .all(|m| *m == 0.0 || (*m - 1.0 / 0.7).abs() < 1e-15));
    }
}
