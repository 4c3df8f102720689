//! Per-layer numeric kernels shared by evaluation, gradients and attribution.

use alloc::vec;
use alloc::vec::Vec;

use crate::graph::NodeKind;
use crate::tensor::Tensor;

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `(length, channels)` of a rank-1 or rank-2 spatial tensor.
pub(crate) fn spatial_dims(shape: &[usize]) -> (usize, usize) {
    match shape {
        [len] => (*len, 1),
        [len, ch] => (*len, *ch),
        _ => unreachable!("validated spatial shape"),
    }
}

#[inline]
pub(crate) fn prelu_slope(slope: &[f64], i: usize) -> f64 {
    slope[i % slope.len()]
}

pub(crate) fn affine_forward(weights: &Tensor, bias: &[f64], x: &[f64]) -> Vec<f64> {
    let cols = weights.shape()[1];
    weights
        .values()
        .chunks_exact(cols)
        .zip(bias)
        .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
        .collect()
}

/// `gx += Wᵀ gy`.
pub(crate) fn affine_transpose_acc(weights: &Tensor, gy: &[f64], gx: &mut [f64]) {
    let cols = weights.shape()[1];
    for (row, &g) in weights.values().chunks_exact(cols).zip(gy) {
        if g == 0.0 {
            continue;
        }
        for (acc, w) in gx.iter_mut().zip(row) {
            *acc += g * w;
        }
    }
}

pub(crate) fn affine_param_grad(x: &[f64], gy: &[f64], gw: &mut [f64], gb: &mut [f64]) {
    let cols = x.len();
    for ((row, &g), b) in gw.chunks_exact_mut(cols).zip(gy).zip(gb.iter_mut()) {
        *b += g;
        if g == 0.0 {
            continue;
        }
        for (acc, v) in row.iter_mut().zip(x) {
            *acc += g * v;
        }
    }
}

pub(crate) struct ConvDims {
    pub len: usize,
    pub channels: usize,
    pub filters: usize,
    pub width: usize,
    pub stride: usize,
    pub out_len: usize,
}

impl ConvDims {
    pub(crate) fn new(filters: &Tensor, stride: usize, input_shape: &[usize]) -> Self {
        let (len, channels) = spatial_dims(input_shape);
        let (n, width) = (filters.shape()[0], filters.shape()[1]);
        ConvDims {
            len,
            channels,
            filters: n,
            width,
            stride,
            out_len: (len - width) / stride + 1,
        }
    }

    fn window(&self) -> usize {
        self.width * self.channels
    }
}

/// Output `[out_len, filters]`; input `[len, channels]`; filters `[filters, width, channels]`.
pub(crate) fn conv_forward(filters: &Tensor, bias: &[f64], d: &ConvDims, x: &[f64]) -> Vec<f64> {
    let span = d.window();
    let mut out = vec![0.0; d.out_len * d.filters];
    for p in 0..d.out_len {
        let patch = &x[p * d.stride * d.channels..][..span];
        for (f, kernel) in filters.values().chunks_exact(span).enumerate() {
            let dot: f64 = kernel.iter().zip(patch).map(|(w, v)| w * v).sum();
            out[p * d.filters + f] = dot + bias[f];
        }
    }
    out
}

/// `gx += convᵀ(gy)`.
pub(crate) fn conv_transpose_acc(filters: &Tensor, d: &ConvDims, gy: &[f64], gx: &mut [f64]) {
    let span = d.window();
    for p in 0..d.out_len {
        let patch = &mut gx[p * d.stride * d.channels..][..span];
        for (f, kernel) in filters.values().chunks_exact(span).enumerate() {
            let g = gy[p * d.filters + f];
            if g == 0.0 {
                continue;
            }
            for (acc, w) in patch.iter_mut().zip(kernel) {
                *acc += g * w;
            }
        }
    }
}

pub(crate) fn conv_param_grad(d: &ConvDims, x: &[f64], gy: &[f64], gf: &mut [f64], gb: &mut [f64]) {
    let span = d.window();
    for p in 0..d.out_len {
        let patch = &x[p * d.stride * d.channels..][..span];
        for (f, kernel_grad) in gf.chunks_exact_mut(span).enumerate() {
            let g = gy[p * d.filters + f];
            if g == 0.0 {
                continue;
            }
            gb[f] += g;
            for (acc, v) in kernel_grad.iter_mut().zip(patch) {
                *acc += g * v;
            }
        }
    }
}

/// Flat input index of every pooled output; the lowest index wins exact ties.
pub(crate) fn maxpool_argmax(x: &[f64], input_shape: &[usize], width: usize, stride: usize) -> Vec<usize> {
    let (len, ch) = spatial_dims(input_shape);
    let out_len = (len - width) / stride + 1;
    let mut arg = Vec::with_capacity(out_len * ch);
    for p in 0..out_len {
        for c in 0..ch {
            let mut best = (p * stride) * ch + c;
            for k in 1..width {
                let i = (p * stride + k) * ch + c;
                if x[i] > x[best] {
                    best = i;
                }
            }
            arg.push(best);
        }
    }
    arg
}

/// Values of every piece for every output unit, laid out `[pieces, out]`.
pub(crate) fn maxout_pieces(weights: &Tensor, bias: &Tensor, x: &[f64]) -> Vec<f64> {
    let (pieces, rows, cols) = (weights.shape()[0], weights.shape()[1], weights.shape()[2]);
    let mut out = Vec::with_capacity(pieces * rows);
    for (row, b) in weights.values().chunks_exact(cols).zip(bias.values()) {
        out.push(row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b);
    }
    debug_assert_eq!(out.len(), pieces * rows);
    out
}

/// Winning piece per output unit; the lowest piece index wins exact ties.
pub(crate) fn maxout_argmax(piece_values: &[f64], pieces: usize, rows: usize) -> Vec<usize> {
    (0..rows)
        .map(|j| {
            let mut best = 0;
            for p in 1..pieces {
                if piece_values[p * rows + j] > piece_values[best * rows + j] {
                    best = p;
                }
            }
            best
        })
        .collect()
}

/// Row of piece `p`, output `j` in a `[pieces, out, in]` weight tensor.
pub(crate) fn maxout_row(weights: &Tensor, p: usize, j: usize) -> &[f64] {
    let (rows, cols) = (weights.shape()[1], weights.shape()[2]);
    &weights.values()[(p * rows + j) * cols..][..cols]
}

pub(crate) fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| libm::exp(v - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Evaluates one non-input node.
pub(crate) fn evaluate(kind: &NodeKind, inputs: &[&Tensor], out_shape: &[usize]) -> Tensor {
    let x = inputs[0].values();
    let values = match kind {
        NodeKind::Input => unreachable!("inputs are supplied, not evaluated"),
        NodeKind::Affine { weights, bias } => affine_forward(weights, bias, x),
        NodeKind::Conv1d { filters, bias, stride } => {
            let d = ConvDims::new(filters, *stride, inputs[0].shape());
            conv_forward(filters, bias, &d, x)
        }
        NodeKind::MaxPool1d { width, stride } => maxpool_argmax(x, inputs[0].shape(), *width, *stride)
            .into_iter()
            .map(|i| x[i])
            .collect(),
        NodeKind::Relu => x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect(),
        NodeKind::Prelu { slope } => x
            .iter()
            .enumerate()
            .map(|(i, &v)| if v > 0.0 { v } else { prelu_slope(slope, i) * v })
            .collect(),
        NodeKind::Sigmoid => x.iter().map(|&v| sigmoid(v)).collect(),
        NodeKind::Tanh => x.iter().map(|&v| libm::tanh(v)).collect(),
        NodeKind::Maxout { weights, bias } => {
            let (pieces, rows) = (weights.shape()[0], weights.shape()[1]);
            let values = maxout_pieces(weights, bias, x);
            maxout_argmax(&values, pieces, rows)
                .into_iter()
                .enumerate()
                .map(|(j, p)| values[p * rows + j])
                .collect()
        }
        NodeKind::ElementwiseProduct => x
            .iter()
            .zip(inputs[1].values())
            .map(|(a, b)| a * b)
            .collect(),
        NodeKind::Softmax => softmax(x),
    };
    Tensor::from_parts_unchecked(out_shape.to_vec(), values)
}

/// Discrete state of the piecewise-linear parts of a node: rectifier signs,
/// pooling argmaxes and maxout winners. Two inputs with equal signatures lie in
/// the same linear region.
pub(crate) fn kink_signature(kind: &NodeKind, inputs: &[&Tensor]) -> Vec<usize> {
    let x = inputs[0].values();
    match kind {
        NodeKind::Relu | NodeKind::Prelu { .. } => x.iter().map(|&v| usize::from(v > 0.0)).collect(),
        NodeKind::MaxPool1d { width, stride } => maxpool_argmax(x, inputs[0].shape(), *width, *stride),
        NodeKind::Maxout { weights, bias } => {
            let (pieces, rows) = (weights.shape()[0], weights.shape()[1]);
            maxout_argmax(&maxout_pieces(weights, bias, x), pieces, rows)
        }
        _ => Vec::new(),
    }
}
