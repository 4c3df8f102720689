//! Local multiplier rules `m_{xy}` for a single node.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::NodeKind;
use crate::ops::{self, ConvDims};
use crate::tensor::Tensor;

/// Dense `[outputs, inputs]` multiplier matrix of an affine or convolutional
/// node. For linear maps the multipliers are the weights themselves.
pub fn linear_multipliers(kind: &NodeKind, input_shape: &[usize]) -> Result<Tensor> {
    match kind {
        NodeKind::Affine { weights, .. } => Ok(weights.clone()),
        NodeKind::Conv1d { filters, stride, .. } => {
            let d = ConvDims::new(filters, *stride, input_shape);
            let n_in = d.len * d.channels;
            let n_out = d.out_len * d.filters;
            let span = d.width * d.channels;
            let mut m = vec![0.0; n_out * n_in];
            for p in 0..d.out_len {
                for (f, kernel) in filters.values().chunks_exact(span).enumerate() {
                    let row = (p * d.filters + f) * n_in + p * d.stride * d.channels;
                    m[row..row + span].copy_from_slice(kernel);
                }
            }
            Tensor::new(vec![n_out, n_in], m)
        }
        other => Err(Error::Unsupported {
            node: alloc::string::String::new(),
            kind: other.name(),
            method: "linear multiplier rule",
        }),
    }
}

/// Derivative of a single-input nonlinearity at `x`; used as the `δ_x → 0` limit
/// of the rescale rule.
pub(crate) fn derivative(kind: &NodeKind, x: f64, k: usize) -> f64 {
    match kind {
        NodeKind::Relu => {
            if x > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        NodeKind::Prelu { slope } => {
            if x > 0.0 {
                1.0
            } else {
                ops::prelu_slope(slope, k)
            }
        }
        NodeKind::Sigmoid => {
            let s = ops::sigmoid(x);
            s * (1.0 - s)
        }
        NodeKind::Tanh => {
            let t = libm::tanh(x);
            1.0 - t * t
        }
        _ => unreachable!("rescale rule applies to elementwise nonlinearities"),
    }
}

/// Rescale rule `m = δ_y / δ_x` for ReLU, PReLU, sigmoid and tanh. Where
/// `|δ_x| < epsilon_stable` the derivative at the reference pre-activation is used.
pub fn rescale_multipliers(
    kind: &NodeKind,
    x_ref: &[f64],
    delta_x: &[f64],
    delta_y: &[f64],
    epsilon_stable: f64,
) -> Result<Vec<f64>> {
    if !matches!(
        kind,
        NodeKind::Relu | NodeKind::Prelu { .. } | NodeKind::Sigmoid | NodeKind::Tanh
    ) {
        return Err(Error::Unsupported {
            node: alloc::string::String::new(),
            kind: kind.name(),
            method: "rescale rule",
        });
    }
    Ok(delta_x
        .iter()
        .zip(delta_y)
        .zip(x_ref)
        .enumerate()
        .map(|(k, ((dx, dy), x0))| {
            if libm::fabs(*dx) < epsilon_stable {
                derivative(kind, *x0, k)
            } else {
                dy / dx
            }
        })
        .collect())
}

/// Routing of one max over a set of inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxRouting {
    /// Position (within the window) that receives the whole `δ_y`.
    pub receiver: usize,
    /// `m_{receiver, y}`; every other input has multiplier 0.
    pub multiplier: f64,
    pub delta_y: f64,
    /// `C_{x y}` for every input of the window.
    pub contributions: Vec<f64>,
}

/// Max rule: `δ_y` goes to the input that currently attains the max.
///
/// Among exact ties the lowest index whose `|δ_x|` exceeds `epsilon_stable`
/// receives it. If every current maximiser sits at its reference value the
/// reference argmax receives it instead (its `δ` is then strictly non-zero), and
/// only when that is also degenerate does the rule fall back to a unit
/// multiplier.
pub fn max_routing(values: &[f64], references: &[f64], epsilon_stable: f64) -> MaxRouting {
    let argmax = |v: &[f64]| {
        let mut best = 0;
        for k in 1..v.len() {
            if v[k] > v[best] {
                best = k;
            }
        }
        best
    };
    let cur = argmax(values);
    let y = values[cur];
    let y0 = references[argmax(references)];
    let delta_y = y - y0;
    let delta = |k: usize| values[k] - references[k];
    let mut contributions = vec![0.0; values.len()];
    if delta_y == 0.0 {
        return MaxRouting {
            receiver: cur,
            multiplier: 0.0,
            delta_y,
            contributions,
        };
    }
    let usable = (0..values.len())
        .filter(|&k| values[k] == y)
        .find(|&k| libm::fabs(delta(k)) > epsilon_stable);
    let (receiver, multiplier) = match usable {
        Some(k) => (k, delta_y / delta(k)),
        None => {
            let k0 = argmax(references);
            if libm::fabs(delta(k0)) > epsilon_stable {
                (k0, delta_y / delta(k0))
            } else {
                (cur, 1.0)
            }
        }
    };
    contributions[receiver] = multiplier * delta(receiver);
    MaxRouting {
        receiver,
        multiplier,
        delta_y,
        contributions,
    }
}

/// Product rule for `y = x₁·x₂`:
/// `m₁ = A⁰_{x₂} + δ_{x₂}/2`, `m₂ = A⁰_{x₁} + δ_{x₁}/2`.
pub fn product_multipliers(ref1: &[f64], ref2: &[f64], delta1: &[f64], delta2: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m1 = ref2.iter().zip(delta2).map(|(r, d)| r + 0.5 * d).collect();
    let m2 = ref1.iter().zip(delta1).map(|(r, d)| r + 0.5 * d).collect();
    (m1, m2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_affine_rule() {
        let w = Tensor::matrix(&[&[3.0]]);
        let kind = NodeKind::Affine {
            weights: w,
            bias: vec![7.0],
        };
        let m = linear_multipliers(&kind, &[1]).unwrap();
        let dx = 2.0;
        assert_eq!(m.values()[0], 3.0);
        assert_eq!(m.values()[0] * dx, 6.0);
    }

    #[test]
    fn conv_multiplier_matrix_matches_forward() {
        let filters = Tensor::new(vec![2, 2, 1], vec![1.0, -1.0, 0.5, 2.0]).unwrap();
        let kind = NodeKind::Conv1d {
            filters: filters.clone(),
            bias: vec![0.0, 0.0],
            stride: 1,
        };
        let m = linear_multipliers(&kind, &[4, 1]).unwrap();
        assert_eq!(m.shape(), &[6, 4]);
        let x = [1.0, 2.0, -3.0, 0.5];
        let d = ConvDims::new(&filters, 1, &[4, 1]);
        let direct = ops::conv_forward(&filters, &[0.0, 0.0], &d, &x);
        for (row, want) in m.values().chunks_exact(4).zip(direct) {
            let got: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn relu_rescale_hand_value() {
        // reference pre-activation 2, sample pre-activation -1
        let m = rescale_multipliers(&NodeKind::Relu, &[2.0], &[-3.0], &[-2.0], 1e-7).unwrap();
        assert!((m[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_rescale_limit_is_derivative() {
        let x0: f64 = 0.7;
        let s = ops::sigmoid(x0);
        let m = rescale_multipliers(&NodeKind::Sigmoid, &[x0], &[0.0], &[0.0], 1e-7).unwrap();
        assert_eq!(m[0], s * (1.0 - s));
    }

    #[test]
    fn tanh_rescale_direct_value() {
        let m = rescale_multipliers(&NodeKind::Tanh, &[0.0], &[3.0], &[libm::tanh(3.0)], 1e-7).unwrap();
        assert!((m[0] - 0.331_684_917_895_576_8).abs() < 1e-15, "{}", m[0]);
    }

    #[test]
    fn max_rule_routes_to_current_argmax() {
        let r = max_routing(&[3.0, 5.0], &[4.0, 1.0], 1e-7);
        assert_eq!(r.delta_y, 1.0);
        assert_eq!(r.receiver, 1);
        assert_eq!(r.multiplier, 0.25);
        assert_eq!(r.contributions, [0.0, 1.0]);
    }

    #[test]
    fn max_rule_at_reference_is_zero() {
        let r = max_routing(&[3.0, 5.0], &[3.0, 5.0], 1e-7);
        assert_eq!(r.contributions, [0.0, 0.0]);
    }

    #[test]
    fn max_rule_tie_goes_to_lowest_index() {
        let r = max_routing(&[5.0, 5.0, 1.0], &[1.0, 2.0, 0.0], 1e-7);
        assert_eq!(r.receiver, 0);
        assert_eq!(r.contributions.iter().sum::<f64>(), r.delta_y);
    }

    #[test]
    fn max_rule_singular_delta_uses_reference_argmax() {
        // current max (index 0) is unchanged from its reference; the reference max was index 1
        let r = max_routing(&[2.0, 1.0], &[2.0, 6.0], 1e-7);
        assert_eq!(r.delta_y, -4.0);
        assert_eq!(r.receiver, 1);
        assert_eq!(r.contributions.iter().sum::<f64>(), -4.0);
    }

    #[test]
    fn product_rule_examples() {
        let (m1, m2) = product_multipliers(&[0.0], &[0.0], &[2.0], &[3.0]);
        assert_eq!((m1[0] * 2.0, m2[0] * 3.0), (3.0, 3.0));

        let (m1, m2) = product_multipliers(&[1.0], &[1.0], &[2.0], &[3.0]);
        assert_eq!(m1[0] * 2.0, 5.0);
        assert_eq!(m2[0] * 3.0, 6.0);
        assert_eq!(3.0 * 4.0 - 1.0, 11.0);

        let (m1, m2) = product_multipliers(&[1.5], &[2.0], &[4.0], &[0.0]);
        assert_eq!(m1[0] * 4.0, 4.0 * 2.0);
        assert_eq!(m2[0] * 0.0, 0.0);
    }
}
