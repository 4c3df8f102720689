//! Reverse-mode gradients over a forward trace.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::forward::{forward, ForwardTrace, Inputs};
use crate::graph::{Graph, NodeKind};
use crate::ops::{self, ConvDims};
use crate::tensor::Tensor;
use crate::Target;

/// `∂target/∂activation` for every node of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTrace<'g> {
    graph: &'g Graph,
    target: Target,
    grads: Vec<Tensor>,
}

impl<'g> GradientTrace<'g> {
    pub fn target(&self) -> &Target {
        &self.target
    }

    pub fn get(&self, id: &str) -> Option<&Tensor> {
        self.graph.position(id).map(|i| &self.grads[i])
    }

    pub fn gradients(&self) -> &[Tensor] {
        &self.grads
    }
}

/// Gradients with respect to every trainable parameter, aligned with the graph's nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub(crate) per_node: Vec<Vec<Vec<f64>>>,
}

impl ParamGrads {
    pub fn zeros_like(graph: &Graph) -> Self {
        let per_node = graph
            .nodes()
            .iter()
            .map(|n| match &n.kind {
                NodeKind::Affine { weights, bias } => vec![vec![0.0; weights.len()], vec![0.0; bias.len()]],
                NodeKind::Conv1d { filters, bias, .. } => {
                    vec![vec![0.0; filters.len()], vec![0.0; bias.len()]]
                }
                NodeKind::Prelu { slope } => vec![vec![0.0; slope.len()]],
                NodeKind::Maxout { weights, bias } => vec![vec![0.0; weights.len()], vec![0.0; bias.len()]],
                _ => Vec::new(),
            })
            .collect();
        ParamGrads { per_node }
    }

    pub fn fill_zero(&mut self) {
        self.per_node
            .iter_mut()
            .flatten()
            .for_each(|slot| slot.iter_mut().for_each(|v| *v = 0.0));
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.per_node.iter_mut().flatten().zip(other.per_node.iter().flatten()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    /// All gradient values flattened in node order.
    pub fn flatten(&self) -> Vec<f64> {
        self.per_node.iter().flatten().flatten().copied().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.per_node.iter().flatten().flatten().all(|v| v.is_finite())
    }
}

/// Vector-Jacobian sweep from `seed_node` carrying `seed` as its upstream gradient.
///
/// Parameter gradients are accumulated into `params` when given. With
/// `input_grads == false` the sweep skips the (unused) transposed products that
/// would only feed input nodes.
pub(crate) fn backprop(
    trace: &ForwardTrace<'_>,
    seed_node: usize,
    seed: &[f64],
    mut params: Option<&mut ParamGrads>,
    input_grads: bool,
) -> Vec<Vec<f64>> {
    let graph = trace.graph();
    let mut grads: Vec<Vec<f64>> = trace.activations().iter().map(|t| vec![0.0; t.len()]).collect();
    grads[seed_node].copy_from_slice(seed);
    for i in (0..=seed_node).rev() {
        let node = &graph.nodes()[i];
        if node.kind == NodeKind::Input || grads[i].iter().all(|g| *g == 0.0) {
            continue;
        }
        let gy = core::mem::take(&mut grads[i]);
        let preds = graph.preds(i);
        let xin = trace.at(preds[0]);
        let x = xin.values();
        let wants_input = input_grads || graph.nodes()[preds[0]].kind != NodeKind::Input;
        let slot = params.as_deref_mut().map(|p| &mut p.per_node[i]);
        match &node.kind {
            NodeKind::Input => unreachable!(),
            NodeKind::Affine { weights, .. } => {
                if wants_input {
                    ops::affine_transpose_acc(weights, &gy, &mut grads[preds[0]]);
                }
                if let Some(slot) = slot {
                    let (gw, gb) = slot.split_at_mut(1);
                    ops::affine_param_grad(x, &gy, &mut gw[0], &mut gb[0]);
                }
            }
            NodeKind::Conv1d { filters, stride, .. } => {
                let d = ConvDims::new(filters, *stride, xin.shape());
                if wants_input {
                    ops::conv_transpose_acc(filters, &d, &gy, &mut grads[preds[0]]);
                }
                if let Some(slot) = slot {
                    let (gf, gb) = slot.split_at_mut(1);
                    ops::conv_param_grad(&d, x, &gy, &mut gf[0], &mut gb[0]);
                }
            }
            NodeKind::MaxPool1d { width, stride } => {
                let arg = ops::maxpool_argmax(x, xin.shape(), *width, *stride);
                let gx = &mut grads[preds[0]];
                for (k, &src) in arg.iter().enumerate() {
                    gx[src] += gy[k];
                }
            }
            NodeKind::Relu => {
                let gx = &mut grads[preds[0]];
                for ((acc, g), v) in gx.iter_mut().zip(&gy).zip(x) {
                    if *v > 0.0 {
                        *acc += g;
                    }
                }
            }
            NodeKind::Prelu { slope } => {
                {
                    let gx = &mut grads[preds[0]];
                    for (k, ((acc, g), v)) in gx.iter_mut().zip(&gy).zip(x).enumerate() {
                        *acc += if *v > 0.0 { *g } else { g * ops::prelu_slope(slope, k) };
                    }
                }
                if let Some(slot) = slot {
                    let gs = &mut slot[0];
                    let n = gs.len();
                    for (k, (g, v)) in gy.iter().zip(x).enumerate() {
                        if *v <= 0.0 {
                            gs[k % n] += g * v;
                        }
                    }
                }
            }
            NodeKind::Sigmoid => {
                let y = trace.at(i).values();
                let gx = &mut grads[preds[0]];
                for ((acc, g), s) in gx.iter_mut().zip(&gy).zip(y) {
                    *acc += g * s * (1.0 - s);
                }
            }
            NodeKind::Tanh => {
                let y = trace.at(i).values();
                let gx = &mut grads[preds[0]];
                for ((acc, g), t) in gx.iter_mut().zip(&gy).zip(y) {
                    *acc += g * (1.0 - t * t);
                }
            }
            NodeKind::Maxout { weights, bias } => {
                let (pieces, rows, cols) = (weights.shape()[0], weights.shape()[1], weights.shape()[2]);
                let winners = ops::maxout_argmax(&ops::maxout_pieces(weights, bias, x), pieces, rows);
                {
                    let gx = &mut grads[preds[0]];
                    for (j, &p) in winners.iter().enumerate() {
                        if gy[j] == 0.0 {
                            continue;
                        }
                        for (acc, w) in gx.iter_mut().zip(ops::maxout_row(weights, p, j)) {
                            *acc += gy[j] * w;
                        }
                    }
                }
                if let Some(slot) = slot {
                    let (gw, gb) = slot.split_at_mut(1);
                    for (j, &p) in winners.iter().enumerate() {
                        gb[0][p * rows + j] += gy[j];
                        let row = &mut gw[0][(p * rows + j) * cols..][..cols];
                        for (acc, v) in row.iter_mut().zip(x) {
                            *acc += gy[j] * v;
                        }
                    }
                }
            }
            NodeKind::ElementwiseProduct => {
                let x2 = trace.at(preds[1]).values().to_vec();
                let x1 = x.to_vec();
                for (k, g) in gy.iter().enumerate() {
                    grads[preds[0]][k] += g * x2[k];
                    grads[preds[1]][k] += g * x1[k];
                }
            }
            NodeKind::Softmax => {
                let s = trace.at(i).values();
                let dot: f64 = gy.iter().zip(s).map(|(g, s)| g * s).sum();
                let gx = &mut grads[preds[0]];
                for ((acc, g), s) in gx.iter_mut().zip(&gy).zip(s) {
                    *acc += s * (g - dot);
                }
            }
        }
        grads[i] = gy;
    }
    grads
}

pub(crate) fn resolve_scalar(graph: &Graph, target: &Target) -> Result<usize> {
    let i = graph.require(&target.node)?;
    let len: usize = graph.nodes()[i].output_shape.iter().product();
    if target.index >= len {
        return Err(Error::TargetIndex {
            node: target.node.clone(),
            index: target.index,
            len,
        });
    }
    Ok(i)
}

/// Gradient of one scalar activation with respect to every node.
pub fn backward<'g>(trace: &ForwardTrace<'g>, target: &Target) -> Result<GradientTrace<'g>> {
    let graph = trace.graph();
    let t = resolve_scalar(graph, target)?;
    let mut seed = vec![0.0; trace.at(t).len()];
    seed[target.index] = 1.0;
    let grads = backprop(trace, t, &seed, None, true)
        .into_iter()
        .zip(trace.activations())
        .map(|(g, a)| Tensor::from_parts_unchecked(a.shape().to_vec(), g))
        .collect();
    Ok(GradientTrace {
        graph,
        target: target.clone(),
        grads,
    })
}

/// Outcome of comparing analytic input gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDifferenceReport {
    /// `max |a − n| / max(|a|, |n|, RELATIVE_FLOOR)` over all input features.
    pub max_rel_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// Set when the supplied point sat on (or within `h` of) a kink and was moved.
    pub note: Option<String>,
    /// The point the comparison was finally made at.
    pub evaluated_at: Inputs,
}

/// Gradients smaller than this are compared in absolute terms.
pub const RELATIVE_FLOOR: f64 = 1e-3;

fn signature(trace: &ForwardTrace<'_>) -> Vec<usize> {
    let graph = trace.graph();
    let mut sig = Vec::new();
    for (i, node) in graph.nodes().iter().enumerate() {
        if node.kind != NodeKind::Input {
            sig.extend(ops::kink_signature(&node.kind, &trace.node_inputs(i)));
        }
    }
    sig
}

fn input_slots(graph: &Graph, inputs: &Inputs) -> Vec<(String, usize)> {
    graph
        .input_ids()
        .into_iter()
        .flat_map(|id| {
            let n = inputs.get(id).map_or(0, |t| t.len());
            (0..n).map(move |k| (String::from(id), k))
        })
        .collect()
}

fn nudged(inputs: &Inputs, id: &str, k: usize, by: f64) -> Inputs {
    let mut out = inputs.clone();
    let t = out.get_mut(id).expect("input present");
    t.values_mut()[k] += by;
    out
}

/// Central-difference check of `∂target/∂inputs`.
///
/// When any `±h` probe changes a rectifier sign, pooling argmax or maxout
/// winner the point is treated as a kink: it is moved by a small deterministic
/// offset and the check is repeated (up to 20 times).
pub fn finite_difference_check(
    graph: &Graph,
    inputs: &Inputs,
    target: &Target,
    h: f64,
    tolerance: f64,
) -> Result<FiniteDifferenceReport> {
    let t = resolve_scalar(graph, target)?;
    let slots = input_slots(graph, inputs);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut point = inputs.clone();
    let mut note = None;
    for attempt in 0..=20 {
        let base = forward(graph, &point)?;
        let base_sig = signature(&base);
        let grads = backward(&base, target)?;
        let mut analytic = Vec::with_capacity(slots.len());
        let mut numeric = Vec::with_capacity(slots.len());
        let mut kink = false;
        for (id, k) in &slots {
            analytic.push(grads.get(id).expect("input").values()[*k]);
            let plus = nudged(&point, id, *k, h);
            let minus = nudged(&point, id, *k, -h);
            let fp = forward(graph, &plus)?;
            let fm = forward(graph, &minus)?;
            if signature(&fp) != base_sig || signature(&fm) != base_sig {
                kink = true;
                break;
            }
            numeric.push((fp.at(t).values()[target.index] - fm.at(t).values()[target.index]) / (2.0 * h));
        }
        if kink {
            if attempt == 20 {
                break;
            }
            let scale = 1e-3 * (attempt + 1) as f64;
            for (id, k) in &slots {
                let offset = scale * rng.gen_range(-1.0..1.0);
                point.get_mut(id.as_str()).unwrap().values_mut()[*k] += offset;
            }
            note = Some(format!(
                "input within h of a kink; perturbed {} time(s) by up to {scale:e}",
                attempt + 1
            ));
            continue;
        }
        let max_rel_deviation = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| libm::fabs(a - n) / libm::fabs(*a).max(libm::fabs(*n)).max(RELATIVE_FLOOR))
            .fold(0.0, f64::max);
        return Ok(FiniteDifferenceReport {
            max_rel_deviation,
            tolerance,
            passed: max_rel_deviation <= tolerance,
            analytic,
            numeric,
            note,
            evaluated_at: point,
        });
    }
    Ok(FiniteDifferenceReport {
        max_rel_deviation: f64::INFINITY,
        tolerance,
        passed: false,
        analytic: Vec::new(),
        numeric: Vec::new(),
        note: Some("could not move the input off a kink".into()),
        evaluated_at: point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::forward_single;
    use crate::graph::GraphBuilder;

    #[test]
    fn affine_gradient_is_weight_row() {
        let g = GraphBuilder::new()
            .input("x", &[3])
            .affine("y", "x", Tensor::matrix(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]), vec![1.0, -1.0])
            .output("y")
            .build()
            .unwrap();
        let trace = forward_single(&g, &Tensor::vector(vec![0.3, -0.2, 0.9])).unwrap();
        let grads = backward(&trace, &Target::new("y", 1)).unwrap();
        assert_eq!(grads.get("x").unwrap().values(), &[4.0, 5.0, 6.0]);
        assert_eq!(grads.get("y").unwrap().values(), &[0.0, 1.0]);
    }

    #[test]
    fn maxpool_gradient_is_one_hot_per_window() {
        let g = GraphBuilder::new()
            .input("x", &[6, 1])
            .maxpool1d("m", "x", 3, 3)
            .output("m")
            .build()
            .unwrap();
        let x = Tensor::new(vec![6, 1], vec![1.0, 4.0, 2.0, 7.0, 7.0, -1.0]).unwrap();
        let trace = forward_single(&g, &x).unwrap();
        let grads = backward(&trace, &Target::new("m", 1)).unwrap();
        assert_eq!(grads.get("x").unwrap().values(), &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn unknown_target_is_an_error() {
        let g = GraphBuilder::new().input("x", &[1]).relu("r", "x").output("r").build().unwrap();
        let trace = forward_single(&g, &Tensor::vector(vec![1.0])).unwrap();
        assert!(matches!(backward(&trace, &Target::new("zz", 0)), Err(Error::UnknownNode(_))));
        assert!(matches!(
            backward(&trace, &Target::new("r", 3)),
            Err(Error::TargetIndex { .. })
        ));
    }

    #[test]
    fn linear_model_finite_differences_are_exact() {
        let g = GraphBuilder::new()
            .input("x", &[3])
            .affine("y", "x", Tensor::matrix(&[&[0.5, -2.0, 1.5]]), vec![0.1])
            .output("y")
            .build()
            .unwrap();
        let mut inputs = Inputs::new();
        inputs.insert("x".into(), Tensor::vector(vec![0.2, 0.4, -1.0]));
        let report = finite_difference_check(&g, &inputs, &Target::new("y", 0), 1e-5, 1e-6).unwrap();
        assert!(report.passed);
        assert!(report.max_rel_deviation < 1e-9, "{}", report.max_rel_deviation);
        assert!(report.note.is_none());
    }

    #[test]
    fn kink_is_detected_and_perturbed() {
        let g = GraphBuilder::new()
            .input("x", &[2])
            .affine("a", "x", Tensor::matrix(&[&[1.0, 1.0]]), vec![0.0])
            .relu("r", "a")
            .output("r")
            .build()
            .unwrap();
        let mut inputs = Inputs::new();
        inputs.insert("x".into(), Tensor::vector(vec![0.5, -0.5]));
        let report = finite_difference_check(&g, &inputs, &Target::new("r", 0), 1e-5, 1e-6).unwrap();
        assert!(report.note.is_some());
        assert!(report.passed);
    }
}
