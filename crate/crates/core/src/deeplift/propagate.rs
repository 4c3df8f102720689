use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::maxout::{maxout_multipliers, maxout_segments};
use super::rules::{max_routing, product_multipliers, rescale_multipliers};
use super::state::{DeltaState, ReferenceState};
use super::DeepLiftConfig;
use crate::autodiff::resolve_scalar;
use crate::error::{Error, Result};
use crate::forward::ForwardTrace;
use crate::graph::{Graph, NodeKind};
use crate::ops::{self, ConvDims};
use crate::tensor::Tensor;
use crate::Target;

/// Multipliers `m_{xt}` of every node to one target scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierMap<'g> {
    graph: &'g Graph,
    target: Target,
    multipliers: Vec<Tensor>,
}

impl<'g> MultiplierMap<'g> {
    pub fn target(&self) -> &Target {
        &self.target
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn get(&self, id: &str) -> Option<&Tensor> {
        self.graph.position(id).map(|i| &self.multipliers[i])
    }
}

/// Reverse topological sweep accumulating `m_{xt} = Σ_y m_{xy}·m_{yt}`,
/// seeded with `m_{tt} = 1`.
pub fn propagate_multipliers<'g>(
    trace: &ForwardTrace<'g>,
    reference: &ReferenceState<'g>,
    target: &Target,
    config: &DeepLiftConfig,
) -> Result<MultiplierMap<'g>> {
    let graph = trace.graph();
    let deltas = DeltaState::new(trace, reference)?;
    let t = resolve_scalar(graph, target)?;
    let needed = graph.ancestors(t);
    for (i, node) in graph.nodes().iter().enumerate() {
        if needed[i] && node.kind == NodeKind::Softmax {
            return Err(Error::Unsupported {
                node: node.id.clone(),
                kind: node.kind.name(),
                method: "multiplier propagation (target the softmax pre-activation instead)",
            });
        }
    }
    let eps = config.epsilon_stable;
    let refs = reference.trace();
    let mut mult: Vec<Vec<f64>> = trace.activations().iter().map(|a| vec![0.0; a.len()]).collect();
    mult[t][target.index] = 1.0;

    for i in (0..=t).rev() {
        let node = &graph.nodes()[i];
        if !needed[i] || node.kind == NodeKind::Input || mult[i].iter().all(|m| *m == 0.0) {
            continue;
        }
        let my = core::mem::take(&mut mult[i]);
        let preds = graph.preds(i);
        let p0 = preds[0];
        let shape = trace.at(p0).shape();
        match &node.kind {
            NodeKind::Input | NodeKind::Softmax => unreachable!(),
            NodeKind::Affine { weights, .. } => ops::affine_transpose_acc(weights, &my, &mut mult[p0]),
            NodeKind::Conv1d { filters, stride, .. } => {
                let d = ConvDims::new(filters, *stride, shape);
                ops::conv_transpose_acc(filters, &d, &my, &mut mult[p0]);
            }
            NodeKind::MaxPool1d { width, stride } => {
                let (len, ch) = ops::spatial_dims(shape);
                let out_len = (len - width) / stride + 1;
                let (x, x0) = (trace.at(p0).values(), refs.at(p0).values());
                let mut window = vec![0.0; *width];
                let mut window_ref = vec![0.0; *width];
                for p in 0..out_len {
                    for c in 0..ch {
                        let k = p * ch + c;
                        if my[k] == 0.0 {
                            continue;
                        }
                        let at = |q: usize| (p * stride + q) * ch + c;
                        for q in 0..*width {
                            window[q] = x[at(q)];
                            window_ref[q] = x0[at(q)];
                        }
                        let route = max_routing(&window, &window_ref, eps);
                        mult[p0][at(route.receiver)] += my[k] * route.multiplier;
                    }
                }
            }
            NodeKind::Relu | NodeKind::Prelu { .. } | NodeKind::Sigmoid | NodeKind::Tanh => {
                let local = rescale_multipliers(
                    &node.kind,
                    refs.at(p0).values(),
                    deltas.at(p0).values(),
                    deltas.at(i).values(),
                    eps,
                )?;
                for ((acc, m), l) in mult[p0].iter_mut().zip(&my).zip(&local) {
                    *acc += m * l;
                }
            }
            NodeKind::Maxout { weights, bias } => {
                let (x, x0) = (trace.at(p0).values(), refs.at(p0).values());
                for (j, &m) in my.iter().enumerate() {
                    if m == 0.0 {
                        continue;
                    }
                    let decomposition = maxout_segments(weights, bias, j, x0, x);
                    let local = maxout_multipliers(weights, j, &decomposition);
                    for (acc, l) in mult[p0].iter_mut().zip(&local) {
                        *acc += m * l;
                    }
                }
            }
            NodeKind::ElementwiseProduct => {
                let p1 = preds[1];
                let (m1, m2) = product_multipliers(
                    refs.at(p0).values(),
                    refs.at(p1).values(),
                    deltas.at(p0).values(),
                    deltas.at(p1).values(),
                );
                for k in 0..my.len() {
                    mult[p0][k] += my[k] * m1[k];
                    mult[p1][k] += my[k] * m2[k];
                }
            }
        }
        mult[i] = my;
    }

    let multipliers = mult
        .into_iter()
        .zip(trace.activations())
        .map(|(m, a)| Tensor::from_parts_unchecked(a.shape().to_vec(), m))
        .collect();
    Ok(MultiplierMap {
        graph,
        target: target.clone(),
        multipliers,
    })
}

/// Score of one input feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScore {
    pub node: String,
    pub index: usize,
    /// Difference from the baseline (`δ_x`, or `x` itself for gradient×input).
    pub delta: f64,
    /// Multiplier, gradient or relevance-per-unit, depending on the method.
    pub multiplier: f64,
    pub contribution: f64,
}

/// Per-input-feature contributions to one target scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionReport {
    pub target: Target,
    /// Change of the target between baseline and sample.
    pub target_delta: f64,
    pub features: Vec<FeatureScore>,
    /// `|Σ contributions − target_delta|`.
    pub residual: f64,
}

impl ContributionReport {
    pub(crate) fn assemble(target: Target, target_delta: f64, features: Vec<FeatureScore>) -> Self {
        let total: f64 = features.iter().map(|f| f.contribution).sum();
        ContributionReport {
            target,
            target_delta,
            residual: libm::fabs(total - target_delta),
            features,
        }
    }

    pub fn total(&self) -> f64 {
        self.features.iter().map(|f| f.contribution).sum()
    }

    /// Contributions of one input node, in its row-major order.
    pub fn contributions_of(&self, node: &str) -> Vec<f64> {
        self.features
            .iter()
            .filter(|f| f.node == node)
            .map(|f| f.contribution)
            .collect()
    }

    /// Whether the residual is within `max(abs, rel·|δ_t|)`.
    pub fn sums_to_delta(&self, rel: f64, abs: f64) -> bool {
        self.residual <= abs.max(rel * libm::fabs(self.target_delta))
    }
}

/// `C_{xt} = m_{xt}·δ_x` for every input feature.
pub fn contributions(map: &MultiplierMap<'_>, deltas: &DeltaState<'_>) -> Result<ContributionReport> {
    let graph = map.graph();
    if !core::ptr::eq(graph, deltas.graph()) {
        return Err(Error::GraphMismatch);
    }
    let t = graph.require(&map.target().node)?;
    let mut features = Vec::new();
    for id in graph.input_ids() {
        let i = graph.require(id)?;
        let m = map.multipliers[i].values();
        let d = deltas.at(i).values();
        features.extend(m.iter().zip(d).enumerate().map(|(k, (m, d))| FeatureScore {
            node: id.into(),
            index: k,
            delta: *d,
            multiplier: *m,
            contribution: m * d,
        }));
    }
    let target_delta = deltas.at(t).values()[map.target().index];
    Ok(ContributionReport::assemble(map.target().clone(), target_delta, features))
}
