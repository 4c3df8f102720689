use super::normalize::mean_normalize_softmax_weights;
use super::propagate::{contributions, propagate_multipliers, ContributionReport};
use super::state::{compute_reference, DeltaState};
use super::target::{select_attribution_target, Head, TargetSelection};
use super::DeepLiftConfig;
use crate::baselines;
use crate::error::{Error, Result};
use crate::forward::{forward, Inputs};
use crate::graph::Graph;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    DeepLift,
    /// Gradient of the target times the input value.
    GradInput,
    /// ε-stabilised layer-wise relevance propagation.
    Lrp { epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionRequest {
    pub input: Inputs,
    /// Reference input; ignored by gradient×input and LRP.
    pub reference: Inputs,
    pub target: TargetSelection,
    pub method: Method,
}

/// All-zero tensors for every input node.
pub fn zeros_reference(graph: &Graph) -> Inputs {
    graph
        .input_ids()
        .into_iter()
        .map(|id| {
            let shape = &graph.node(id).expect("input").output_shape;
            (id.into(), Tensor::zeros(shape))
        })
        .collect()
}

/// Runs one attribution end to end.
///
/// Automatic targets on a softmax head are computed against the
/// class-mean-normalized logits, for every method.
pub fn attribute(graph: &Graph, request: &AttributionRequest, config: &DeepLiftConfig) -> Result<ContributionReport> {
    for (id, t) in &request.reference {
        if let Some(x) = request.input.get(id) {
            if x.shape() != t.shape() {
                return Err(Error::InputShape {
                    node: id.clone(),
                    expected: x.shape().to_vec(),
                    found: t.shape().to_vec(),
                });
            }
        }
    }
    let resolved = select_attribution_target(graph, &request.target)?;
    let normalized;
    let graph = if resolved.head == Some(Head::Softmax) {
        normalized = mean_normalize_softmax_weights(graph)?;
        &normalized
    } else {
        graph
    };
    let target = &resolved.target;
    match request.method {
        Method::DeepLift => {
            let trace = forward(graph, &request.input)?;
            let reference = compute_reference(graph, &request.reference)?;
            let map = propagate_multipliers(&trace, &reference, target, config)?;
            contributions(&map, &DeltaState::new(&trace, &reference)?)
        }
        Method::GradInput => baselines::gradient_times_input(graph, &request.input, None, target),
        Method::Lrp { epsilon } => {
            let relevance = baselines::lrp_epsilon(graph, &request.input, target, epsilon)?;
            Ok(relevance.report())
        }
    }
}
