//! Forward evaluation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeKind};
use crate::ops;
use crate::tensor::Tensor;

/// Input tensors keyed by input-node id.
pub type Inputs = BTreeMap<String, Tensor>;

/// Activations of every node for one evaluation of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<'g> {
    graph: &'g Graph,
    activations: Vec<Tensor>,
}

impl<'g> ForwardTrace<'g> {
    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn get(&self, id: &str) -> Option<&Tensor> {
        self.graph.position(id).map(|i| &self.activations[i])
    }

    /// Activations in the graph's topological order.
    pub fn activations(&self) -> &[Tensor] {
        &self.activations
    }

    pub(crate) fn at(&self, i: usize) -> &Tensor {
        &self.activations[i]
    }

    pub(crate) fn node_inputs(&self, i: usize) -> Vec<&Tensor> {
        self.graph.preds(i).iter().map(|&p| &self.activations[p]).collect()
    }

    /// Activation of the first declared output.
    pub fn output(&self) -> &Tensor {
        self.get(&self.graph.outputs()[0]).expect("validated output")
    }
}

pub fn forward<'g>(graph: &'g Graph, inputs: &Inputs) -> Result<ForwardTrace<'g>> {
    let mut activations: Vec<Tensor> = Vec::with_capacity(graph.len());
    for (i, node) in graph.nodes().iter().enumerate() {
        let value = if node.kind == NodeKind::Input {
            let t = inputs
                .get(&node.id)
                .ok_or_else(|| Error::MissingInput(node.id.clone()))?;
            if t.shape() != node.output_shape.as_slice() {
                return Err(Error::InputShape {
                    node: node.id.clone(),
                    expected: node.output_shape.clone(),
                    found: t.shape().to_vec(),
                });
            }
            if !t.is_finite() {
                return Err(Error::NonFinite {
                    context: alloc::format!("input `{}`", node.id),
                });
            }
            t.clone()
        } else {
            let args: Vec<&Tensor> = graph.preds(i).iter().map(|&p| &activations[p]).collect();
            ops::evaluate(&node.kind, &args, &node.output_shape)
        };
        activations.push(value);
    }
    Ok(ForwardTrace { graph, activations })
}

/// Forward pass of a graph with exactly one input node.
pub fn forward_single<'g>(graph: &'g Graph, input: &Tensor) -> Result<ForwardTrace<'g>> {
    let ids = graph.input_ids();
    if ids.len() != 1 {
        return Err(Error::MissingInput(alloc::format!(
            "graph has {} input nodes; supply them by name",
            ids.len()
        )));
    }
    let mut inputs = Inputs::new();
    inputs.insert(ids[0].into(), input.clone());
    forward(graph, &inputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;
    use alloc::vec;

    #[test]
    fn affine_hand_arithmetic() {
        let g = GraphBuilder::new()
            .input("x", &[2])
            .affine("y", "x", Tensor::matrix(&[&[1.0, 2.0], &[3.0, 4.0]]), vec![0.0, 0.0])
            .output("y")
            .build()
            .unwrap();
        let t = forward_single(&g, &Tensor::vector(vec![1.0, 1.0])).unwrap();
        assert_eq!(t.output().values(), &[3.0, 7.0]);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let g = GraphBuilder::new()
            .input("x", &[2])
            .softmax("s", "x")
            .output("s")
            .build()
            .unwrap();
        let t = forward_single(&g, &Tensor::vector(vec![0.0, 0.0])).unwrap();
        assert_eq!(t.output().values(), &[0.5, 0.5]);
    }

    #[test]
    fn missing_and_misshapen_inputs() {
        let g = GraphBuilder::new()
            .input("x", &[2])
            .relu("r", "x")
            .output("r")
            .build()
            .unwrap();
        assert!(matches!(forward(&g, &Inputs::new()), Err(Error::MissingInput(_))));
        assert!(matches!(
            forward_single(&g, &Tensor::vector(vec![1.0, 2.0, 3.0])),
            Err(Error::InputShape { .. })
        ));
    }
}
