use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::forward::{forward, ForwardTrace, Inputs};
use crate::graph::Graph;
use crate::tensor::Tensor;

/// Reference activations `A⁰_n`: an ordinary forward pass on the reference input.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceState<'g> {
    trace: ForwardTrace<'g>,
    input: Inputs,
}

impl<'g> ReferenceState<'g> {
    pub fn trace(&self) -> &ForwardTrace<'g> {
        &self.trace
    }

    pub fn input(&self) -> &Inputs {
        &self.input
    }

    pub fn get(&self, id: &str) -> Option<&Tensor> {
        self.trace.get(id)
    }
}

pub fn compute_reference<'g>(graph: &'g Graph, reference_input: &Inputs) -> Result<ReferenceState<'g>> {
    Ok(ReferenceState {
        trace: forward(graph, reference_input)?,
        input: reference_input.clone(),
    })
}

/// `δ_n = A_n − A⁰_n` for every node.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaState<'g> {
    graph: &'g Graph,
    deltas: Vec<Tensor>,
}

impl<'g> DeltaState<'g> {
    pub fn new(trace: &ForwardTrace<'g>, reference: &ReferenceState<'g>) -> Result<Self> {
        if !core::ptr::eq(trace.graph(), reference.trace().graph()) {
            return Err(Error::GraphMismatch);
        }
        let deltas = trace
            .activations()
            .iter()
            .zip(reference.trace().activations())
            .map(|(a, r)| a.sub(r))
            .collect();
        Ok(DeltaState {
            graph: trace.graph(),
            deltas,
        })
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn get(&self, id: &str) -> Option<&Tensor> {
        self.graph.position(id).map(|i| &self.deltas[i])
    }

    pub(crate) fn at(&self, i: usize) -> &Tensor {
        &self.deltas[i]
    }
}
