//! Feedforward computation graphs with difference-from-reference attribution.
//!
//! The crate is `no_std` (it needs `alloc`) and carries no IO. It provides:
//!
//! - [`graph`]: tensors, node kinds, validation and deterministic topological order.
//! - [`forward`] and [`autodiff`]: evaluation and reverse-mode gradients.
//! - [`deeplift`]: reference activations, per-layer multiplier rules, multiplier
//!   backpropagation, target selection and the two weight-normalization passes.
//! - [`baselines`]: gradient×input and ε-LRP.
//! - [`train`]: a small SGD-with-momentum trainer for sigmoid/softmax heads.
//! - [`genomics`]: the synthetic motif classification benchmark.
//! - [`metrics`] and [`synth`]: auROC and random graph generators.
//!
//! All arithmetic is `f64`; transcendental functions come from `libm` so results
//! do not depend on the platform's math library.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod baselines;
pub mod deeplift;
mod error;
pub mod forward;
pub mod genomics;
pub mod graph;
pub mod metrics;
mod ops;
pub mod synth;
mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use forward::{forward, forward_single, ForwardTrace, Inputs};
pub use graph::{
    topo_order, validate_graph, ConstraintGroup, Graph, GraphBuilder, GraphDef, NodeKind,
    NodeSpec, ValidationReport, Violation,
};
pub use tensor::Tensor;

/// A scalar output position inside a node's activation tensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Target {
    pub node: alloc::string::String,
    /// Flat row-major index into the node's activation.
    pub index: usize,
}

impl Target {
    pub fn new(node: impl Into<alloc::string::String>, index: usize) -> Self {
        Target {
            node: node.into(),
            index,
        }
    }
}

impl core::fmt::Display for Target {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}[{}]", self.node, self.index)
    }
}
