use alloc::vec;
use alloc::vec::Vec;

use super::data::{one_hot_constraint_groups, one_hot_encode, SequenceExample};
use crate::error::Result;
use crate::graph::{Graph, GraphBuilder};
use crate::tensor::Tensor;
use crate::train::{initialize, Sample};

/// Id of the one-hot input node.
pub const INPUT_NODE: &str = "seq";

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CnnSpec {
    pub length: usize,
    pub filters: usize,
    pub filter_width: usize,
    pub pool: usize,
    pub hidden: usize,
    /// Seed for the initial weights.
    pub seed: u64,
}

impl Default for CnnSpec {
    fn default() -> Self {
        CnnSpec {
            length: 200,
            filters: 20,
            filter_width: 15,
            pool: 50,
            hidden: 200,
            seed: 7,
        }
    }
}

/// `conv → PReLU → maxpool → dense → PReLU → dense → PReLU → dense(1) → sigmoid`
/// with freshly initialized weights and one `Σ = 1` constraint group per
/// sequence position.
///
/// Node ids: `seq`, `conv`, `conv_act`, `pool`, `fc1`, `fc1_act`, `fc2`,
/// `fc2_act`, `logit`, `prob`.
pub fn build_genomics_cnn(spec: &CnnSpec) -> Result<Graph> {
    let conv_len = spec.length.saturating_sub(spec.filter_width) + 1;
    let pooled = if conv_len >= spec.pool && spec.pool > 0 {
        (conv_len - spec.pool) / spec.pool + 1
    } else {
        0
    };
    let flat = pooled * spec.filters;
    let h = spec.hidden;
    let mut b = GraphBuilder::new()
        .input(INPUT_NODE, &[spec.length, 4])
        .conv1d(
            "conv",
            INPUT_NODE,
            Tensor::zeros(&[spec.filters, spec.filter_width, 4]),
            vec![0.0; spec.filters],
            1,
        )
        .prelu("conv_act", "conv", vec![0.25; spec.filters])
        .maxpool1d("pool", "conv_act", spec.pool, spec.pool)
        .affine("fc1", "pool", Tensor::zeros(&[h, flat]), vec![0.0; h])
        .prelu("fc1_act", "fc1", vec![0.25; h])
        .affine("fc2", "fc1_act", Tensor::zeros(&[h, h]), vec![0.0; h])
        .prelu("fc2_act", "fc2", vec![0.25; h])
        .affine("logit", "fc2_act", Tensor::zeros(&[1, h]), vec![0.0])
        .sigmoid("prob", "logit")
        .output("prob");
    for g in one_hot_constraint_groups(INPUT_NODE, spec.length) {
        b = b.constraint_group(g);
    }
    Ok(initialize(&b.build()?, spec.seed))
}

/// One-hot samples with label 1 for positives.
pub fn to_samples(examples: &[SequenceExample]) -> Result<Vec<Sample>> {
    examples
        .iter()
        .map(|e| {
            Ok(Sample {
                input: one_hot_encode(&e.sequence)?,
                label: e.label(),
            })
        })
        .collect()
}
