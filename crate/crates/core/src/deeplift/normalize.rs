//! Output-preserving weight re-centring passes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{ConstraintGroup, Graph, NodeKind};

/// Centres each input's weights across the classes of an `Affine → Softmax` head.
///
/// Softmax is invariant to adding the same amount to every logit, so subtracting
/// `mean_j W[j][i]·x_i` from all logits leaves the output unchanged, while a
/// feature that pushes every class equally ends up with zero weight (and zero
/// multiplier) to every class pre-activation.
pub fn mean_normalize_softmax_weights(graph: &Graph) -> Result<Graph> {
    let out = graph
        .outputs()
        .first()
        .and_then(|id| graph.node(id))
        .ok_or_else(|| Error::Normalization("graph has no output".into()))?;
    if out.kind != NodeKind::Softmax {
        return Err(Error::Normalization(format!(
            "output `{}` is a {} node, expected Softmax",
            out.id,
            out.kind.name()
        )));
    }
    let logits_id = out.inputs[0].clone();
    let logits = graph.node(&logits_id).expect("validated input");
    if !matches!(logits.kind, NodeKind::Affine { .. }) {
        return Err(Error::Normalization(format!(
            "softmax input `{logits_id}` is a {} node, expected Affine",
            logits.kind.name()
        )));
    }
    if graph.consumers_of(&logits_id).len() != 1 {
        return Err(Error::Normalization(format!(
            "`{logits_id}` feeds nodes other than the softmax"
        )));
    }
    let mut def = graph.to_def();
    let node = def.nodes.iter_mut().find(|n| n.id == logits_id).expect("present");
    if let NodeKind::Affine { weights, .. } = &mut node.kind {
        let (rows, cols) = (weights.shape()[0], weights.shape()[1]);
        let w = weights.values_mut();
        for i in 0..cols {
            let mean = (0..rows).map(|j| w[j * cols + i]).sum::<f64>() / rows as f64;
            for j in 0..rows {
                w[j * cols + i] -= mean;
            }
        }
    }
    Graph::new(def)
}

/// Re-centres first-layer weights over every declared constraint group.
///
/// For a group `S` with `Σ_{x∈S} A_x = c` and a consumer `y`, weights become
/// `w − μ` and the bias `b + c·μ`, with `μ` the mean weight from `S` to `y`;
/// outputs are unchanged on every input satisfying the constraint.
///
/// Affine consumers accept arbitrary groups. Convolutional consumers share
/// weights across positions, so every row they read must carry a group over the
/// same channel set with the same total.
pub fn normalize_constrained_weights(graph: &Graph) -> Result<Graph> {
    if graph.constraint_groups().is_empty() {
        return Err(Error::Normalization("graph declares no constraint groups".into()));
    }
    let mut by_node: BTreeMap<&str, Vec<&ConstraintGroup>> = BTreeMap::new();
    for g in graph.constraint_groups() {
        by_node.entry(g.node.as_str()).or_default().push(g);
    }
    let mut def = graph.to_def();
    for (input, groups) in by_node {
        let shape = graph.node(input).expect("validated").output_shape.clone();
        for consumer in graph.consumers_of(input) {
            let node = def.nodes.iter_mut().find(|n| n.id == consumer).expect("present");
            match &mut node.kind {
                NodeKind::Affine { weights, bias } => {
                    let cols = weights.shape()[1];
                    let w = weights.values_mut();
                    for group in &groups {
                        let n = group.indices.len() as f64;
                        for (j, b) in bias.iter_mut().enumerate() {
                            let row = &mut w[j * cols..(j + 1) * cols];
                            let mu = group.indices.iter().map(|&i| row[i]).sum::<f64>() / n;
                            for &i in &group.indices {
                                row[i] -= mu;
                            }
                            *b += group.total * mu;
                        }
                    }
                }
                NodeKind::Conv1d { filters, bias, stride } => {
                    let (len, ch) = crate::ops::spatial_dims(&shape);
                    let (n_filters, width) = (filters.shape()[0], filters.shape()[1]);
                    let covered = ((len - width) / *stride) * *stride + width;
                    let (channels, total) = uniform_row_groups(&groups, ch, covered, consumer)?;
                    let f = filters.values_mut();
                    let n = channels.len() as f64;
                    for (flt, b) in bias.iter_mut().enumerate().take(n_filters) {
                        for k in 0..width {
                            let base = (flt * width + k) * ch;
                            let mu = channels.iter().map(|&c| f[base + c]).sum::<f64>() / n;
                            for &c in &channels {
                                f[base + c] -= mu;
                            }
                            *b += total * mu;
                        }
                    }
                }
                other => {
                    return Err(Error::Normalization(format!(
                        "constraint group on `{input}` feeds `{consumer}`, a {} node without weights",
                        other.name()
                    )))
                }
            }
        }
    }
    Graph::new(def)
}

/// Checks that rows `0..covered` each carry exactly one group over one shared
/// channel set and total.
fn uniform_row_groups(
    groups: &[&ConstraintGroup],
    channels: usize,
    covered: usize,
    consumer: &str,
) -> Result<(Vec<usize>, f64)> {
    let fail = |msg: String| Err(Error::Normalization(format!("convolution `{consumer}`: {msg}")));
    let mut rows: BTreeMap<usize, (Vec<usize>, f64)> = BTreeMap::new();
    for g in groups {
        let row = g.indices[0] / channels;
        if g.indices.iter().any(|i| i / channels != row) {
            return fail("a constraint group spans several positions".into());
        }
        let mut chans: Vec<usize> = g.indices.iter().map(|i| i % channels).collect();
        chans.sort_unstable();
        if rows.insert(row, (chans, g.total)).is_some() {
            return fail(format!("position {row} has more than one group"));
        }
    }
    let Some(first) = rows.get(&0).cloned() else {
        return fail("position 0 has no constraint group".into());
    };
    for r in 0..covered {
        match rows.get(&r) {
            Some(g) if *g == first => {}
            _ => return fail(format!("position {r} does not carry the shared constraint group")),
        }
    }
    Ok(first)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::forward_single;
    use crate::graph::GraphBuilder;
    use crate::tensor::Tensor;
    use alloc::vec;

    #[test]
    fn column_example_by_hand() {
        let g = GraphBuilder::new()
            .input("x", &[4])
            .affine("y", "x", Tensor::matrix(&[&[1.0, 2.0, 3.0, 4.0]]), vec![0.0])
            .output("y")
            .constraint_group(ConstraintGroup {
                node: "x".into(),
                indices: vec![0, 1, 2, 3],
                total: 1.0,
            })
            .build()
            .unwrap();
        let n = normalize_constrained_weights(&g).unwrap();
        let NodeKind::Affine { weights, bias } = &n.node("y").unwrap().kind else {
            panic!()
        };
        assert_eq!(weights.values(), &[-1.5, -0.5, 0.5, 1.5]);
        assert_eq!(bias, &[2.5]);
        for hot in 0..4 {
            let mut x = vec![0.0; 4];
            x[hot] = 1.0;
            let x = Tensor::vector(x);
            let a = forward_single(&g, &x).unwrap();
            let b = forward_single(&n, &x).unwrap();
            assert_eq!(a.output(), b.output());
        }
    }

    #[test]
    fn zero_mean_column_is_unchanged() {
        let g = GraphBuilder::new()
            .input("x", &[4])
            .affine("y", "x", Tensor::matrix(&[&[-1.0, 1.0, -2.0, 2.0]]), vec![0.5])
            .output("y")
            .constraint_group(ConstraintGroup {
                node: "x".into(),
                indices: vec![0, 1, 2, 3],
                total: 1.0,
            })
            .build()
            .unwrap();
        assert_eq!(normalize_constrained_weights(&g).unwrap(), g);
    }

    #[test]
    fn softmax_weights_are_centred() {
        let g = GraphBuilder::new()
            .input("x", &[2])
            .affine("z", "x", Tensor::matrix(&[&[5.0, 1.0], &[5.0, 3.0]]), vec![0.1, -0.2])
            .softmax("p", "z")
            .output("p")
            .build()
            .unwrap();
        let n = mean_normalize_softmax_weights(&g).unwrap();
        let NodeKind::Affine { weights, .. } = &n.node("z").unwrap().kind else {
            panic!()
        };
        assert_eq!(weights.values(), &[0.0, -1.0, 0.0, 1.0]);
    }

    #[test]
    fn rejects_missing_groups_and_bad_heads() {
        let g = GraphBuilder::new()
            .input("x", &[2])
            .relu("r", "x")
            .output("r")
            .build()
            .unwrap();
        assert!(normalize_constrained_weights(&g).is_err());
        assert!(mean_normalize_softmax_weights(&g).is_err());
        let grouped = g
            .with_constraint_groups(vec![ConstraintGroup {
                node: "x".into(),
                indices: vec![0, 1],
                total: 1.0,
            }])
            .unwrap();
        assert!(matches!(
            normalize_constrained_weights(&grouped),
            Err(Error::Normalization(_))
        ));
    }
}
