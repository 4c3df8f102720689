//! Gradient×input and ε-LRP, plus the ensemble comparison between them.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{backward, resolve_scalar};
use crate::deeplift::{ContributionReport, FeatureScore};
use crate::error::{Error, Result};
use crate::forward::{forward, ForwardTrace, Inputs};
use crate::graph::{Graph, NodeKind};
use crate::ops::{self, ConvDims};
use crate::synth;
use crate::tensor::Tensor;
use crate::Target;

/// Per-feature `∂t/∂x_i · (x_i − b_i)`, with the baseline `b` all zeros unless given.
pub fn gradient_times_input(
    graph: &Graph,
    input: &Inputs,
    baseline: Option<&Inputs>,
    target: &Target,
) -> Result<ContributionReport> {
    let trace = forward(graph, input)?;
    let grads = backward(&trace, target)?;
    let zeros;
    let baseline = match baseline {
        Some(b) => b,
        None => {
            zeros = crate::deeplift::zeros_reference(graph);
            &zeros
        }
    };
    let base_trace = forward(graph, baseline)?;
    let t = resolve_scalar(graph, target)?;
    let mut features = Vec::new();
    for id in graph.input_ids() {
        let x = trace.get(id).expect("input").values();
        let b = base_trace.get(id).expect("input").values();
        let g = grads.get(id).expect("input").values();
        features.extend((0..x.len()).map(|k| {
            let delta = x[k] - b[k];
            FeatureScore {
                node: id.into(),
                index: k,
                delta,
                multiplier: g[k],
                contribution: g[k] * delta,
            }
        }));
    }
    let target_delta = trace.at(t).values()[target.index] - base_trace.at(t).values()[target.index];
    Ok(ContributionReport::assemble(target.clone(), target_delta, features))
}

/// Relevances `R` of every node under the ε-rule.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceTrace<'g> {
    trace: ForwardTrace<'g>,
    target: Target,
    epsilon: f64,
    relevances: Vec<Tensor>,
    /// Relevance absorbed by bias terms across all filtering layers.
    pub bias_relevance: f64,
}

impl<'g> RelevanceTrace<'g> {
    pub fn get(&self, id: &str) -> Option<&Tensor> {
        self.trace.graph().position(id).map(|i| &self.relevances[i])
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    /// Activation of the target, which is also the relevance it was seeded with.
    pub fn target_activation(&self) -> f64 {
        self.trace.get(&self.target.node).expect("target").values()[self.target.index]
    }

    /// Input relevances in [`ContributionReport`] form; `target_delta` is the
    /// seeded relevance.
    pub fn report(&self) -> ContributionReport {
        let graph = self.trace.graph();
        let mut features = Vec::new();
        for id in graph.input_ids() {
            let x = self.trace.get(id).expect("input").values();
            let r = self.get(id).expect("input").values();
            features.extend(x.iter().zip(r).enumerate().map(|(k, (x, r))| FeatureScore {
                node: id.into(),
                index: k,
                delta: *x,
                multiplier: if *x != 0.0 { r / x } else { 0.0 },
                contribution: *r,
            }));
        }
        ContributionReport::assemble(self.target.clone(), self.target_activation(), features)
    }
}

fn stabilised(z: f64, epsilon: f64) -> f64 {
    let sign = if z >= 0.0 { 1.0 } else { -1.0 };
    z + epsilon * sign
}

/// ε-LRP over affine/convolution, max-pooling and rectifier layers.
///
/// Filtering layers distribute `R_j` in proportion to `z_ij = a_i·w_ij` over
/// the denominator `Σ_i z_ij + b_j + ε·sign(·)`; pooling sends `R` to the
/// argmax; rectifiers pass `R` through unchanged. The target is seeded with its
/// own activation. With `epsilon == 0` a zero denominator passes no relevance.
pub fn lrp_epsilon<'g>(graph: &'g Graph, input: &Inputs, target: &Target, epsilon: f64) -> Result<RelevanceTrace<'g>> {
    let trace = forward(graph, input)?;
    let t = resolve_scalar(graph, target)?;
    let needed = graph.ancestors(t);
    for (i, node) in graph.nodes().iter().enumerate() {
        let supported = matches!(
            node.kind,
            NodeKind::Input
                | NodeKind::Affine { .. }
                | NodeKind::Conv1d { .. }
                | NodeKind::MaxPool1d { .. }
                | NodeKind::Relu
                | NodeKind::Prelu { .. }
        );
        if needed[i] && !supported {
            return Err(Error::Unsupported {
                node: node.id.clone(),
                kind: node.kind.name(),
                method: "epsilon-LRP",
            });
        }
    }
    let mut rel: Vec<Vec<f64>> = trace.activations().iter().map(|a| vec![0.0; a.len()]).collect();
    rel[t][target.index] = trace.at(t).values()[target.index];
    let mut bias_relevance = 0.0;

    for i in (0..=t).rev() {
        let node = &graph.nodes()[i];
        if !needed[i] || node.kind == NodeKind::Input || rel[i].iter().all(|r| *r == 0.0) {
            continue;
        }
        let ry = core::mem::take(&mut rel[i]);
        let p0 = graph.preds(i)[0];
        let xin = trace.at(p0);
        let z = trace.at(i).values();
        // s_j = R_j / denominator_j
        let ratio = |bias: f64, j: usize, bias_acc: &mut f64| {
            let denom = stabilised(z[j], epsilon);
            if denom == 0.0 {
                return 0.0;
            }
            let s = ry[j] / denom;
            *bias_acc += bias * s;
            s
        };
        match &node.kind {
            NodeKind::Affine { weights, bias } => {
                let s: Vec<f64> = (0..ry.len()).map(|j| ratio(bias[j], j, &mut bias_relevance)).collect();
                let mut back = vec![0.0; xin.len()];
                ops::affine_transpose_acc(weights, &s, &mut back);
                for ((acc, b), x) in rel[p0].iter_mut().zip(&back).zip(xin.values()) {
                    *acc += x * b;
                }
            }
            NodeKind::Conv1d { filters, bias, stride } => {
                let d = ConvDims::new(filters, *stride, xin.shape());
                let s: Vec<f64> = (0..ry.len())
                    .map(|j| ratio(bias[j % d.filters], j, &mut bias_relevance))
                    .collect();
                let mut back = vec![0.0; xin.len()];
                ops::conv_transpose_acc(filters, &d, &s, &mut back);
                for ((acc, b), x) in rel[p0].iter_mut().zip(&back).zip(xin.values()) {
                    *acc += x * b;
                }
            }
            NodeKind::MaxPool1d { width, stride } => {
                let arg = ops::maxpool_argmax(xin.values(), xin.shape(), *width, *stride);
                for (k, &src) in arg.iter().enumerate() {
                    rel[p0][src] += ry[k];
                }
            }
            NodeKind::Relu | NodeKind::Prelu { .. } => {
                for (acc, r) in rel[p0].iter_mut().zip(&ry) {
                    *acc += r;
                }
            }
            _ => unreachable!("checked above"),
        }
        rel[i] = ry;
    }
    let relevances = rel
        .into_iter()
        .zip(trace.activations())
        .map(|(r, a)| Tensor::from_parts_unchecked(a.shape().to_vec(), r))
        .collect();
    Ok(RelevanceTrace {
        trace,
        target: target.clone(),
        epsilon,
        relevances,
        bias_relevance,
    })
}

/// Random ReLU networks used to compare ε-LRP with gradient×input.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub nets: usize,
    pub seed: u64,
    /// Number of affine layers, drawn uniformly from `min_layers..=max_layers`.
    pub min_layers: usize,
    pub max_layers: usize,
    pub input_dim: usize,
    pub width: usize,
    /// Nets whose affine pre-activations come closer to zero than this are redrawn.
    pub min_preactivation: f64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            nets: 100,
            seed: 7,
            min_layers: 2,
            max_layers: 4,
            input_dim: 8,
            width: 12,
            min_preactivation: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceRow {
    pub net_id: usize,
    pub epsilon: f64,
    pub max_rel_dev: f64,
    pub mean_rel_dev: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub epsilons: Vec<f64>,
    /// One row per (net, ε), nets in order, ε in the given order.
    pub rows: Vec<EquivalenceRow>,
    /// Networks discarded because a pre-activation was too close to zero.
    pub resampled: usize,
}

impl EquivalenceReport {
    pub fn nets(&self) -> usize {
        self.rows.len() / self.epsilons.len().max(1)
    }

    /// Fraction of nets whose max deviation strictly decreases along the ε list.
    pub fn monotone_fraction(&self) -> f64 {
        let per = self.epsilons.len();
        if per == 0 || self.rows.is_empty() {
            return 0.0;
        }
        let chunks = self.rows.chunks_exact(per);
        let n = chunks.len();
        let good = chunks
            .filter(|rows| rows.windows(2).all(|w| w[1].max_rel_dev < w[0].max_rel_dev))
            .count();
        good as f64 / n as f64
    }

    pub fn max_deviation_at(&self, epsilon: f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.epsilon == epsilon)
            .map(|r| r.max_rel_dev)
            .fold(0.0, f64::max)
    }
}

/// Elementwise `|LRP − g×x| / (|g×x| + 1e-12)` on the input layer.
pub fn relative_deviation(lrp: &ContributionReport, grad_input: &ContributionReport) -> (f64, f64) {
    let devs: Vec<f64> = lrp
        .features
        .iter()
        .zip(&grad_input.features)
        .map(|(a, b)| libm::fabs(a.contribution - b.contribution) / (libm::fabs(b.contribution) + 1e-12))
        .collect();
    let max = devs.iter().copied().fold(0.0, f64::max);
    let mean = devs.iter().sum::<f64>() / devs.len().max(1) as f64;
    (max, mean)
}

/// Runs ε-LRP and gradient×input on an ensemble of random biased ReLU nets.
pub fn equivalence_report(spec: &EnsembleSpec, epsilons: &[f64]) -> Result<EquivalenceReport> {
    if spec.min_layers < 1 || spec.max_layers < spec.min_layers {
        return Err(Error::Config("layer range must satisfy 1 <= min <= max".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = Vec::with_capacity(spec.nets * epsilons.len());
    let mut resampled = 0;
    let mut net_id = 0;
    while net_id < spec.nets {
        let (graph, input) = synth::random_relu_mlp(&mut rng, spec.min_layers, spec.max_layers, spec.input_dim, spec.width);
        let trace = forward(&graph, &input)?;
        let too_small = graph.nodes().iter().enumerate().any(|(i, n)| {
            matches!(n.kind, NodeKind::Affine { .. })
                && trace.activations()[i].values().iter().any(|v| libm::fabs(*v) < spec.min_preactivation)
        });
        if too_small {
            resampled += 1;
            if resampled > 100 * spec.nets.max(1) {
                return Err(Error::Config("could not draw well-conditioned networks".into()));
            }
            continue;
        }
        let target = Target::new(graph.outputs()[0].clone(), 0);
        let gi = gradient_times_input(&graph, &input, None, &target)?;
        for &epsilon in epsilons {
            let lrp = lrp_epsilon(&graph, &input, &target, epsilon)?.report();
            let (max_rel_dev, mean_rel_dev) = relative_deviation(&lrp, &gi);
            rows.push(EquivalenceRow {
                net_id,
                epsilon,
                max_rel_dev,
                mean_rel_dev,
            });
        }
        net_id += 1;
    }
    Ok(EquivalenceReport {
        epsilons: epsilons.to_vec(),
        rows,
        resampled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;

    fn one_input(values: Vec<f64>) -> Inputs {
        let mut inputs = Inputs::new();
        inputs.insert("x".into(), Tensor::vector(values));
        inputs
    }

    #[test]
    fn grad_input_on_linear_model() {
        let g = GraphBuilder::new()
            .input("x", &[3])
            .affine("y", "x", Tensor::matrix(&[&[2.0, -1.0, 0.5]]), vec![3.0])
            .output("y")
            .build()
            .unwrap();
        let r = gradient_times_input(&g, &one_input(vec![1.0, 2.0, 4.0]), None, &Target::new("y", 0)).unwrap();
        assert_eq!(r.contributions_of("x"), [2.0, -2.0, 2.0]);
    }

    #[test]
    fn lrp_single_affine_layer() {
        let g = GraphBuilder::new()
            .input("x", &[2])
            .affine("y", "x", Tensor::matrix(&[&[1.5, -0.5]]), vec![0.0])
            .output("y")
            .build()
            .unwrap();
        let r = lrp_epsilon(&g, &one_input(vec![2.0, 1.0]), &Target::new("y", 0), 0.0).unwrap();
        assert_eq!(r.get("x").unwrap().values(), &[3.0, -0.5]);
    }

    #[test]
    fn lrp_inactive_relu_gets_nothing() {
        let g = GraphBuilder::new()
            .input("x", &[2])
            .affine("h", "x", Tensor::matrix(&[&[1.0, 1.0], &[1.0, -1.0]]), vec![0.0, 0.0])
            .relu("r", "h")
            .affine("y", "r", Tensor::matrix(&[&[1.0, 1.0]]), vec![0.0])
            .output("y")
            .build()
            .unwrap();
        let r = lrp_epsilon(&g, &one_input(vec![1.0, 2.0]), &Target::new("y", 0), 1e-9).unwrap();
        assert_eq!(r.get("r").unwrap().values()[1], 0.0);
    }

    #[test]
    fn lrp_rejects_sigmoid_interior() {
        let g = GraphBuilder::new()
            .input("x", &[2])
            .sigmoid("s", "x")
            .affine("y", "s", Tensor::matrix(&[&[1.0, 1.0]]), vec![0.0])
            .output("y")
            .build()
            .unwrap();
        assert!(matches!(
            lrp_epsilon(&g, &one_input(vec![1.0, 2.0]), &Target::new("y", 0), 1e-9),
            Err(Error::Unsupported { .. })
        ));
    }

    #[test]
    fn bias_free_zero_input_is_all_zero() {
        let g = GraphBuilder::new()
            .input("x", &[2])
            .affine("h", "x", Tensor::matrix(&[&[1.0, 2.0], &[-1.0, 0.5]]), vec![0.0, 0.0])
            .relu("r", "h")
            .affine("y", "r", Tensor::matrix(&[&[1.0, -3.0]]), vec![0.0])
            .output("y")
            .build()
            .unwrap();
        let x = one_input(vec![0.0, 0.0]);
        let t = Target::new("y", 0);
        let lrp = lrp_epsilon(&g, &x, &t, 1e-9).unwrap().report();
        let gi = gradient_times_input(&g, &x, None, &t).unwrap();
        assert!(lrp.features.iter().all(|f| f.contribution == 0.0));
        assert!(gi.features.iter().all(|f| f.contribution == 0.0));
    }
}
