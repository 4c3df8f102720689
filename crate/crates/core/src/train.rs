//! Mini-batch SGD with momentum on cross-entropy for sigmoid or softmax heads.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{backprop, ParamGrads};
use crate::error::{Error, Result};
use crate::forward::forward_single;
use crate::graph::{Graph, NodeKind};
use crate::metrics::auroc;
use crate::ops;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// L2 penalty `λ/2·‖w‖²` on affine and convolution weights (not biases or slopes).
    pub weight_decay: f64,
    /// Return the parameters of the epoch with the best validation auROC
    /// instead of the last epoch.
    pub keep_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 7,
            epochs: 40,
            batch_size: 32,
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 0.01,
            keep_best: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive and finite");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight decay must be non-negative and finite");
        }
        Ok(())
    }
}

/// A single-input training example; `label` is the class index (1 = positive
/// for a sigmoid head).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Tensor,
    pub label: usize,
}

/// Where the loss attaches: the pre-activation feeding the output nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossHead {
    Sigmoid { logit: usize },
    Softmax { logits: usize, classes: usize },
}

impl LossHead {
    pub fn detect(graph: &Graph) -> Result<Self> {
        let out = graph
            .outputs()
            .first()
            .and_then(|id| graph.node(id))
            .ok_or_else(|| Error::Config("graph has no output".into()))?;
        let pre = graph.position(&out.inputs.first().cloned().unwrap_or_default());
        let len: usize = out.output_shape.iter().product();
        match (&out.kind, pre) {
            (NodeKind::Sigmoid, Some(logit)) if len == 1 => Ok(LossHead::Sigmoid { logit }),
            (NodeKind::Softmax, Some(logits)) if len >= 2 => Ok(LossHead::Softmax { logits, classes: len }),
            _ => Err(Error::Config(
                "training needs a 1-output sigmoid or a softmax head".into(),
            )),
        }
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-libm::fabs(z)))
}

/// Loss and `∂loss/∂pre-activation` for one sample.
fn loss_and_seed(head: LossHead, logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    match head {
        LossHead::Sigmoid { .. } => {
            let z = logits[0];
            let y = if label == 1 { 1.0 } else { 0.0 };
            (softplus(z) - y * z, alloc::vec![ops::sigmoid(z) - y])
        }
        LossHead::Softmax { .. } => {
            let p = ops::softmax(logits);
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + libm::log(logits.iter().map(|z| libm::exp(z - max)).sum::<f64>());
            let seed = p
                .iter()
                .enumerate()
                .map(|(k, pk)| pk - if k == label { 1.0 } else { 0.0 })
                .collect();
            (lse - logits[label], seed)
        }
    }
}

/// Adds one sample's parameter gradient into `grads` and returns its loss.
pub fn sample_gradient(graph: &Graph, head: LossHead, sample: &Sample, grads: &mut ParamGrads) -> Result<f64> {
    let trace = forward_single(graph, &sample.input)?;
    let at = match head {
        LossHead::Sigmoid { logit } => logit,
        LossHead::Softmax { logits, .. } => logits,
    };
    let (loss, seed) = loss_and_seed(head, trace.at(at).values(), sample.label);
    backprop(&trace, at, &seed, Some(grads), false);
    Ok(loss)
}

/// Computes the summed gradient of a mini-batch.
pub trait GradientExecutor {
    /// Adds `Σ_s ∇loss_s` to `out`, summing per-sample gradients in batch
    /// order, and returns the summed loss.
    fn batch_gradient(&self, graph: &Graph, head: LossHead, batch: &[&Sample], out: &mut ParamGrads) -> Result<f64>;
}

/// Single-threaded executor.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl GradientExecutor for Sequential {
    fn batch_gradient(&self, graph: &Graph, head: LossHead, batch: &[&Sample], out: &mut ParamGrads) -> Result<f64> {
        let mut scratch = ParamGrads::zeros_like(graph);
        let mut loss = 0.0;
        for sample in batch {
            scratch.fill_zero();
            loss += sample_gradient(graph, head, sample, &mut scratch)?;
            out.add_assign(&scratch);
        }
        Ok(loss)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_auroc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub graph: Graph,
    pub curve: Vec<EpochStats>,
    /// Epoch whose parameters `graph` holds.
    pub kept_epoch: usize,
}

/// Probability of class 1 (sigmoid) or `class` (softmax).
pub fn predict(graph: &Graph, input: &Tensor) -> Result<f64> {
    let trace = forward_single(graph, input)?;
    let out = trace.output().values();
    Ok(if out.len() == 1 { out[0] } else { out[1] })
}

/// Mean loss and auROC (when both classes occur) over `samples`.
pub fn evaluate(graph: &Graph, samples: &[Sample]) -> Result<(f64, Option<f64>)> {
    let head = LossHead::detect(graph)?;
    let at = match head {
        LossHead::Sigmoid { logit } => logit,
        LossHead::Softmax { logits, .. } => logits,
    };
    let mut loss = 0.0;
    let mut scores = Vec::with_capacity(samples.len());
    let mut labels = Vec::with_capacity(samples.len());
    for s in samples {
        let trace = forward_single(graph, &s.input)?;
        loss += loss_and_seed(head, trace.at(at).values(), s.label).0;
        let out = trace.output().values();
        scores.push(if out.len() == 1 { out[0] } else { out[1] });
        labels.push(s.label == 1);
    }
    let auc = auroc(&scores, &labels).ok();
    Ok((loss / samples.len().max(1) as f64, auc))
}

/// Re-draws every trainable parameter: weights uniform in `±sqrt(6 / fan_in)`,
/// biases 0, rectifier slopes 0.25.
pub fn initialize(graph: &Graph, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = graph.clone();
    for i in 0..g.len() {
        let fan_in = match &g.nodes()[i].kind {
            NodeKind::Affine { weights, .. } => weights.shape()[1],
            NodeKind::Conv1d { filters, .. } => filters.shape()[1] * filters.shape()[2],
            NodeKind::Maxout { weights, .. } => weights.shape()[2],
            _ => 1,
        };
        let is_prelu = matches!(g.nodes()[i].kind, NodeKind::Prelu { .. });
        let limit = libm::sqrt(6.0 / fan_in as f64);
        for (slot, values) in g.parameters_mut(i).into_iter().enumerate() {
            for v in values.iter_mut() {
                *v = match (is_prelu, slot) {
                    (true, _) => 0.25,
                    (false, 0) => rng.gen_range(-limit..limit),
                    _ => 0.0,
                };
            }
        }
    }
    g
}

/// Trains a copy of `graph`, starting from its current parameters.
///
/// Examples are reshuffled every epoch from a generator seeded with
/// `config.seed`; updates are `v ← μ·v − η·(ḡ + λ·w)`, `θ ← θ + v` with `ḡ` the
/// batch mean gradient. With `keep_best` and a non-empty validation set the
/// returned parameters are those of the best validation epoch.
pub fn train_loop(
    graph: &Graph,
    train: &[Sample],
    val: &[Sample],
    config: &TrainConfig,
    executor: &dyn GradientExecutor,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let head = LossHead::detect(graph)?;
    let mut graph = graph.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut velocity = ParamGrads::zeros_like(&graph);
    let mut grads = ParamGrads::zeros_like(&graph);
    let mut curve = Vec::with_capacity(config.epochs);
    let decayed: Vec<bool> = graph
        .nodes()
        .iter()
        .map(|n| matches!(n.kind, NodeKind::Affine { .. } | NodeKind::Conv1d { .. } | NodeKind::Maxout { .. }))
        .collect();
    let mut best: Option<(f64, usize, Graph)> = None;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train[i]).collect();
            grads.fill_zero();
            let diverged = Error::NonFiniteLoss { epoch, batch: b };
            let loss = match executor.batch_gradient(&graph, head, &batch, &mut grads) {
                Err(Error::NonFinite { .. }) => return Err(diverged),
                other => other?,
            };
            if !loss.is_finite() || !grads.is_finite() {
                return Err(diverged);
            }
            epoch_loss += loss;
            let scale = config.learning_rate / batch.len() as f64;
            for (i, &decays) in decayed.iter().enumerate() {
                let params = graph.parameters_mut(i);
                for (slot, ((p, v), g)) in params
                    .into_iter()
                    .zip(velocity.per_node[i].iter_mut())
                    .zip(&grads.per_node[i])
                    .enumerate()
                {
                    let decay = if decays && slot == 0 { config.weight_decay } else { 0.0 };
                    for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                        *v = config.momentum * *v - scale * g - config.learning_rate * decay * *p;
                        *p += *v;
                    }
                }
            }
        }
        let (val_loss, val_auroc) = if val.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate(&graph, val)?;
            (Some(l), a)
        };
        curve.push(EpochStats {
            epoch,
            train_loss: epoch_loss / train.len() as f64,
            val_loss,
            val_auroc,
        });
        if let (true, Some(auc)) = (config.keep_best, val_auroc) {
            if best.as_ref().is_none_or(|(b, _, _)| auc > *b) {
                best = Some((auc, epoch, graph.clone()));
            }
        }
    }
    Ok(match best {
        Some((_, kept_epoch, graph)) => TrainOutcome { graph, curve, kept_epoch },
        None => TrainOutcome {
            graph,
            kept_epoch: curve.len().saturating_sub(1),
            curve,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;
    use alloc::vec;

    fn toy() -> (Graph, Vec<Sample>) {
        let g = GraphBuilder::new()
            .input("x", &[2])
            .affine("logit", "x", Tensor::zeros(&[1, 2]), vec![0.0])
            .sigmoid("p", "logit")
            .output("p")
            .build()
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = (0..200)
            .map(|i| {
                let label = i % 2;
                let sign = if label == 1 { 1.0 } else { -1.0 };
                let a: f64 = rng.gen_range(0.2..2.0);
                let b: f64 = rng.gen_range(-2.0..2.0);
                Sample {
                    input: Tensor::vector(vec![sign * a + 0.3 * b, b]),
                    label,
                }
            })
            .collect();
        (initialize(&g, 1), data)
    }

    #[test]
    fn separable_toy_reaches_full_accuracy_with_falling_loss() {
        let (g, data) = toy();
        let config = TrainConfig {
            epochs: 200,
            learning_rate: 0.1,
            weight_decay: 0.0,
            ..TrainConfig::default()
        };
        let out = train_loop(&g, &data, &[], &config, &Sequential).unwrap();
        let correct = data
            .iter()
            .filter(|s| (predict(&out.graph, &s.input).unwrap() > 0.5) == (s.label == 1))
            .count();
        assert_eq!(correct, data.len());
        for w in out.curve.windows(2) {
            assert!(w[1].train_loss <= w[0].train_loss + 1e-12, "{w:?}");
        }
    }

    #[test]
    fn same_seed_same_weights() {
        let (g, data) = toy();
        let config = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let a = train_loop(&g, &data, &data[..20], &config, &Sequential).unwrap();
        let b = train_loop(&g, &data, &data[..20], &config, &Sequential).unwrap();
        assert_eq!(a, b);
        let best = a.curve.iter().filter_map(|e| e.val_auroc).fold(0.0, f64::max);
        assert_eq!(a.curve[a.kept_epoch].val_auroc, Some(best));
        assert_eq!(evaluate(&a.graph, &data[..20]).unwrap().1, Some(best));
    }

    #[test]
    fn rejects_headless_graph() {
        let g = GraphBuilder::new().input("x", &[2]).relu("r", "x").output("r").build().unwrap();
        let s = Sample {
            input: Tensor::vector(vec![1.0, 1.0]),
            label: 0,
        };
        assert!(matches!(
            train_loop(&g, &[s], &[], &TrainConfig::default(), &Sequential),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn diverging_run_aborts() {
        let (_, data) = toy();
        let g = GraphBuilder::new()
            .input("x", &[2])
            .affine("h", "x", Tensor::zeros(&[4, 2]), vec![0.0; 4])
            .relu("r", "h")
            .affine("logit", "r", Tensor::zeros(&[1, 4]), vec![0.0])
            .sigmoid("p", "logit")
            .output("p")
            .build()
            .unwrap();
        let g = initialize(&g, 2);
        let config = TrainConfig {
            epochs: 50,
            learning_rate: 1e300,
            ..TrainConfig::default()
        };
        let r = train_loop(&g, &data, &[], &config, &Sequential).map(|o| o.curve);
        assert!(matches!(r, Err(Error::NonFiniteLoss { .. })), "{r:?}");
    }
}
