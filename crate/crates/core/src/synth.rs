//! Seeded random graphs and inputs for property checks and ensembles.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::deeplift::TargetSelection;
use crate::forward::Inputs;
use crate::graph::{Graph, GraphBuilder, NodeKind};
use crate::tensor::Tensor;
use crate::Target;

pub fn uniform_tensor<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let values = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    Tensor::new(shape.to_vec(), values).expect("finite")
}

fn weights<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], fan_in: usize) -> Tensor {
    let limit = 1.5 / libm::sqrt(fan_in as f64);
    uniform_tensor(rng, shape, -limit, limit)
}

fn biases<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect()
}

/// Uniform `[-scale, scale)` values for every input node.
pub fn random_inputs<R: Rng + ?Sized>(rng: &mut R, graph: &Graph, scale: f64) -> Inputs {
    graph
        .input_ids()
        .into_iter()
        .map(|id| {
            let shape = graph.node(id).expect("input").output_shape.clone();
            (id.into(), uniform_tensor(rng, &shape, -scale, scale))
        })
        .collect()
}

/// Biased ReLU MLP with `layers` affine layers (drawn from `min..=max`) and one
/// linear output, together with a random input.
pub fn random_relu_mlp<R: Rng + ?Sized>(
    rng: &mut R,
    min_layers: usize,
    max_layers: usize,
    input_dim: usize,
    width: usize,
) -> (Graph, Inputs) {
    let layers = rng.gen_range(min_layers..=max_layers);
    let mut b = GraphBuilder::new().input("x", &[input_dim]);
    let mut prev = String::from("x");
    let mut fan_in = input_dim;
    for l in 0..layers - 1 {
        let fc = format!("fc{l}");
        let act = format!("relu{l}");
        b = b
            .affine(&fc, &prev, weights(rng, &[width, fan_in], fan_in), biases(rng, width))
            .relu(&act, &fc);
        prev = act;
        fan_in = width;
    }
    let graph = b
        .affine("out", &prev, weights(rng, &[1, fan_in], fan_in), biases(rng, 1))
        .output("out")
        .build()
        .expect("well-formed MLP");
    let input = random_inputs(rng, &graph, 2.0);
    (graph, input)
}

/// Architectures used by the attribution property suites. Together they cover
/// every node kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Mlp,
    ConvPool,
    Maxout,
    Gated,
    TwoInput,
    SoftmaxHead,
    SigmoidHead,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Mlp,
        Family::ConvPool,
        Family::Maxout,
        Family::Gated,
        Family::TwoInput,
        Family::SoftmaxHead,
        Family::SigmoidHead,
    ];
}

fn activation<R: Rng + ?Sized>(rng: &mut R, channels: usize) -> NodeKind {
    match rng.gen_range(0..4) {
        0 => NodeKind::Relu,
        1 => {
            let n = if rng.gen_bool(0.5) { 1 } else { channels };
            NodeKind::Prelu {
                slope: (0..n).map(|_| rng.gen_range(0.05..0.5)).collect(),
            }
        }
        2 => NodeKind::Sigmoid,
        _ => NodeKind::Tanh,
    }
}

fn maxout_params<R: Rng + ?Sized>(rng: &mut R, pieces: usize, out: usize, fan_in: usize) -> (Tensor, Tensor) {
    (
        weights(rng, &[pieces, out, fan_in], fan_in),
        uniform_tensor(rng, &[pieces, out], -0.5, 0.5),
    )
}

/// A random graph of the given family and the target to attribute to.
pub fn random_graph<R: Rng + ?Sized>(rng: &mut R, family: Family) -> (Graph, TargetSelection) {
    let d = rng.gen_range(3..8);
    let h = rng.gen_range(3..10);
    let k = rng.gen_range(1..4);
    let explicit = |rng: &mut R, id: &str, n: usize| TargetSelection::Explicit(Target::new(id, rng.gen_range(0..n)));
    match family {
        Family::Mlp => {
            let (a1, a2) = (activation(rng, h), activation(rng, h));
            let g = GraphBuilder::new()
                .input("x", &[d])
                .affine("fc1", "x", weights(rng, &[h, d], d), biases(rng, h))
                .node("act1", a1, &["fc1"])
                .affine("fc2", "act1", weights(rng, &[h, h], h), biases(rng, h))
                .node("act2", a2, &["fc2"])
                .affine("out", "act2", weights(rng, &[k, h], h), biases(rng, k))
                .output("out")
                .build()
                .expect("mlp");
            let t = explicit(rng, "out", k);
            (g, t)
        }
        Family::ConvPool => {
            let (len, ch, f, w) = (rng.gen_range(10..20), rng.gen_range(1..4), rng.gen_range(2..5), rng.gen_range(2..4));
            let stride = rng.gen_range(1..3);
            let conv_len = (len - w) / stride + 1;
            let pw = rng.gen_range(2..4).min(conv_len);
            let ps = rng.gen_range(1..=pw);
            let pooled = ((conv_len - pw) / ps + 1) * f;
            let act = activation(rng, f);
            let g = GraphBuilder::new()
                .input("x", &[len, ch])
                .conv1d("conv", "x", weights(rng, &[f, w, ch], w * ch), biases(rng, f), stride)
                .node("act", act, &["conv"])
                .maxpool1d("pool", "act", pw, ps)
                .affine("fc", "pool", weights(rng, &[h, pooled], pooled), biases(rng, h))
                .relu("relu", "fc")
                .affine("out", "relu", weights(rng, &[k, h], h), biases(rng, k))
                .output("out")
                .build()
                .expect("conv");
            let t = explicit(rng, "out", k);
            (g, t)
        }
        Family::Maxout => {
            let (p1, p2) = (rng.gen_range(2..6), rng.gen_range(2..6));
            let (w1, b1) = maxout_params(rng, p1, h, d);
            let (w2, b2) = maxout_params(rng, p2, h, h);
            let act = activation(rng, h);
            let g = GraphBuilder::new()
                .input("x", &[d])
                .maxout("mo1", "x", w1, b1)
                .node("act", act, &["mo1"])
                .maxout("mo2", "act", w2, b2)
                .affine("out", "mo2", weights(rng, &[k, h], h), biases(rng, k))
                .output("out")
                .build()
                .expect("maxout");
            let t = explicit(rng, "out", k);
            (g, t)
        }
        Family::Gated => {
            let g = GraphBuilder::new()
                .input("x", &[d])
                .affine("gate_fc", "x", weights(rng, &[h, d], d), biases(rng, h))
                .sigmoid("gate", "gate_fc")
                .affine("cand_fc", "x", weights(rng, &[h, d], d), biases(rng, h))
                .tanh("cand", "cand_fc")
                .product("gated", "gate", "cand")
                .affine("fc", "gated", weights(rng, &[h, h], h), biases(rng, h))
                .prelu("prelu", "fc", (0..h).map(|_| rng.gen_range(0.05..0.5)).collect())
                .affine("out", "prelu", weights(rng, &[k, h], h), biases(rng, k))
                .output("out")
                .build()
                .expect("gated");
            let t = explicit(rng, "out", k);
            (g, t)
        }
        Family::TwoInput => {
            let (w, b) = maxout_params(rng, 3, k, h);
            let g = GraphBuilder::new()
                .input("u", &[d])
                .input("v", &[d])
                .affine("fu", "u", weights(rng, &[h, d], d), biases(rng, h))
                .relu("ru", "fu")
                .affine("fv", "v", weights(rng, &[h, d], d), biases(rng, h))
                .tanh("tv", "fv")
                .product("uv", "ru", "tv")
                .maxout("out", "uv", w, b)
                .output("out")
                .build()
                .expect("two-input");
            let t = explicit(rng, "out", k);
            (g, t)
        }
        Family::SoftmaxHead => {
            let classes = rng.gen_range(2..6);
            let act = activation(rng, h);
            let g = GraphBuilder::new()
                .input("x", &[d])
                .affine("fc", "x", weights(rng, &[h, d], d), biases(rng, h))
                .node("act", act, &["fc"])
                .affine("logits", "act", weights(rng, &[classes, h], h), biases(rng, classes))
                .softmax("probs", "logits")
                .output("probs")
                .build()
                .expect("softmax");
            let class = rng.gen_range(0..classes);
            (g, TargetSelection::Auto { class })
        }
        Family::SigmoidHead => {
            let (len, ch, f) = (rng.gen_range(12..24), 4, rng.gen_range(2..5));
            let w = rng.gen_range(3..6);
            let conv_len = len - w + 1;
            let pw = rng.gen_range(2..5);
            let pooled = ((conv_len - pw) / pw + 1) * f;
            let pieces = rng.gen_range(2..4);
            let (mw, mb) = maxout_params(rng, pieces, h, pooled);
            let g = GraphBuilder::new()
                .input("x", &[len, ch])
                .conv1d("conv", "x", weights(rng, &[f, w, ch], w * ch), biases(rng, f), 1)
                .prelu("prelu", "conv", (0..f).map(|_| rng.gen_range(0.05..0.5)).collect())
                .maxpool1d("pool", "prelu", pw, pw)
                .maxout("mo", "pool", mw, mb)
                .affine("logit", "mo", weights(rng, &[1, h], h), biases(rng, 1))
                .sigmoid("prob", "logit")
                .output("prob")
                .build()
                .expect("sigmoid head");
            (g, TargetSelection::Auto { class: 0 })
        }
    }
}
