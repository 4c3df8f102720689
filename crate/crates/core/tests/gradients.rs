use deeplift_core::autodiff::{finite_difference_check, ParamGrads};
use deeplift_core::deeplift::{select_attribution_target, TargetSelection};
use deeplift_core::genomics::{build_genomics_cnn, one_hot_encode, CnnSpec};
use deeplift_core::synth::{random_graph, random_inputs, Family};
use deeplift_core::train::{sample_gradient, LossHead, Sample};
use deeplift_core::{Graph, NodeKind, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn input_gradients_match_central_differences_for_every_family() {
    for (k, family) in Family::ALL.into_iter().enumerate() {
        for s in 0..15 {
            let mut rng = ChaCha8Rng::seed_from_u64(77 + 100 * k as u64 + s);
            let (g, sel) = random_graph(&mut rng, family);
            let target = match sel {
                TargetSelection::Explicit(t) => t,
                auto => select_attribution_target(&g, &auto).unwrap().target,
            };
            let x = random_inputs(&mut rng, &g, 1.5);
            let r = finite_difference_check(&g, &x, &target, 1e-5, 1e-6).unwrap();
            assert!(r.passed, "{family:?}/{s}: {} ({:?})", r.max_rel_deviation, r.note);
        }
    }
}

#[test]
fn softmax_output_itself_is_differentiated_correctly() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (g, _) = random_graph(&mut rng, Family::SoftmaxHead);
    let out = g.outputs()[0].clone();
    let x = random_inputs(&mut rng, &g, 1.0);
    for class in 0..g.node(&out).unwrap().output_shape[0] {
        let r = finite_difference_check(&g, &x, &deeplift_core::Target::new(out.as_str(), class), 1e-5, 1e-6).unwrap();
        assert!(r.passed, "{}", r.max_rel_deviation);
    }
}

/// Rebuilds `graph` with parameter `slot`/`k` of node `node` shifted by `by`.
fn shifted(graph: &Graph, node: usize, slot: usize, k: usize, by: f64) -> Graph {
    let mut def = graph.to_def();
    let bump = |t: &Tensor| {
        let mut v = t.values().to_vec();
        v[k] += by;
        Tensor::new(t.shape().to_vec(), v).unwrap()
    };
    match (&mut def.nodes[node].kind, slot) {
        (NodeKind::Affine { weights, .. } | NodeKind::Conv1d { filters: weights, .. }, 0) => *weights = bump(weights),
        (NodeKind::Affine { bias, .. } | NodeKind::Conv1d { bias, .. }, 1) => bias[k] += by,
        (NodeKind::Prelu { slope }, 0) => slope[k] += by,
        other => panic!("no parameter slot {other:?}"),
    }
    Graph::new(def).unwrap()
}

#[test]
fn loss_gradients_of_the_motif_cnn_match_central_differences() {
    let spec = CnnSpec {
        length: 60,
        filters: 3,
        filter_width: 5,
        pool: 20,
        hidden: 6,
        seed: 3,
    };
    let g = build_genomics_cnn(&spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let seq: String = (0..60).map(|_| ['A', 'C', 'G', 'T'][rng.gen_range(0..4)]).collect();
    let sample = Sample {
        input: one_hot_encode(&seq).unwrap(),
        label: 1,
    };
    let head = LossHead::detect(&g).unwrap();
    let mut grads = ParamGrads::zeros_like(&g);
    sample_gradient(&g, head, &sample, &mut grads).unwrap();
    let loss = |g: &Graph| {
        let mut scratch = ParamGrads::zeros_like(g);
        sample_gradient(g, head, &sample, &mut scratch).unwrap()
    };
    let flat = grads.flatten();
    let mut offset = 0;
    let h = 1e-5;
    let mut checked = 0;
    for (i, node) in g.nodes().iter().enumerate() {
        let sizes: Vec<usize> = match &node.kind {
            NodeKind::Affine { weights, bias } => vec![weights.len(), bias.len()],
            NodeKind::Conv1d { filters, bias, .. } => vec![filters.len(), bias.len()],
            NodeKind::Prelu { slope } => vec![slope.len()],
            _ => vec![],
        };
        for (slot, n) in sizes.into_iter().enumerate() {
            for k in (0..n).step_by(1 + n / 7) {
                let num = (loss(&shifted(&g, i, slot, k, h)) - loss(&shifted(&g, i, slot, k, -h))) / (2.0 * h);
                let ana = flat[offset + k];
                let rel = (ana - num).abs() / ana.abs().max(num.abs()).max(1e-3);
                assert!(rel < 1e-6, "{} slot {slot} [{k}]: analytic {ana} numeric {num}", node.id);
                checked += 1;
            }
            offset += n;
        }
    }
    assert!(checked > 40);
}
