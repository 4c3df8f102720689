use deeplift_core::autodiff::backward;
use deeplift_core::deeplift::{attribute, AttributionRequest, DeepLiftConfig, Method, TargetSelection};
use deeplift_core::{forward, GraphBuilder, Inputs, Target, Tensor};

fn inputs(x: &[f64]) -> Inputs {
    Inputs::from([("x".to_string(), Tensor::vector(x.to_vec()))])
}

fn run(graph: &deeplift_core::Graph, x: &[f64], target: TargetSelection) -> Vec<f64> {
    let req = AttributionRequest {
        input: inputs(x),
        reference: inputs(&vec![0.0; x.len()]),
        target,
        method: Method::DeepLift,
    };
    attribute(graph, &req, &DeepLiftConfig::default())
        .unwrap()
        .contributions_of("x")
}

#[test]
fn dead_relu_still_gets_credit() {
    // t = 0.1 + 0.2·ReLU(x1 + 2·x2 + 2)
    let g = GraphBuilder::new()
        .input("x", &[2])
        .affine("h", "x", Tensor::matrix(&[&[1.0, 2.0]]), vec![2.0])
        .relu("y", "h")
        .affine("t", "y", Tensor::matrix(&[&[0.2]]), vec![0.1])
        .output("t")
        .build()
        .unwrap();
    let t = Target::new("t", 0);
    let c = run(&g, &[-1.0, -1.0], TargetSelection::Explicit(t.clone()));
    assert!((c[0] - (0.1 - 0.5) / 3.0).abs() < 1e-9, "{c:?}");
    assert!((c[1] - (0.1 - 0.5) * 2.0 / 3.0).abs() < 1e-9, "{c:?}");
    let trace = forward(&g, &inputs(&[-1.0, -1.0])).unwrap();
    let grad = backward(&trace, &t).unwrap();
    assert_eq!(grad.get("x").unwrap().values(), &[0.0, 0.0]);
}

#[test]
fn saturated_sigmoid_splits_credit_but_logit_does_not() {
    let g = GraphBuilder::new()
        .input("x", &[2])
        .affine("y", "x", Tensor::matrix(&[&[1.0, 1.0]]), vec![0.0])
        .sigmoid("t", "y")
        .output("t")
        .build()
        .unwrap();
    let on_t = TargetSelection::Explicit(Target::new("t", 0));
    let one = run(&g, &[100.0, 0.0], on_t.clone());
    assert!((one[0] - 0.5).abs() < 1e-9 && one[1].abs() < 1e-9, "{one:?}");
    let both = run(&g, &[100.0, 100.0], on_t);
    assert!((both[0] - 0.25).abs() < 1e-9 && (both[1] - 0.25).abs() < 1e-9, "{both:?}");
    for x in [[100.0, 0.0], [100.0, 100.0]] {
        let c = run(&g, &x, TargetSelection::default());
        assert!((c[0] - 100.0).abs() < 1e-9, "{c:?}");
    }
}

#[test]
fn identical_input_and_reference_give_zero_everywhere() {
    let g = GraphBuilder::new()
        .input("x", &[2])
        .affine("h", "x", Tensor::matrix(&[&[1.0, -1.0], &[0.5, 2.0]]), vec![0.3, -0.2])
        .tanh("a", "h")
        .affine("y", "a", Tensor::matrix(&[&[1.0, 1.0]]), vec![0.0])
        .sigmoid("t", "y")
        .output("t")
        .build()
        .unwrap();
    let req = AttributionRequest {
        input: inputs(&[0.4, -0.7]),
        reference: inputs(&[0.4, -0.7]),
        target: TargetSelection::default(),
        method: Method::DeepLift,
    };
    let r = attribute(&g, &req, &DeepLiftConfig::default()).unwrap();
    assert!(r.features.iter().all(|f| f.contribution == 0.0));
    assert_eq!(r.target_delta, 0.0);
}
