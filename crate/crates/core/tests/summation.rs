use deeplift_core::deeplift::{attribute, AttributionRequest, DeepLiftConfig, Method};
use deeplift_core::synth::{random_graph, random_inputs, Family};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check(seed: u64, family: Family, scale: f64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (g, target) = random_graph(&mut rng, family);
    let req = AttributionRequest {
        input: random_inputs(&mut rng, &g, scale),
        reference: random_inputs(&mut rng, &g, scale),
        target,
        method: Method::DeepLift,
    };
    let r = attribute(&g, &req, &DeepLiftConfig::default()).map_err(|e| e.to_string())?;
    if r.sums_to_delta(1e-6, 1e-9) {
        Ok(())
    } else {
        Err(format!("{family:?} seed {seed}: residual {} for delta {}", r.residual, r.target_delta))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn contributions_sum_to_target_delta(seed in any::<u64>(), fam in 0usize..Family::ALL.len(), scale in 0.1f64..4.0) {
        prop_assert_eq!(check(seed, Family::ALL[fam], scale), Ok(()));
    }

    #[test]
    fn tiny_differences_stay_conservative(seed in any::<u64>(), fam in 0usize..Family::ALL.len()) {
        // Input and reference within ~1e-8 of each other exercise the
        // derivative fallback of the rescale rule.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, target) = random_graph(&mut rng, Family::ALL[fam]);
        let reference = random_inputs(&mut rng, &g, 1.0);
        let noise = random_inputs(&mut rng, &g, 1e-8);
        let input = reference
            .iter()
            .map(|(k, t)| {
                let v = t.values().iter().zip(noise[k].values()).map(|(a, b)| a + b).collect();
                (k.clone(), deeplift_core::Tensor::new(t.shape().to_vec(), v).unwrap())
            })
            .collect();
        let req = AttributionRequest { input, reference, target, method: Method::DeepLift };
        let r = attribute(&g, &req, &DeepLiftConfig::default()).unwrap();
        prop_assert!(r.sums_to_delta(1e-6, 1e-9), "residual {} delta {}", r.residual, r.target_delta);
    }
}

#[test]
fn every_family_conserves() {
    for (k, family) in Family::ALL.into_iter().enumerate() {
        for s in 0..40 {
            check(1000 * k as u64 + s, family, 2.0).unwrap();
        }
    }
}
