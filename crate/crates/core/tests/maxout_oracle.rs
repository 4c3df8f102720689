use deeplift_core::deeplift::maxout::CROSSING_TOLERANCE;
use deeplift_core::deeplift::{maxout_multipliers, maxout_segments, upper_envelope};
use deeplift_core::synth::uniform_tensor;
use deeplift_core::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Winning piece at `t` by direct evaluation, or `None` when two pieces are
/// too close to call.
fn brute_force(intercepts: &[f64], slopes: &[f64], t: f64) -> Option<usize> {
    let vals: Vec<f64> = intercepts.iter().zip(slopes).map(|(a, b)| a + b * t).collect();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    (vals.len() == 1 || vals[order[0]] - vals[order[1]] > 1e-9).then_some(order[0])
}

fn envelope_matches_sampling(intercepts: &[f64], slopes: &[f64]) -> Result<(), String> {
    let d = upper_envelope(intercepts, slopes);
    let n = 10_000;
    for s in 0..n {
        let t = (s as f64 + 0.5) / n as f64;
        if let Some(want) = brute_force(intercepts, slopes, t) {
            let got = d.piece_at(t);
            if got != want {
                return Err(format!("t={t}: envelope says {got}, sampling says {want}"));
            }
        }
    }
    let total: f64 = d.fractions().iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(format!("fractions sum to {total}"));
    }
    Ok(())
}

#[test]
fn random_maxout_units_match_dense_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let pieces = rng.gen_range(2..7);
        let dim = rng.gen_range(1..6);
        let w = uniform_tensor(&mut rng, &[pieces, 1, dim], -2.0, 2.0);
        let b = uniform_tensor(&mut rng, &[pieces, 1], -1.0, 1.0);
        let x0: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let dx: Vec<f64> = x.iter().zip(&x0).map(|(a, b)| a - b).collect();
        let row = |p: usize| &w.values()[p * dim..(p + 1) * dim];
        let intercepts: Vec<f64> = (0..pieces)
            .map(|p| row(p).iter().zip(&x0).map(|(a, b)| a * b).sum::<f64>() + b.values()[p])
            .collect();
        let slopes: Vec<f64> = (0..pieces).map(|p| row(p).iter().zip(&dx).map(|(a, b)| a * b).sum()).collect();
        envelope_matches_sampling(&intercepts, &slopes).unwrap_or_else(|e| panic!("case {case}: {e}"));

        let d = maxout_segments(&w, &b, 0, &x0, &x);
        let m = maxout_multipliers(&w, 0, &d);
        let f = |v: &[f64]| (0..pieces).map(|p| row(p).iter().zip(v).map(|(a, c)| a * c).sum::<f64>() + b.values()[p]).fold(f64::NEG_INFINITY, f64::max);
        let dy = f(&x) - f(&x0);
        let sum: f64 = m.iter().zip(&dx).map(|(a, b)| a * b).sum();
        assert!((sum - dy).abs() < 1e-9, "case {case}: {sum} vs {dy}");
    }
}

proptest! {
    #[test]
    fn envelope_of_arbitrary_lines(lines in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..8)) {
        let (a, s): (Vec<f64>, Vec<f64>) = lines.into_iter().unzip();
        prop_assert_eq!(envelope_matches_sampling(&a, &s), Ok(()));
    }
}

#[test]
fn coincident_lines_pick_one_piece() {
    let d = upper_envelope(&[1.0, 1.0], &[2.0, 2.0]);
    assert_eq!(d.segments.len(), 1);
    const { assert!(CROSSING_TOLERANCE < 1e-9) };
    let w = Tensor::new(vec![2, 1, 1], vec![1.0, 1.0]).unwrap();
    let b = Tensor::new(vec![2, 1], vec![0.0, 0.0]).unwrap();
    let d = maxout_segments(&w, &b, 0, &[0.0], &[3.0]);
    assert_eq!(maxout_multipliers(&w, 0, &d), vec![1.0]);
}
