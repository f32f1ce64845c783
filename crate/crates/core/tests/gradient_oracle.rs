//! Analytic BPTT gradients against central finite differences on random
//! small networks.

use cel_core::nn::{backward, finite_difference_gradient, max_relative_error, ParamTensors, Sample};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;
// Coordinates whose gradient is below this are compared in absolute terms.
const FLOOR: f64 = 1e-6;

fn random_instance(rng: &mut ChaCha8Rng) -> (ParamTensors, Vec<Sample>) {
    let h = rng.gen_range(1..=4);
    let d = rng.gen_range(1..=4);
    let seq = rng.gen_range(1..=3);
    let batch = rng.gen_range(1..=8);
    let mut params = ParamTensors::zeros(h, d);
    for p in params.iter_mut() {
        *p = rng.gen_range(-0.8..0.8);
    }
    let samples = (0..batch)
        .map(|_| {
            let inputs = (0..seq)
                .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            Sample::new(inputs, rng.gen_range(-1.0..1.0))
        })
        .collect();
    (params, samples)
}

#[test]
fn analytic_matches_finite_differences_on_200_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let (params, batch) = random_instance(&mut rng);
        let (_, analytic) = backward(&params, &batch, None).unwrap();
        let numeric = finite_difference_gradient(&params, &batch, STEP).unwrap();
        let err = max_relative_error(&analytic, &numeric, FLOOR);
        assert!(err < TOLERANCE, "case {case}: relative error {err:e}");
        worst = worst.max(err);
    }
    eprintln!("worst relative error {worst:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_for_arbitrary_seeds(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (params, batch) = random_instance(&mut rng);
        let (_, analytic) = backward(&params, &batch, None).unwrap();
        let numeric = finite_difference_gradient(&params, &batch, STEP).unwrap();
        prop_assert!(max_relative_error(&analytic, &numeric, FLOOR) < TOLERANCE);
    }

    #[test]
    fn extra_gradient_is_added_verbatim(seed in any::<u64>(), scale in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (params, batch) = random_instance(&mut rng);
        let mut extra = params.clone();
        extra.scale(scale);
        let (_, plain) = backward(&params, &batch, None).unwrap();
        let (_, with) = backward(&params, &batch, Some(&extra)).unwrap();
        for ((w, p), e) in with.iter().zip(plain.iter()).zip(extra.iter()) {
            prop_assert!((w - (p + e)).abs() <= 1e-12 * (1.0 + w.abs()));
        }
    }
}
