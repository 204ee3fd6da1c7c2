use lpl_core::nn::random::gaussian_sample;
use lpl_core::nn::{Activation, LayerSpec, MlpNetwork};
use lpl_core::par::Execution;
use lpl_core::reversal::{curvature_check, reverse, reverse_batch, ReversalOptions, RowSeeding};
use lpl_core::Matrix;
use proptest::prelude::*;

fn tanh_generator(d: usize, h: usize, m: usize, seed: u64) -> MlpNetwork {
    MlpNetwork::init(
        &[
            LayerSpec::new(d, h, Activation::Tanh),
            LayerSpec::new(h, m, Activation::Tanh),
        ],
        seed,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn small_steps_never_increase_the_loss(seed in any::<u64>(), d in 1usize..5, m in 2usize..10) {
        let g = tanh_generator(d, 8, m, seed);
        let x = gaussian_sample(1, m, 0.0, 0.5, seed ^ 1).map(f64::tanh).into_vec();
        let opts = ReversalOptions { step_size: 1e-3, max_steps: 200, tolerance: f64::NEG_INFINITY, ..Default::default() };
        let r = reverse(&g, &x, &opts, seed).unwrap();
        for w in r.loss_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-15, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn default_step_ends_no_worse_than_it_starts(seed in any::<u64>()) {
        let g = tanh_generator(4, 16, 12, seed);
        let x = gaussian_sample(1, 12, 0.0, 0.5, seed ^ 2).map(f64::tanh).into_vec();
        let r = reverse(&g, &x, &ReversalOptions::default(), seed).unwrap();
        prop_assert!(r.final_loss() <= r.loss_trace[0]);
    }

    #[test]
    fn curvature_matches_gauss_newton(seed in any::<u64>(), d in 1usize..5) {
        let g = tanh_generator(d, 12, 10, seed);
        let z = gaussian_sample(1, d, 0.0, 0.7, seed ^ 3).into_vec();
        let rep = curvature_check(&g, &z, 0.0).unwrap();
        prop_assert!(rep.max_abs_deviation < 1e-4);
        prop_assert!(rep.min_eigenvalue >= -1e-6);
    }

    #[test]
    fn l2_weight_lifts_the_spectrum(seed in any::<u64>(), lambda in 1e-3f64..1.0) {
        let g = tanh_generator(3, 12, 10, seed);
        let z = gaussian_sample(1, 3, 0.0, 0.7, seed ^ 4).into_vec();
        let rep = curvature_check(&g, &z, lambda).unwrap();
        prop_assert!(rep.min_eigenvalue >= lambda - 1e-6);
    }

    #[test]
    fn content_seeding_ignores_row_order(seed in any::<u64>()) {
        let g = tanh_generator(3, 8, 6, seed);
        let data = gaussian_sample(6, 6, 0.0, 0.4, seed ^ 5).map(f64::tanh);
        let opts = ReversalOptions { seeding: RowSeeding::Content, max_steps: 50, ..Default::default() };
        let a = reverse_batch(&g, &data, &opts, seed, "a").unwrap();
        let order = [5, 3, 1, 0, 2, 4];
        let b = reverse_batch(&g, &data.select_rows(&order), &opts, seed, "b").unwrap();
        for (k, &i) in order.iter().enumerate() {
            prop_assert_eq!(a.codes.row(i), b.codes.row(k));
        }
    }
}

#[test]
fn execution_mode_does_not_change_codes() {
    let g = tanh_generator(4, 16, 12, 3);
    let data = gaussian_sample(40, 12, 0.0, 0.4, 4).map(f64::tanh);
    let run = |execution| {
        let opts = ReversalOptions {
            execution,
            ..Default::default()
        };
        reverse_batch(&g, &data, &opts, 9, "x").unwrap()
    };
    let (p, s) = (run(Execution::Parallel), run(Execution::Sequential));
    assert_eq!(p.codes, s.codes);
    assert_eq!(
        p.reversal_losses
            .iter()
            .map(|v| v.to_bits())
            .collect::<Vec<_>>(),
        s.reversal_losses
            .iter()
            .map(|v| v.to_bits())
            .collect::<Vec<_>>()
    );
}

#[test]
fn perfect_preimages_are_recovered() {
    let mut hits = 0;
    for t in 0..20u64 {
        let g = tanh_generator(8, 64, 64, 1000 + t);
        let z = gaussian_sample(1, 8, 0.0, 0.5, 2000 + t);
        let x = g.predict(&z).unwrap().into_vec();
        let r = reverse(&g, &x, &ReversalOptions::default(), t).unwrap();
        hits += usize::from(r.final_loss() < 1e-6);
    }
    assert!(hits >= 18, "{hits}/20");
}

#[test]
fn reconstructions_of_recovered_codes_match_targets() {
    let g = tanh_generator(2, 16, 5, 8);
    let z = Matrix::row_vector(&[0.3, -0.2]);
    let x = g.predict(&z).unwrap();
    let codes = reverse_batch(
        &g,
        &x,
        &ReversalOptions {
            max_steps: 4000,
            tolerance: 0.0,
            ..Default::default()
        },
        1,
        "t",
    )
    .unwrap();
    let back = g.predict(&codes.codes).unwrap();
    assert!(back.max_abs_diff(&x) < 1e-5, "{}", back.max_abs_diff(&x));
}
