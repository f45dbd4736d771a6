use std::sync::Arc;

use mpsvt_core::dense::{apply_sum, DenseState};
use mpsvt_core::measure::{add_gaussian_noise, measure_all};
use mpsvt_core::pauli::enumerate_window_strings;
use mpsvt_core::{CoefficientVector, Mps, PauliString, State, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn label_strategy(max_len: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!['I', 'X', 'Y', 'Z']), 1..=max_len)
        .prop_map(|v| v.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn label_round_trip(label in label_strategy(12)) {
        let p = PauliString::from_label(&label).unwrap();
        prop_assert_eq!(p.label(), label);
        prop_assert_eq!(p.n_sites(), p.label().len());
    }

    #[test]
    fn apply_sum_is_linear(
        n in 2usize..6,
        seed in any::<u64>(),
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
    ) {
        let table = Arc::new(enumerate_window_strings(n, 2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..table.len()).map(|_| rand::Rng::random::<f64>(&mut rng) - 0.5).collect();
        let b: Vec<f64> = (0..table.len()).map(|_| rand::Rng::random::<f64>(&mut rng) - 0.5).collect();
        let s = DenseState::random(n, &mut rng).unwrap();
        let ca = CoefficientVector::from_values(Arc::clone(&table), a.clone()).unwrap();
        let cb = CoefficientVector::from_values(Arc::clone(&table), b.clone()).unwrap();
        let mix = CoefficientVector::from_values(
            Arc::clone(&table),
            a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect(),
        )
        .unwrap();
        let ya = apply_sum(&ca, &s).unwrap();
        let yb = apply_sum(&cb, &s).unwrap();
        let ym = apply_sum(&mix, &s).unwrap();
        for i in 0..ym.len() {
            let want = ya[i] * C64::new(alpha, 0.0) + yb[i] * C64::new(beta, 0.0);
            prop_assert!((ym[i] - want).norm() <= 1e-12);
        }
    }

    #[test]
    fn expectations_are_bounded(n in 1usize..7, chi in 1usize..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Mps::random(n, chi, &mut rng).unwrap();
        let table = Arc::new(enumerate_window_strings(n, n.min(2)).unwrap());
        let r = measure_all(&State::Mps(m), table, "random").unwrap();
        prop_assert_eq!(r.values()[r.table().identity_index()], 1.0);
        for v in r.values() {
            prop_assert!(v.abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn noise_is_reproducible(seed in any::<u64>(), sigma in 0.0f64..0.05) {
        let table = Arc::new(enumerate_window_strings(4, 2).unwrap());
        let r = measure_all(&State::Mps(Mps::product_state("0101").unwrap()), table, "bits").unwrap();
        let a = add_gaussian_noise(&r, sigma, seed).unwrap();
        let b = add_gaussian_noise(&r, sigma, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn mps_round_trip_preserves_state(n in 1usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = DenseState::random(n, &mut rng).unwrap();
        let back = Mps::from_dense(&d, usize::MAX).unwrap().to_dense().unwrap();
        for (x, y) in d.amplitudes().iter().zip(back.amplitudes()) {
            prop_assert!((x - y).norm() <= 1e-12);
        }
    }
}
