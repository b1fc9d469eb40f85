use dmlp_core::labels::{argmax, softmax_rows};
use dmlp_core::noise::{inject_asymmetric, inject_symmetric, label_accuracy, ClassMap, NoiseSpec};
use dmlp_core::{init_logits, HardLabels, LabelLogits, Matrix};
use proptest::prelude::*;

fn labels_strategy() -> impl Strategy<Value = HardLabels> {
    (2usize..8).prop_flat_map(|c| prop::collection::vec(0..c, 1..200).prop_map(move |v| HardLabels::new(v, c).unwrap()))
}

fn matrix_strategy(lo: f64, hi: f64) -> impl Strategy<Value = Matrix> {
    (1usize..10, 1usize..7).prop_flat_map(move |(r, c)| {
        prop::collection::vec(lo..hi, r * c).prop_map(move |v| Matrix::from_vec(r, c, v).unwrap())
    })
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(m in matrix_strategy(-50.0, 50.0), alpha in 0.01f64..20.0) {
        let s = softmax_rows(&m, alpha);
        for row in s.iter_rows() {
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hard_labels_ignore_scale_and_row_shifts(m in matrix_strategy(-50.0, 50.0), alpha in 0.01f64..20.0, shift in -100.0f64..100.0) {
        let logits = LabelLogits::new(m.clone()).unwrap();
        let soft = logits.effective_labels(alpha);
        let shifted = Matrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j) + shift + i as f64);
        let expected = logits.hard_labels();
        for (i, row) in soft.iter_rows().enumerate() {
            // Exact ties after exp() rounding may pick a different index; the
            // value at the chosen index must still be maximal.
            let k = argmax(row);
            prop_assert_eq!(row[k], row[expected.as_slice()[i]]);
        }
        let moved = LabelLogits::new(shifted.clone()).unwrap().hard_labels();
        for (i, (&a, &b)) in moved.as_slice().iter().zip(expected.as_slice()).enumerate() {
            prop_assert_eq!(shifted.get(i, a), shifted.get(i, b));
        }
    }

    #[test]
    fn initial_logits_round_trip(y in labels_strategy()) {
        prop_assert_eq!(init_logits(&y).hard_labels(), y);
    }

    #[test]
    fn injection_is_deterministic(y in labels_strategy(), ratio in 0.0f64..=1.0, seed in any::<u64>()) {
        let a = inject_symmetric(&y, ratio, seed).unwrap();
        prop_assert_eq!(&a, &inject_symmetric(&y, ratio, seed).unwrap());
        prop_assert_eq!(a.classes(), y.classes());
        let exact = NoiseSpec { exact_count: true, ..NoiseSpec::symmetric(ratio, seed) };
        let flipped = exact.apply(&y).unwrap().as_slice().iter().zip(y.as_slice()).filter(|(a, b)| a != b).count();
        prop_assert_eq!(flipped, (ratio * y.len() as f64).round() as usize);
    }

    #[test]
    fn full_symmetric_noise_moves_every_label(y in labels_strategy(), seed in any::<u64>()) {
        let noisy = inject_symmetric(&y, 1.0, seed).unwrap();
        prop_assert!(noisy.as_slice().iter().zip(y.as_slice()).all(|(a, b)| a != b));
    }

    #[test]
    fn asymmetric_flips_follow_the_map(y in labels_strategy(), ratio in 0.0f64..=1.0, seed in any::<u64>()) {
        let c = y.classes();
        let pairs: Vec<(usize, usize)> = (0..c).step_by(2).map(|k| (k, (k + 1) % c)).collect();
        let map = ClassMap::from_pairs(c, &pairs).unwrap();
        let noisy = inject_asymmetric(&y, ratio, &map, seed).unwrap();
        for (&orig, &now) in y.as_slice().iter().zip(noisy.as_slice()) {
            prop_assert!(now == orig || map.target(orig) == Some(now));
        }
    }
}

#[test]
fn symmetric_flip_fraction() {
    let y = HardLabels::new((0..10_000).map(|i| i % 10).collect(), 10).unwrap();
    for seed in 0..5 {
        let frac = 1.0 - label_accuracy(&inject_symmetric(&y, 0.5, seed).unwrap(), &y).unwrap();
        assert!((0.48..=0.52).contains(&frac), "seed {seed}: {frac}");
    }
}

#[test]
fn symmetric_targets_are_uniform_over_other_classes() {
    let y = HardLabels::new(vec![3; 40_000], 5).unwrap();
    let noisy = inject_symmetric(&y, 1.0, 17).unwrap();
    let counts = noisy.counts();
    assert_eq!(counts[3], 0);
    for (k, &n) in counts.iter().enumerate().filter(|&(k, _)| k != 3) {
        assert!((9_500..=10_500).contains(&n), "class {k}: {n}");
    }
}

#[test]
fn asymmetric_flip_fraction() {
    let y = HardLabels::new((0..10_000).map(|i| i % 10).collect(), 10).unwrap();
    let map = ClassMap::cifar10();
    let noisy = inject_asymmetric(&y, 0.4, &map, 3).unwrap();
    let eligible: Vec<usize> = (0..y.len())
        .filter(|&i| map.target(y.as_slice()[i]).is_some())
        .collect();
    let flipped = eligible
        .iter()
        .filter(|&&i| noisy.as_slice()[i] != y.as_slice()[i])
        .count();
    let frac = flipped as f64 / eligible.len() as f64;
    assert!((0.37..=0.43).contains(&frac), "{frac}");
}

#[test]
fn seeds_give_different_noise() {
    let y = HardLabels::new((0..1000).map(|i| i % 4).collect(), 4).unwrap();
    assert_ne!(
        inject_symmetric(&y, 0.3, 1).unwrap(),
        inject_symmetric(&y, 0.3, 2).unwrap()
    );
}
