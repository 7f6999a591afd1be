mod common;

use common::oracles;
use deinterleave::numerics::{grad_check, Tape, Tensor};
use deinterleave::training::{batch_all_triplet_loss, mine_batch_all, pairwise_distances, triplet_loss_value};
use proptest::prelude::*;

/// Embeddings `[n, dim]`, labels and a margin.
fn case() -> impl Strategy<Value = (Vec<f64>, usize, Vec<i64>, f64)> {
    (1..=20usize, 1..=4usize, 1..=4i64, 0.05..3.0f64).prop_flat_map(|(n, dim, k, margin)| {
        (
            prop::collection::vec(-3.0..3.0f64, n * dim),
            Just(dim),
            prop::collection::vec(0..k, n),
            Just(margin),
        )
    })
}

fn tape_loss(z: &[f64], dim: usize, labels: &[i64], margin: f64) -> f64 {
    let tape = Tape::<f64>::new();
    let zv = tape.constant(Tensor::new([labels.len(), dim], z.to_vec()).unwrap());
    batch_all_triplet_loss(zv, labels, margin).unwrap().item()
}

proptest! {
    #[test]
    fn loss_matches_enumeration((z, dim, labels, margin) in case()) {
        let (want, _) = oracles::triplet_loss(&z, dim, &labels, margin);
        prop_assert!((tape_loss(&z, dim, &labels, margin) - want).abs() < 1e-10);
        prop_assert!((triplet_loss_value(&pairwise_distances(&z, dim), &labels, margin) - want).abs() < 1e-10);
    }

    #[test]
    fn loss_is_non_negative_and_bounded_by_margin_plus_spread((z, dim, labels, margin) in case()) {
        let loss = tape_loss(&z, dim, &labels, margin);
        let d = pairwise_distances(&z, dim);
        let max_d = d.iter().copied().fold(0.0, f64::max);
        prop_assert!(loss >= 0.0 && loss <= margin + max_d + 1e-9);
    }

    #[test]
    fn mined_triplets_are_valid_and_not_easy((z, dim, labels, margin) in case()) {
        let n = labels.len();
        let d = pairwise_distances(&z, dim);
        for (i, j, k) in mine_batch_all(&d, &labels, margin) {
            prop_assert!(i != j && labels[i] == labels[j] && labels[i] != labels[k]);
            prop_assert!(d[i * n + j] + margin >= d[i * n + k]);
        }
    }

    #[test]
    fn loss_ignores_translation_and_relabelling((z, dim, labels, margin) in case(), shift in -10.0..10.0f64) {
        let moved: Vec<f64> = z.iter().map(|v| v + shift).collect();
        let renamed: Vec<i64> = labels.iter().map(|l| 7 - 2 * l).collect();
        let base = tape_loss(&z, dim, &labels, margin);
        prop_assert!((tape_loss(&moved, dim, &labels, margin) - base).abs() < 1e-9);
        prop_assert!((tape_loss(&z, dim, &renamed, margin) - base).abs() < 1e-12);
    }
}

#[test]
fn empty_triplet_sets_give_zero_without_gradient() {
    let tape = Tape::<f64>::new();
    let z = tape.param(Tensor::new([3, 1], vec![0.0, 0.1, 5.0]).unwrap());
    for labels in [[0, 1, 2], [3, 3, 3]] {
        let loss = batch_all_triplet_loss(z, &labels, 1.0).unwrap();
        assert_eq!(loss.item(), 0.0);
        let grads = tape.backward(loss).unwrap();
        assert!(grads.wrt(z).data().iter().all(|&g| g == 0.0));
    }
    // All triplets easy: the negative is far beyond the margin.
    let loss = batch_all_triplet_loss(z, &[0, 0, 1], 1.0).unwrap();
    assert_eq!(loss.item(), 0.0);
}

#[test]
fn boundary_triplets_count_as_active() {
    // Anchor 0: d(0, 1) + margin == d(0, 2) exactly, a zero hinge that still
    // counts towards the mean. Anchor 1 has hinge 1.
    let z = [0.0, 1.0, 3.0];
    let labels = [0, 0, 1];
    let d = pairwise_distances(&z, 1);
    assert_eq!(mine_batch_all(&d, &labels, 2.0), vec![(0, 1, 2), (1, 0, 2)]);
    assert_eq!(triplet_loss_value(&d, &labels, 2.0), 0.5);
    assert_eq!(oracles::triplet_loss(&z, 1, &labels, 2.0), (0.5, 2));
}

#[test]
fn gradient_of_the_loss_matches_finite_differences() {
    let labels = [0, 0, 1, 1, 2, 2, 0];
    let z: Vec<f64> = (0..14).map(|i| ((i * 37 % 11) as f64 - 5.0) / 4.0).collect();
    let err = grad_check(
        |_, v| batch_all_triplet_loss(v[0], &labels, 1.9),
        &[Tensor::new([7, 2], z).unwrap()],
    )
    .unwrap();
    assert!(err < 1e-4, "relative error {err}");
}
