//! Property tests for partition invariants and tree normalization.

use proptest::prelude::*;

use pairscore::partition::{build_quantile, build_uniform, locate, make_label};
use pairscore::tree::{TreeConfig, TreeModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn distinct_sorted_deltas(len: core::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::btree_set(-1000i64..1000, len)
        .prop_map(|s| s.into_iter().map(|v| v as f64 / 7.0).collect())
}

/// Number of deltas inside each group's closed interval; boundary deltas are
/// shared by both adjacent groups, mirroring how the bound elements anchor
/// two intervals at once.
fn inclusive_counts(bounds: &[(f64, f64)], deltas: &[f64]) -> Vec<usize> {
    bounds
        .iter()
        .map(|&(l, r)| deltas.iter().filter(|&&d| d >= l && d <= r).count())
        .collect()
}

proptest! {
    #[test]
    fn quantile_groups_are_balanced(deltas in distinct_sorted_deltas(8..200)) {
        for &r_count in &[2usize, 4, 8] {
            if deltas.len() > r_count {
                let p = build_quantile(&deltas, r_count).unwrap();
                let counts = inclusive_counts(p.bounds(), &deltas);
                let max = counts.iter().max().unwrap();
                let min = counts.iter().min().unwrap();
                prop_assert!(max - min <= 1, "counts {counts:?}");
            }
        }
    }

    #[test]
    fn quantile_bounds_are_contiguous(deltas in distinct_sorted_deltas(10..100)) {
        let p = build_quantile(&deltas, 4).unwrap();
        for w in p.bounds().windows(2) {
            prop_assert_eq!(w[0].1, w[1].0);
        }
    }

    #[test]
    fn label_roundtrip_reproduces_delta(
        deltas in distinct_sorted_deltas(10..60),
        t in 0.0f64..1.0,
    ) {
        let p = build_quantile(&deltas, 4).unwrap();
        let (lo, hi) = p.range();
        let delta = lo + t * (hi - lo);
        let label = make_label(&p, delta);
        let (left, right) = p.bounds()[label.group_index - 1];
        let recon = label.sigma * (right - left) + left;
        prop_assert!((recon - delta).abs() <= 1e-9 * (1.0 + delta.abs()));
    }

    #[test]
    fn locate_is_monotone(
        deltas in distinct_sorted_deltas(10..60),
        a in -200.0f64..200.0,
        b in -200.0f64..200.0,
    ) {
        let p = build_quantile(&deltas, 8).unwrap();
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(locate(&p, lo) <= locate(&p, hi));
    }

    #[test]
    fn uniform_widths_are_equal(min in -50.0f64..0.0, span in 1.0f64..100.0) {
        let p = build_uniform(min, min + span, 8).unwrap();
        let w0 = p.bounds()[0].1 - p.bounds()[0].0;
        for &(l, r) in p.bounds() {
            prop_assert!((r - l - w0).abs() < 1e-9);
        }
    }

    #[test]
    fn leaf_probabilities_sum_to_one(seed in 0u64..500, x0 in -2.0f64..2.0, x1 in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = TreeModel::init(
            TreeConfig { depth: 3, node_feature_dim: 5, input_dim: 2 },
            &mut rng,
        ).unwrap();
        let (out, _) = model.forward(&[x0, x1]).unwrap();
        let sum: f64 = out.leaf_probs.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
    }
}
