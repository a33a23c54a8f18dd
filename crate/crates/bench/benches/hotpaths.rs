//! Hot-path benchmarks: tree forward/backward, quantile partition
//! construction, and Spearman correlation.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pairscore::metrics::spearman;
use pairscore::partition::{build_quantile, make_label};
use pairscore::tree::{tree_loss, TreeConfig, TreeModel};

fn tree_passes(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let config = TreeConfig {
        depth: 5,
        node_feature_dim: 64,
        input_dim: 129,
    };
    let tree = TreeModel::init(config, &mut rng).unwrap();
    let x: Vec<f64> = (0..129).map(|_| rng.random_range(-1.0..1.0)).collect();

    c.bench_function("tree_forward_d5_nd64", |b| {
        b.iter(|| tree.forward(black_box(&x)).unwrap())
    });

    let deltas: Vec<f64> = (0..200).map(|i| i as f64 - 100.0).collect();
    let partition = build_quantile(&deltas, 32).unwrap();
    let label = make_label(&partition, 12.5);
    let (out, tape) = tree.forward(&x).unwrap();
    let loss = tree_loss(&out, &label).unwrap();
    c.bench_function("tree_backward_d5_nd64", |b| {
        b.iter(|| {
            tree.backward(
                black_box(&tape),
                &loss.d_leaf_probs,
                &loss.d_leaf_regressions,
            )
            .unwrap()
        })
    });
}

fn quantile_partition(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut deltas: std::collections::BTreeSet<i64> = Default::default();
    while deltas.len() < 50_000 {
        deltas.insert(rng.random_range(-1_000_000i64..1_000_000));
    }
    let deltas: Vec<f64> = deltas.into_iter().map(|v| v as f64 / 11.0).collect();
    c.bench_function("build_quantile_50k_r32", |b| {
        b.iter(|| build_quantile(black_box(&deltas), 32).unwrap())
    });
}

fn spearman_rho(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let truth: Vec<f64> = (0..2000).map(|_| rng.random_range(0.0..100.0)).collect();
    let pred: Vec<f64> = truth
        .iter()
        .map(|v| v + rng.random_range(-5.0..5.0))
        .collect();
    c.bench_function("spearman_n2000", |b| {
        b.iter_batched(
            || (pred.clone(), truth.clone()),
            |(p, t)| spearman(&p, &t).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, tree_passes, quantile_partition, spearman_rho);
criterion_main!(benches);
