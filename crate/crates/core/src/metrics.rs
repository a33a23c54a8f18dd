//! Evaluation suite: Spearman's rank correlation, Fisher-z averaging across
//! categories, relative L2 distance with tolerance, cumulative score curves,
//! and per-layer tree accuracy with a nearest-K tolerance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Average ranks (1-based), ties receiving the mean of their rank span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Numeric(
            "correlation undefined for constant input".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman's rank correlation with average ranks for ties.
pub fn spearman(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    if pred.len() < 2 {
        return Err(Error::Data("need at least 2 points for correlation".into()));
    }
    pearson(&average_ranks(pred), &average_ranks(truth))
}

const FISHER_CLAMP: f64 = 1.0 - 1e-7;

/// Fisher-z average: tanh of the mean arctanh, with |rho| clamped below 1.
pub fn fisher_avg(rhos: &[f64]) -> Result<f64> {
    if rhos.is_empty() {
        return Err(Error::Data("cannot average an empty correlation list".into()));
    }
    let sum: f64 = rhos
        .iter()
        .map(|&r| r.clamp(-FISHER_CLAMP, FISHER_CLAMP).atanh())
        .sum();
    Ok((sum / rhos.len() as f64).tanh())
}

/// Relative L2 distance with tolerance theta; theta = 0 gives the plain
/// range-normalized mean squared error.
pub fn r_l2(pred: &[f64], truth: &[f64], s_max: f64, s_min: f64, theta: f64) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::Data("prediction/truth length mismatch or empty".into()));
    }
    if !(s_max > s_min) {
        return Err(Error::Data("degenerate score range".into()));
    }
    if theta < 0.0 {
        return Err(Error::Config("theta must be nonnegative".into()));
    }
    let range = s_max - s_min;
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .map(|(&p, &t)| {
            let e = ((t - p).abs() - theta).max(0.0) / range;
            e * e
        })
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Fraction of samples with |error| strictly below each threshold.
pub fn cumulative_curve(pred: &[f64], truth: &[f64], thresholds: &[f64]) -> Vec<(f64, f64)> {
    let n = pred.len().max(1) as f64;
    thresholds
        .iter()
        .map(|&eps| {
            let hits = pred
                .iter()
                .zip(truth)
                .filter(|(&p, &t)| (t - p).abs() < eps)
                .count();
            (eps, hits as f64 / n)
        })
        .collect()
}

/// Per-layer classification accuracy: at layer l the predicted node is the
/// depth-l prefix of the argmax-leaf path (0-based leaf indices), and a
/// prediction counts as correct when its node index is within K of the truth.
/// Returns one accuracy per layer 1..=depth.
pub fn layer_accuracy(
    pred_leaves: &[usize],
    true_leaves: &[usize],
    depth: usize,
    k: usize,
) -> Result<Vec<f64>> {
    if pred_leaves.len() != true_leaves.len() || pred_leaves.is_empty() {
        return Err(Error::Data("leaf index lists mismatch or empty".into()));
    }
    let n = pred_leaves.len() as f64;
    let mut accs = Vec::with_capacity(depth);
    for layer in 1..=depth {
        let shift = depth - layer;
        let hits = pred_leaves
            .iter()
            .zip(true_leaves)
            .filter(|(&p, &t)| {
                let pn = p >> shift;
                let tn = t >> shift;
                pn.abs_diff(tn) <= k
            })
            .count();
        accs.push(hits as f64 / n);
    }
    Ok(accs)
}

/// Accuracy table row: layer index, tolerance K, accuracy, and whether K
/// saturates the layer (tolerance covers every node).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerAccuracyRow {
    pub layer: usize,
    pub k: usize,
    pub accuracy: f64,
    pub saturated: bool,
}

/// Full evaluation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_category_rho: BTreeMap<String, f64>,
    pub rho_fisher_avg: f64,
    /// Per-category relative L2, reported x100.
    pub per_category_rl2_x100: BTreeMap<String, f64>,
    /// Plain mean of the per-category values, x100.
    pub rl2_mean_x100: f64,
    pub theta: f64,
    pub n_test: usize,
    pub m_exemplars: usize,
    pub cumulative_curve: Vec<(f64, f64)>,
    pub layer_accuracy: Vec<LayerAccuracyRow>,
}

/// Builds the accuracy table over K = 0..=k_max for every layer.
pub fn layer_accuracy_table(
    pred_leaves: &[usize],
    true_leaves: &[usize],
    depth: usize,
    k_max: usize,
) -> Result<Vec<LayerAccuracyRow>> {
    let mut rows = Vec::new();
    for k in 0..=k_max {
        let accs = layer_accuracy(pred_leaves, true_leaves, depth, k)?;
        for (i, acc) in accs.into_iter().enumerate() {
            let layer = i + 1;
            rows.push(LayerAccuracyRow {
                layer,
                k,
                accuracy: acc,
                saturated: k >= (1 << layer),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_perfect_agreement() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let y = vec![10.0, 20.0, 30.0, 40.0];
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_perfect_reversal() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let y = vec![4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&x, &y).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_one_swap() {
        // d^2 sum = 2, n = 5: rho = 1 - 6*2/(5*24) = 0.9
        let truth = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let pred = vec![1.0, 2.0, 3.0, 5.0, 4.0];
        assert!((spearman(&pred, &truth).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn spearman_constant_input_is_error() {
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn spearman_invariant_under_monotone_transform() {
        let pred = vec![0.3, 0.9, 0.1, 0.5, 0.7];
        let truth = vec![1.0, 5.0, 2.0, 4.0, 3.0];
        let a = spearman(&pred, &truth).unwrap();
        let transformed: Vec<f64> = pred.iter().map(|v| (3.0 * v).exp()).collect();
        let b = spearman(&transformed, &truth).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn average_ranks_handle_ties() {
        let r = average_ranks(&[10.0, 20.0, 20.0, 30.0]);
        assert_eq!(r, vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn fisher_identity_on_equal_values() {
        assert!((fisher_avg(&[0.5, 0.5]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fisher_mixed_values() {
        // tanh((0 + atanh(0.8)) / 2) = 0.5 exactly.
        let got = fisher_avg(&[0.0, 0.8]).unwrap();
        assert!((got - 0.5).abs() < 1e-3, "got {got}");
    }

    #[test]
    fn fisher_clamps_perfect_correlation() {
        let got = fisher_avg(&[1.0]).unwrap();
        assert!(got > 0.999 && got <= 1.0);
    }

    #[test]
    fn fisher_empty_is_error() {
        assert!(fisher_avg(&[]).is_err());
    }

    #[test]
    fn rl2_perfect_predictions() {
        let v = r_l2(&[1.0, 2.0], &[1.0, 2.0], 10.0, 0.0, 0.0).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn rl2_single_error() {
        let v = r_l2(&[60.0], &[50.0], 100.0, 0.0, 0.0).unwrap();
        assert!((v - 0.01).abs() < 1e-15);
    }

    #[test]
    fn rl2_tolerance_absorbs_error() {
        let v = r_l2(&[60.0], &[50.0], 100.0, 0.0, 10.0).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn rl2_scale_shift_invariance() {
        let pred = vec![12.0, 40.0, 77.0];
        let truth = vec![15.0, 42.0, 70.0];
        let a = r_l2(&pred, &truth, 100.0, 10.0, 4.0).unwrap();
        let f = 3.5;
        let c = -20.0;
        let tp: Vec<f64> = pred.iter().map(|v| f * v + c).collect();
        let tt: Vec<f64> = truth.iter().map(|v| f * v + c).collect();
        let b = r_l2(&tp, &tt, f * 100.0 + c, f * 10.0 + c, f * 4.0).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn curve_strict_inequality_at_zero() {
        let pts = cumulative_curve(&[1.0, 2.0], &[1.0, 2.0], &[0.0]);
        assert_eq!(pts[0].1, 0.0);
    }

    #[test]
    fn curve_saturates() {
        let pts = cumulative_curve(&[1.0, 5.0], &[2.0, 2.0], &[1e12]);
        assert_eq!(pts[0].1, 1.0);
    }

    #[test]
    fn curve_counts_by_hand() {
        let truth = vec![0.0, 0.0, 0.0];
        let pred = vec![1.0, 3.0, 5.0];
        let pts = cumulative_curve(&pred, &truth, &[4.0]);
        assert!((pts[0].1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn curve_is_nondecreasing() {
        let truth: Vec<f64> = (0..20).map(f64::from).collect();
        let pred: Vec<f64> = truth.iter().map(|v| v * 1.1 + 0.3).collect();
        let thresholds: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let pts = cumulative_curve(&pred, &truth, &thresholds);
        for w in pts.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn layer_accuracy_perfect_predictions() {
        let leaves = vec![0, 3, 5, 7];
        for k in 0..3 {
            let accs = layer_accuracy(&leaves, &leaves, 3, k).unwrap();
            assert_eq!(accs, vec![1.0; 3]);
        }
    }

    #[test]
    fn layer_accuracy_saturated_tolerance() {
        let pred = vec![0, 1, 2, 3];
        let truth = vec![3, 2, 1, 0];
        let accs = layer_accuracy(&pred, &truth, 2, 4).unwrap();
        assert_eq!(accs, vec![1.0, 1.0]);
    }

    #[test]
    fn layer_accuracy_prefix_paths() {
        // d=2, predicted leaf 3 vs true leaf 2 (1-based) -> 0-based 2 vs 1.
        // Leaf layer: |2-1| = 1. Layer 1: nodes 1 vs 0 (different halves).
        let pred = vec![2usize];
        let truth = vec![1usize];
        let k0 = layer_accuracy(&pred, &truth, 2, 0).unwrap();
        assert_eq!(k0, vec![0.0, 0.0]);
        let k1 = layer_accuracy(&pred, &truth, 2, 1).unwrap();
        assert_eq!(k1, vec![1.0, 1.0]);
    }

    #[test]
    fn layer_accuracy_monotone_in_k() {
        let pred = vec![0, 5, 3, 7, 2, 6];
        let truth = vec![1, 4, 3, 0, 7, 6];
        let mut prev = vec![0.0; 3];
        for k in 0..8 {
            let accs = layer_accuracy(&pred, &truth, 3, k).unwrap();
            for (a, p) in accs.iter().zip(&prev) {
                assert!(a >= p);
            }
            prev = accs;
        }
    }

    #[test]
    fn table_flags_saturated_rows() {
        let rows = layer_accuracy_table(&[0, 1], &[1, 0], 2, 4).unwrap();
        for row in rows {
            assert_eq!(row.saturated, row.k >= (1 << row.layer));
        }
    }
}
