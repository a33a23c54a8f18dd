//! Shared evaluation plumbing and file emission for the subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use pairscore::dataset::{self, Dataset, ExemplarPolicy};
use pairscore::metrics::{self, EvalReport, LayerAccuracyRow};
use pairscore::partition::{locate, GroupPartition};
use pairscore::pipeline::{predict, EpochStats, ExemplarVote, TrainedModel};
use pairscore::{Error, Result};

pub fn sha256_hex(data: &str) -> String {
    let mut h = Sha256::new();
    h.update(data.as_bytes());
    format!("{:x}", h.finalize())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictionRecord {
    pub id: String,
    pub category: String,
    pub score_true: f64,
    pub score_pred: f64,
    pub per_exemplar: Vec<ExemplarVote>,
}

pub struct EvalParams {
    pub m: usize,
    pub theta: f64,
    pub seed: u64,
    pub policy: ExemplarPolicy,
    pub k_max: usize,
}

pub struct EvalArtifacts {
    pub report: EvalReport,
    pub predictions: Vec<PredictionRecord>,
}

fn check_dims(model_dim: usize, ds: &Dataset) -> Result<()> {
    if model_dim != ds.feature_dim() {
        return Err(Error::Dimension {
            expected: model_dim,
            got: ds.feature_dim(),
        });
    }
    Ok(())
}

/// Per-category Spearman and relative-L2 (x100) over aligned predictions.
fn per_category_metrics(
    preds: &[f64],
    test: &Dataset,
    ranges: &BTreeMap<String, (f64, f64)>,
    theta: f64,
) -> Result<(BTreeMap<String, f64>, BTreeMap<String, f64>)> {
    let mut grouped: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (p, s) in preds.iter().zip(test.samples()) {
        let e = grouped.entry(&s.category).or_default();
        e.0.push(*p);
        e.1.push(s.score);
    }
    let mut rho = BTreeMap::new();
    let mut rl2 = BTreeMap::new();
    for (cat, (p, t)) in &grouped {
        let &(lo, hi) = ranges
            .get(*cat)
            .ok_or_else(|| Error::Data(format!("no score range for category {cat}")))?;
        rl2.insert(
            cat.to_string(),
            100.0 * metrics::r_l2(p, t, hi, lo, theta)?,
        );
        if p.len() >= 2 {
            rho.insert(cat.to_string(), metrics::spearman(p, t)?);
        }
    }
    if rho.is_empty() {
        return Err(Error::Data(
            "no category has at least two test samples; correlation undefined".into(),
        ));
    }
    Ok((rho, rl2))
}

/// Curve thresholds at 2% steps of the mean category score range, 0 to 50%.
fn curve_thresholds(ranges: &BTreeMap<String, (f64, f64)>, categories: &[String]) -> Vec<f64> {
    let spans: Vec<f64> = categories
        .iter()
        .filter_map(|c| ranges.get(c).map(|&(lo, hi)| hi - lo))
        .collect();
    let mean = spans.iter().sum::<f64>() / spans.len().max(1) as f64;
    (0..=25).map(|i| i as f64 * 0.02 * mean).collect()
}

pub fn summarize_scores(
    preds: &[f64],
    test: &Dataset,
    ranges: &BTreeMap<String, (f64, f64)>,
    theta: f64,
) -> Result<(f64, f64)> {
    let (rho, rl2) = per_category_metrics(preds, test, ranges, theta)?;
    let rhos: Vec<f64> = rho.values().copied().collect();
    let fisher = metrics::fisher_avg(&rhos)?;
    let rl2_mean = rl2.values().sum::<f64>() / rl2.len() as f64;
    Ok((fisher, rl2_mean))
}

pub fn evaluate_model(
    model: &TrainedModel,
    pool: &Dataset,
    test: &Dataset,
    params: &EvalParams,
) -> Result<EvalArtifacts> {
    check_dims(model.feature_dim, test)?;
    check_dims(model.feature_dim, pool)?;
    for cat in test.categories() {
        model.epsilon_for(&cat)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut predictions = Vec::with_capacity(test.len());
    let mut point_preds = Vec::with_capacity(test.len());
    let mut pred_leaves = Vec::new();
    let mut true_leaves = Vec::new();
    for input in test.samples() {
        let exemplars =
            dataset::select_exemplars_with_rng(input, pool, &params.policy, params.m, &mut rng)?;
        let p = predict(model, input, &exemplars)?;
        for v in &p.per_exemplar {
            pred_leaves.push(v.group_index - 1);
            true_leaves.push(locate(&model.partition, input.score - v.exemplar_score) - 1);
        }
        point_preds.push(p.score_pred);
        predictions.push(PredictionRecord {
            id: p.id,
            category: input.category.clone(),
            score_true: input.score,
            score_pred: p.score_pred,
            per_exemplar: p.per_exemplar,
        });
    }

    // Training-pool ranges define s_max/s_min; fall back to the test set for
    // categories the pool lacks a range for (cannot happen after the epsilon
    // check above, but keeps the lookup total).
    let mut ranges = pool.score_range().clone();
    for (cat, r) in test.score_range() {
        ranges.entry(cat.clone()).or_insert(*r);
    }

    let (per_category_rho, per_category_rl2_x100) =
        per_category_metrics(&point_preds, test, &ranges, params.theta)?;
    let rhos: Vec<f64> = per_category_rho.values().copied().collect();
    let rho_fisher_avg = metrics::fisher_avg(&rhos)?;
    let rl2_mean_x100 =
        per_category_rl2_x100.values().sum::<f64>() / per_category_rl2_x100.len() as f64;

    let truth: Vec<f64> = test.samples().iter().map(|s| s.score).collect();
    let thresholds = curve_thresholds(&ranges, &test.categories());
    let cumulative_curve = metrics::cumulative_curve(&point_preds, &truth, &thresholds);
    let layer_accuracy = metrics::layer_accuracy_table(
        &pred_leaves,
        &true_leaves,
        model.tree.config.depth,
        params.k_max,
    )?;

    Ok(EvalArtifacts {
        report: EvalReport {
            per_category_rho,
            rho_fisher_avg,
            per_category_rl2_x100,
            rl2_mean_x100,
            theta: params.theta,
            n_test: test.len(),
            m_exemplars: params.m,
            cumulative_curve,
            layer_accuracy,
        },
        predictions,
    })
}

pub fn write_report_json(path: &Path, report: &EvalReport) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Data(format!("report serialization failed: {e}")))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_predictions_jsonl(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(
            &serde_json::to_string(r)
                .map_err(|e| Error::Data(format!("prediction serialization failed: {e}")))?,
        );
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn write_log_csv(path: &Path, log: &[EpochStats]) -> Result<()> {
    let mut out = String::from("epoch,j,j_cls,j_reg\n");
    for e in log {
        out.push_str(&format!("{},{},{},{}\n", e.epoch, e.mean_j, e.mean_cls, e.mean_reg));
    }
    write_text(path, &out)
}

pub fn write_curve_csv(path: &Path, curve: &[(f64, f64)]) -> Result<()> {
    let mut out = String::from("threshold,fraction\n");
    for (t, f) in curve {
        out.push_str(&format!("{t},{f}\n"));
    }
    write_text(path, &out)
}

pub fn write_layers_csv(path: &Path, rows: &[LayerAccuracyRow]) -> Result<()> {
    let mut out = String::from("layer,k,accuracy,saturated\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.layer, r.k, r.accuracy, r.saturated));
    }
    write_text(path, &out)
}

/// Deltas falling in each group's closed interval; boundary values count for
/// both adjacent groups, matching how shared bounds anchor two intervals.
pub fn inclusive_counts(p: &GroupPartition, deltas: &[f64]) -> Vec<usize> {
    p.bounds()
        .iter()
        .map(|&(l, r)| deltas.iter().filter(|&&d| d >= l && d <= r).count())
        .collect()
}

pub fn write_partition_csv(
    path: &Path,
    quantile: &GroupPartition,
    uniform: &GroupPartition,
    deltas: &[f64],
) -> Result<()> {
    let qc = inclusive_counts(quantile, deltas);
    let uc = inclusive_counts(uniform, deltas);
    let mut out =
        String::from("group,quantile_left,quantile_right,quantile_count,uniform_left,uniform_right,uniform_count\n");
    for (i, ((&(ql, qr), &(ul, ur)), (nq, nu))) in quantile
        .bounds()
        .iter()
        .zip(uniform.bounds())
        .zip(qc.iter().zip(&uc))
        .enumerate()
    {
        out.push_str(&format!("{},{ql},{qr},{nq},{ul},{ur},{nu}\n", i + 1));
    }
    write_text(path, &out)
}

pub fn split_digest(test: &Dataset) -> String {
    let ids: Vec<&str> = test.samples().iter().map(|s| s.id.as_str()).collect();
    sha256_hex(&ids.join("\n"))
}
