//! Contrastive-regression pipeline: pair featurization, the training loop
//! over exemplar pairs, multi-exemplar voting inference, a direct-regression
//! baseline, and an absolute-score tree mode for ablations.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{select_exemplars_with_rng, Dataset, ExemplarPolicy, Sample};
use crate::error::{Error, Result};
use crate::neural::{Activation, AdamState, AffineLayer, BlockGrads, MlpBlock};
use crate::partition::{self, GroupPartition, PairLabel};
use crate::tree::{decode_delta, tree_loss, TreeConfig, TreeGrads, TreeModel};

/// Concatenated pair feature [f_exemplar, f_input, s_exemplar / epsilon],
/// length 2D + 1. The order is fixed; train and test must agree.
pub fn pair_featurize(
    f_exemplar: &[f64],
    f_input: &[f64],
    s_exemplar: f64,
    epsilon: f64,
) -> Result<Vec<f64>> {
    if f_exemplar.len() != f_input.len() {
        return Err(Error::Dimension {
            expected: f_exemplar.len(),
            got: f_input.len(),
        });
    }
    if !(epsilon > 0.0) {
        return Err(Error::Config("epsilon must be positive".into()));
    }
    if s_exemplar < 0.0 || s_exemplar > epsilon {
        return Err(Error::Numeric(format!(
            "exemplar score {s_exemplar} outside [0, {epsilon}]; cannot normalize"
        )));
    }
    let mut out = Vec::with_capacity(2 * f_exemplar.len() + 1);
    out.extend_from_slice(f_exemplar);
    out.extend_from_slice(f_input);
    out.push(s_exemplar / epsilon);
    Ok(out)
}

pub const EPSILON_HEADROOM: f64 = 1.1;

/// Normalizing constant for a category: max training score times a headroom
/// factor, so unseen exemplar scores near the max still map below 1.
pub fn choose_epsilon(train: &Dataset, category: &str, headroom: f64) -> Result<f64> {
    let max = train
        .samples()
        .iter()
        .filter(|s| s.category == category)
        .map(|s| s.score)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Data(format!("no samples in category {category}")));
    }
    let eps = max * headroom;
    if !(eps > 0.0) {
        return Err(Error::Numeric(format!(
            "epsilon for category {category} is not positive (max score {max})"
        )));
    }
    Ok(eps)
}

fn epsilon_map(train: &Dataset, headroom: f64) -> Result<BTreeMap<String, f64>> {
    train
        .categories()
        .into_iter()
        .map(|c| choose_epsilon(train, &c, headroom).map(|e| (c, e)))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_tree: f64,
    pub lr_adapter: f64,
    /// Small trainable MLP over raw features, standing in for backbone
    /// fine-tuning; trained with its own learning rate.
    pub adapter_enabled: bool,
    pub policy: ExemplarPolicy,
    pub pairs_per_input: usize,
    pub seed: u64,
    pub depth: usize,
    pub node_feature_dim: usize,
    pub epsilon_headroom: f64,
}

impl TrainConfig {
    pub fn with_defaults(depth: usize, seed: u64) -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            lr_tree: 1e-3,
            lr_adapter: 1e-4,
            adapter_enabled: false,
            policy: ExemplarPolicy::category_only(seed),
            pairs_per_input: 2,
            seed,
            depth,
            node_feature_dim: 256,
            epsilon_headroom: EPSILON_HEADROOM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.pairs_per_input == 0 {
            return Err(Error::Config("epochs, batch_size and pairs_per_input must be positive".into()));
        }
        if !(self.lr_tree > 0.0) || !(self.lr_adapter > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(self.epsilon_headroom >= 1.0) {
            return Err(Error::Config("epsilon headroom must be >= 1".into()));
        }
        self.policy.validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_j: f64,
    pub mean_cls: f64,
    pub mean_reg: f64,
}

/// Everything needed to score new samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub tree: TreeModel,
    pub partition: GroupPartition,
    pub epsilon: BTreeMap<String, f64>,
    pub adapter: Option<MlpBlock>,
    pub feature_dim: usize,
}

impl TrainedModel {
    fn adapted(&self, feature: &[f64]) -> Result<Vec<f64>> {
        match &self.adapter {
            Some(a) => Ok(a.forward(feature)?.0),
            None => Ok(feature.to_vec()),
        }
    }

    pub fn epsilon_for(&self, category: &str) -> Result<f64> {
        self.epsilon
            .get(category)
            .copied()
            .ok_or_else(|| Error::Data(format!("no epsilon for category {category}")))
    }
}

#[derive(Debug, Clone)]
pub struct DeltaPrediction {
    pub delta: f64,
    /// 1-based selected group (argmax leaf).
    pub group_index: usize,
}

/// Anything that can predict the score difference input - exemplar from a
/// sample pair. Implemented by TrainedModel; tests substitute stubs.
pub trait RelativeScorer {
    fn predict_delta(&self, exemplar: &Sample, input: &Sample) -> Result<DeltaPrediction>;
}

impl RelativeScorer for TrainedModel {
    fn predict_delta(&self, exemplar: &Sample, input: &Sample) -> Result<DeltaPrediction> {
        let eps = self.epsilon_for(&exemplar.category)?;
        let fe = self.adapted(&exemplar.feature)?;
        let fi = self.adapted(&input.feature)?;
        let pf = pair_featurize(&fe, &fi, exemplar.score, eps)?;
        let (out, _) = self.tree.forward(&pf)?;
        let (delta, group_index) = decode_delta(&out, &self.partition)?;
        Ok(DeltaPrediction { delta, group_index })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExemplarVote {
    pub exemplar_id: String,
    pub exemplar_score: f64,
    pub delta: f64,
    pub group_index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub score_pred: f64,
    pub per_exemplar: Vec<ExemplarVote>,
}

/// Multi-exemplar voting: mean over per-exemplar absolute-score predictions.
pub fn predict<S: RelativeScorer>(
    scorer: &S,
    input: &Sample,
    exemplars: &[Sample],
) -> Result<Prediction> {
    if exemplars.is_empty() {
        return Err(Error::Config("need at least one exemplar".into()));
    }
    let mut votes = Vec::with_capacity(exemplars.len());
    for ex in exemplars {
        let p = scorer.predict_delta(ex, input)?;
        votes.push(ExemplarVote {
            exemplar_id: ex.id.clone(),
            exemplar_score: ex.score,
            delta: p.delta,
            group_index: p.group_index,
            score: p.delta + ex.score,
        });
    }
    let score_pred = votes.iter().map(|v| v.score).sum::<f64>() / votes.len() as f64;
    Ok(Prediction {
        id: input.id.clone(),
        score_pred,
        per_exemplar: votes,
    })
}

struct AdapterCtx {
    block: MlpBlock,
    adam: AdamState,
}

fn init_adapter(dim: usize, lr: f64) -> AdapterCtx {
    // Identity start keeps early training close to the frozen-feature path.
    let block = MlpBlock {
        layers: vec![(AffineLayer::identity(dim), Activation::Linear)],
    };
    let n = block.param_count();
    AdapterCtx {
        block,
        adam: AdamState::new(n, lr),
    }
}

fn adam_apply_tree(tree: &mut TreeModel, adam: &mut AdamState, grads: &TreeGrads) -> Result<()> {
    let mut flat = Vec::with_capacity(tree.param_count());
    tree.flatten_params(&mut flat);
    let mut g = Vec::with_capacity(flat.len());
    grads.flatten(&mut g);
    adam.step(&mut flat, &g)?;
    tree.assign_params(&flat)
}

fn adam_apply_block(block: &mut MlpBlock, adam: &mut AdamState, grads: &BlockGrads) -> Result<()> {
    let mut flat = Vec::with_capacity(block.param_count());
    block.flatten_params(&mut flat);
    let mut g = Vec::new();
    grads.flatten(&mut g);
    adam.step(&mut flat, &g)?;
    block.assign_params(&flat, 0);
    Ok(())
}

fn scale_tree_grads(grads: &mut TreeGrads, factor: f64) {
    let scale_block = |b: &mut BlockGrads| {
        for (dw, db) in &mut b.layers {
            for row in dw {
                for v in row {
                    *v *= factor;
                }
            }
            for v in db {
                *v *= factor;
            }
        }
    };
    scale_block(&mut grads.root);
    grads.nodes.iter_mut().for_each(scale_block);
    grads.leaves.iter_mut().for_each(scale_block);
}

fn scale_block_grads(grads: &mut BlockGrads, factor: f64) {
    for (dw, db) in &mut grads.layers {
        for row in dw {
            for v in row {
                *v *= factor;
            }
        }
        for v in db {
            *v *= factor;
        }
    }
}

/// Trains the contrastive tree: builds the quantile partition once from
/// training deltas, then each epoch resamples policy-matched exemplars per
/// input and minimizes the joint classification + regression loss with Adam.
pub fn train(train_set: &Dataset, cfg: &TrainConfig) -> Result<(TrainedModel, Vec<EpochStats>)> {
    cfg.validate()?;
    let d = train_set.feature_dim();
    let deltas = partition::collect_deltas(train_set, &cfg.policy)?;
    let group_partition = partition::build_quantile(&deltas, 1 << cfg.depth)?;
    let epsilon = epsilon_map(train_set, cfg.epsilon_headroom)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tree_config = TreeConfig {
        depth: cfg.depth,
        node_feature_dim: cfg.node_feature_dim,
        input_dim: 2 * d + 1,
    };
    let mut tree = TreeModel::init(tree_config, &mut rng)?;
    let mut adam_tree = AdamState::new(tree.param_count(), cfg.lr_tree);
    let mut adapter = cfg
        .adapter_enabled
        .then(|| init_adapter(d, cfg.lr_adapter));

    let samples = train_set.samples();
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        // Fresh exemplar draws every epoch expose the model to new deltas.
        let mut pairs: Vec<(usize, Sample)> = Vec::with_capacity(samples.len() * cfg.pairs_per_input);
        for (i, input) in samples.iter().enumerate() {
            let exemplars =
                select_exemplars_with_rng(input, train_set, &cfg.policy, cfg.pairs_per_input, &mut rng)?;
            for ex in exemplars {
                pairs.push((i, ex));
            }
        }
        pairs.shuffle(&mut rng);

        let mut sum_j = 0.0;
        let mut sum_cls = 0.0;
        let mut sum_reg = 0.0;

        for batch in pairs.chunks(cfg.batch_size) {
            let mut tree_grads = TreeGrads::zeros_like(&tree);
            let mut adapter_grads = adapter
                .as_ref()
                .map(|a| BlockGrads::zeros_like(&a.block));

            for (i, exemplar) in batch {
                let input = &samples[*i];
                let eps = epsilon[&exemplar.category];

                let (fe, fe_tape) = match &adapter {
                    Some(a) => {
                        let (y, t) = a.block.forward(&exemplar.feature)?;
                        (y, Some(t))
                    }
                    None => (exemplar.feature.clone(), None),
                };
                let (fi, fi_tape) = match &adapter {
                    Some(a) => {
                        let (y, t) = a.block.forward(&input.feature)?;
                        (y, Some(t))
                    }
                    None => (input.feature.clone(), None),
                };

                let pf = pair_featurize(&fe, &fi, exemplar.score, eps)?;
                let label: PairLabel =
                    partition::make_label(&group_partition, input.score - exemplar.score);
                let (out, tape) = tree.forward(&pf)?;
                let loss = tree_loss(&out, &label)?;
                sum_j += loss.total;
                sum_cls += loss.cls;
                sum_reg += loss.reg;

                let (d_input, grads) =
                    tree.backward(&tape, &loss.d_leaf_probs, &loss.d_leaf_regressions)?;
                tree_grads.accumulate(&grads);

                if let (Some(a), Some(acc)) = (&adapter, adapter_grads.as_mut()) {
                    let (_, ge) = a.block.backward(fe_tape.as_ref().unwrap(), &d_input[..d])?;
                    let (_, gi) = a.block.backward(fi_tape.as_ref().unwrap(), &d_input[d..2 * d])?;
                    acc.accumulate(&ge);
                    acc.accumulate(&gi);
                }
            }

            let inv = 1.0 / batch.len() as f64;
            scale_tree_grads(&mut tree_grads, inv);
            adam_apply_tree(&mut tree, &mut adam_tree, &tree_grads)?;
            if let (Some(a), Some(mut g)) = (adapter.as_mut(), adapter_grads) {
                scale_block_grads(&mut g, inv);
                adam_apply_block(&mut a.block, &mut a.adam, &g)?;
            }
        }

        let n = pairs.len() as f64;
        log.push(EpochStats {
            epoch,
            mean_j: sum_j / n,
            mean_cls: sum_cls / n,
            mean_reg: sum_reg / n,
        });
    }

    Ok((
        TrainedModel {
            tree,
            partition: group_partition,
            epsilon,
            adapter: adapter.map(|a| a.block),
            feature_dim: d,
        },
        log,
    ))
}

/// Direct regression baseline: a 3-layer MLP on the single-sample feature
/// regressing score / epsilon with MSE, decoded by multiplying back.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineModel {
    pub mlp: MlpBlock,
    pub epsilon: BTreeMap<String, f64>,
    pub feature_dim: usize,
}

pub fn baseline_train(
    train_set: &Dataset,
    cfg: &TrainConfig,
) -> Result<(BaselineModel, Vec<EpochStats>)> {
    cfg.validate()?;
    let d = train_set.feature_dim();
    let epsilon = epsilon_map(train_set, cfg.epsilon_headroom)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h = cfg.node_feature_dim;
    let mut mlp = MlpBlock::init(
        &[d, h, h, 1],
        &[Activation::Relu, Activation::Relu, Activation::Linear],
        &mut rng,
    );
    let mut adam = AdamState::new(mlp.param_count(), cfg.lr_tree);

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let samples = train_set.samples();
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum_mse = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = BlockGrads::zeros_like(&mlp);
            for &i in batch {
                let s = &samples[i];
                let target = s.score / epsilon[&s.category];
                let (y, tape) = mlp.forward(&s.feature)?;
                let diff = y[0] - target;
                sum_mse += diff * diff;
                let (_, g) = mlp.backward(&tape, &[2.0 * diff])?;
                grads.accumulate(&g);
            }
            scale_block_grads(&mut grads, 1.0 / batch.len() as f64);
            adam_apply_block(&mut mlp, &mut adam, &grads)?;
        }
        let mse = sum_mse / order.len() as f64;
        log.push(EpochStats {
            epoch,
            mean_j: mse,
            mean_cls: 0.0,
            mean_reg: mse,
        });
    }

    Ok((
        BaselineModel {
            mlp,
            epsilon,
            feature_dim: d,
        },
        log,
    ))
}

pub fn baseline_predict(model: &BaselineModel, sample: &Sample) -> Result<f64> {
    let eps = model
        .epsilon
        .get(&sample.category)
        .copied()
        .ok_or_else(|| Error::Data(format!("no epsilon for category {}", sample.category)))?;
    let (y, _) = model.mlp.forward(&sample.feature)?;
    Ok(y[0] * eps)
}

/// Tree on the raw single-sample feature with groups over absolute scores
/// (no exemplar pairing); the ablation's tree-only arm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbsoluteModel {
    pub tree: TreeModel,
    pub partition: GroupPartition,
    pub feature_dim: usize,
}

pub fn absolute_train(
    train_set: &Dataset,
    cfg: &TrainConfig,
) -> Result<(AbsoluteModel, Vec<EpochStats>)> {
    cfg.validate()?;
    let d = train_set.feature_dim();
    let mut scores: Vec<f64> = train_set.samples().iter().map(|s| s.score).collect();
    scores.sort_by(|a, b| a.total_cmp(b));
    let group_partition = partition::build_quantile(&scores, 1 << cfg.depth)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tree_config = TreeConfig {
        depth: cfg.depth,
        node_feature_dim: cfg.node_feature_dim,
        input_dim: d,
    };
    let mut tree = TreeModel::init(tree_config, &mut rng)?;
    let mut adam = AdamState::new(tree.param_count(), cfg.lr_tree);

    let samples = train_set.samples();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum_j = 0.0;
        let mut sum_cls = 0.0;
        let mut sum_reg = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = TreeGrads::zeros_like(&tree);
            for &i in batch {
                let s = &samples[i];
                let label = partition::make_label(&group_partition, s.score);
                let (out, tape) = tree.forward(&s.feature)?;
                let loss = tree_loss(&out, &label)?;
                sum_j += loss.total;
                sum_cls += loss.cls;
                sum_reg += loss.reg;
                let (_, g) = tree.backward(&tape, &loss.d_leaf_probs, &loss.d_leaf_regressions)?;
                grads.accumulate(&g);
            }
            scale_tree_grads(&mut grads, 1.0 / batch.len() as f64);
            adam_apply_tree(&mut tree, &mut adam, &grads)?;
        }
        let n = order.len() as f64;
        log.push(EpochStats {
            epoch,
            mean_j: sum_j / n,
            mean_cls: sum_cls / n,
            mean_reg: sum_reg / n,
        });
    }

    Ok((
        AbsoluteModel {
            tree,
            partition: group_partition,
            feature_dim: d,
        },
        log,
    ))
}

/// Decodes an absolute score directly from the tree output.
pub fn absolute_predict(model: &AbsoluteModel, sample: &Sample) -> Result<(f64, usize)> {
    let (out, _) = model.tree.forward(&sample.feature)?;
    decode_delta(&out, &model.partition)
}
