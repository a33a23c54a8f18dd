//! Group-aware regression tree: a complete binary tree whose internal nodes
//! softly route a pair feature to one of 2^d leaf groups and whose leaf heads
//! regress a normalized in-group position.
//!
//! Internal nodes are stored heap-style (node h has children 2h and 2h+1);
//! leaves map to groups left-to-right in ascending delta order. Each node's
//! sigmoid output is the probability of taking the LEFT branch, so the root
//! split separates "input worse than exemplar" from "input better".

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{sigmoid, Activation, BlockGrads, MlpBlock, Tape};
use crate::partition::{GroupPartition, PairLabel};

/// Probabilities inside BCE logs are clamped to [EPS_P, 1 - EPS_P]; path
/// products can saturate to exact 0/1.
pub const EPS_P: f64 = 1e-7;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TreeConfig {
    /// Number of binary-decision layers; the tree has 2^depth leaves.
    pub depth: usize,
    pub node_feature_dim: usize,
    pub input_dim: usize,
}

impl TreeConfig {
    pub fn leaf_count(&self) -> usize {
        1 << self.depth
    }

    pub fn internal_count(&self) -> usize {
        (1 << self.depth) - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.node_feature_dim == 0 || self.input_dim == 0 {
            return Err(Error::Config("tree dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Node MLPs plus per-leaf regression heads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeModel {
    pub config: TreeConfig,
    /// input_dim -> node_feature_dim, initializes the root feature.
    pub root: MlpBlock,
    /// Internal nodes in breadth-first order (heap index h at nodes[h-1]);
    /// each maps node_feature_dim -> node_feature_dim + 1 (feature, logit).
    pub nodes: Vec<MlpBlock>,
    /// Leaf heads left-to-right; affine + sigmoid on the parent feature.
    pub leaves: Vec<MlpBlock>,
}

#[derive(Debug, Clone)]
pub struct TreeOutput {
    /// P_r, r = 0..R-1: product of branch probabilities along each path.
    pub leaf_probs: Vec<f64>,
    /// sigma_hat_r in [0,1] per leaf.
    pub leaf_regressions: Vec<f64>,
    /// Marginal probability of reaching each node slot, one vector per
    /// decision layer (layer l has 2^(l+1) entries; the last is leaf_probs).
    pub layer_node_probs: Vec<Vec<f64>>,
}

pub struct TreeTape {
    root_tape: Tape,
    node_tapes: Vec<Tape>,
    leaf_tapes: Vec<Tape>,
    /// sigmoid branch probability per internal node, heap order.
    node_probs: Vec<f64>,
    /// Probability of reaching each heap slot (index 1..2^(d+1)-1).
    reach: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TreeGrads {
    pub root: BlockGrads,
    pub nodes: Vec<BlockGrads>,
    pub leaves: Vec<BlockGrads>,
}

impl TreeGrads {
    pub fn zeros_like(model: &TreeModel) -> Self {
        TreeGrads {
            root: BlockGrads::zeros_like(&model.root),
            nodes: model.nodes.iter().map(BlockGrads::zeros_like).collect(),
            leaves: model.leaves.iter().map(BlockGrads::zeros_like).collect(),
        }
    }

    pub fn accumulate(&mut self, other: &TreeGrads) {
        self.root.accumulate(&other.root);
        for (a, b) in self.nodes.iter_mut().zip(&other.nodes) {
            a.accumulate(b);
        }
        for (a, b) in self.leaves.iter_mut().zip(&other.leaves) {
            a.accumulate(b);
        }
    }

    pub fn flatten(&self, out: &mut Vec<f64>) {
        self.root.flatten(out);
        for g in &self.nodes {
            g.flatten(out);
        }
        for g in &self.leaves {
            g.flatten(out);
        }
    }
}

impl TreeModel {
    pub fn init<R: Rng>(config: TreeConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let nd = config.node_feature_dim;
        let root = MlpBlock::init(
            &[config.input_dim, nd, nd],
            &[Activation::Relu, Activation::Linear],
            rng,
        );
        let nodes = (0..config.internal_count())
            .map(|_| {
                MlpBlock::init(
                    &[nd, nd, nd + 1],
                    &[Activation::Relu, Activation::Linear],
                    rng,
                )
            })
            .collect();
        let leaves = (0..config.leaf_count())
            .map(|_| MlpBlock::init(&[nd, 1], &[Activation::Sigmoid], rng))
            .collect();
        Ok(TreeModel {
            config,
            root,
            nodes,
            leaves,
        })
    }

    pub fn forward(&self, f_pair: &[f64]) -> Result<(TreeOutput, TreeTape)> {
        if f_pair.len() != self.config.input_dim {
            return Err(Error::Dimension {
                expected: self.config.input_dim,
                got: f_pair.len(),
            });
        }
        let d = self.config.depth;
        let n_internal = self.config.internal_count();
        let n_leaves = self.config.leaf_count();
        let nd = self.config.node_feature_dim;

        let (root_feat, root_tape) = self.root.forward(f_pair)?;

        // out_feats[h]: updated feature emitted by internal node h.
        let mut out_feats: Vec<Vec<f64>> = vec![Vec::new(); n_internal + 1];
        let mut node_tapes = Vec::with_capacity(n_internal);
        let mut node_probs = vec![0.0; n_internal + 1];
        let mut reach = vec![0.0; 2 * n_leaves];
        reach[1] = 1.0;

        for h in 1..=n_internal {
            let parent_feat = if h == 1 { &root_feat } else { &out_feats[h / 2] };
            let (out, tape) = self.nodes[h - 1].forward(parent_feat)?;
            let p = sigmoid(out[nd]);
            node_probs[h] = p;
            reach[2 * h] = reach[h] * p;
            reach[2 * h + 1] = reach[h] * (1.0 - p);
            out_feats[h] = out[..nd].to_vec();
            node_tapes.push(tape);
        }

        let mut leaf_regressions = Vec::with_capacity(n_leaves);
        let mut leaf_tapes = Vec::with_capacity(n_leaves);
        for r in 0..n_leaves {
            let parent = (n_leaves + r) / 2;
            let (out, tape) = self.leaves[r].forward(&out_feats[parent])?;
            leaf_regressions.push(out[0]);
            leaf_tapes.push(tape);
        }

        let leaf_probs: Vec<f64> = (0..n_leaves).map(|r| reach[n_leaves + r]).collect();
        let layer_node_probs = (1..=d)
            .map(|l| {
                let base = 1 << l;
                (0..base).map(|i| reach[base + i]).collect()
            })
            .collect();

        Ok((
            TreeOutput {
                leaf_probs,
                leaf_regressions,
                layer_node_probs,
            },
            TreeTape {
                root_tape,
                node_tapes,
                leaf_tapes,
                node_probs,
                reach,
            },
        ))
    }

    /// Exact gradients of a loss with upstream gradients `d_leaf_probs` and
    /// `d_leaf_regressions`, flowing through the path products and the shared
    /// node features. Also returns the gradient w.r.t. the pair feature.
    pub fn backward(
        &self,
        tape: &TreeTape,
        d_leaf_probs: &[f64],
        d_leaf_regressions: &[f64],
    ) -> Result<(Vec<f64>, TreeGrads)> {
        let n_internal = self.config.internal_count();
        let n_leaves = self.config.leaf_count();
        let nd = self.config.node_feature_dim;
        if d_leaf_probs.len() != n_leaves || d_leaf_regressions.len() != n_leaves {
            return Err(Error::Dimension {
                expected: n_leaves,
                got: d_leaf_probs.len().min(d_leaf_regressions.len()),
            });
        }

        let mut grads = TreeGrads::zeros_like(self);
        // Accumulated loss gradient w.r.t. each internal node's output feature.
        let mut d_feat: Vec<Vec<f64>> = vec![vec![0.0; nd]; n_internal + 1];

        // Leaf heads first; they feed gradient into their parent's feature.
        for r in 0..n_leaves {
            let (dparent, g) = self.leaves[r].backward(&tape.leaf_tapes[r], &[d_leaf_regressions[r]])?;
            grads.leaves[r] = g;
            let parent = (n_leaves + r) / 2;
            for (a, b) in d_feat[parent].iter_mut().zip(&dparent) {
                *a += b;
            }
        }

        // Subtree sums: S[h] = sum over leaves under h of dP_r * (product of
        // branch probs strictly below h). dJ/dp_h = reach[h]*(S[2h]-S[2h+1]).
        let mut subtree = vec![0.0; 2 * n_leaves];
        for r in 0..n_leaves {
            subtree[n_leaves + r] = d_leaf_probs[r];
        }
        for h in (1..=n_internal).rev() {
            let p = tape.node_probs[h];
            subtree[h] = p * subtree[2 * h] + (1.0 - p) * subtree[2 * h + 1];
        }

        let mut d_root_feat = vec![0.0; nd];
        for h in (1..=n_internal).rev() {
            let p = tape.node_probs[h];
            let d_p = tape.reach[h] * (subtree[2 * h] - subtree[2 * h + 1]);
            let d_logit = d_p * p * (1.0 - p);
            let mut dy = d_feat[h].clone();
            dy.push(d_logit);
            let (dx, g) = self.nodes[h - 1].backward(&tape.node_tapes[h - 1], &dy)?;
            grads.nodes[h - 1] = g;
            if h == 1 {
                for (a, b) in d_root_feat.iter_mut().zip(&dx) {
                    *a += b;
                }
            } else {
                for (a, b) in d_feat[h / 2].iter_mut().zip(&dx) {
                    *a += b;
                }
            }
        }

        let (d_input, root_grads) = self.root.backward(&tape.root_tape, &d_root_feat)?;
        grads.root = root_grads;
        Ok((d_input, grads))
    }

    // Flat parameter order: root, internal nodes breadth-first, leaves
    // left-to-right. The checkpoint format relies on this ordering.

    pub fn param_count(&self) -> usize {
        self.root.param_count()
            + self.nodes.iter().map(MlpBlock::param_count).sum::<usize>()
            + self.leaves.iter().map(MlpBlock::param_count).sum::<usize>()
    }

    pub fn flatten_params(&self, out: &mut Vec<f64>) {
        self.root.flatten_params(out);
        for n in &self.nodes {
            n.flatten_params(out);
        }
        for l in &self.leaves {
            l.flatten_params(out);
        }
    }

    pub fn assign_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut offset = self.root.assign_params(flat, 0);
        for n in &mut self.nodes {
            offset = n.assign_params(flat, offset);
        }
        for l in &mut self.leaves {
            offset = l.assign_params(flat, offset);
        }
        Ok(())
    }
}

/// Loss value together with the upstream gradients tree_backward expects.
#[derive(Debug, Clone)]
pub struct TreeLoss {
    pub total: f64,
    pub cls: f64,
    pub reg: f64,
    pub d_leaf_probs: Vec<f64>,
    pub d_leaf_regressions: Vec<f64>,
}

/// Binary cross-entropy over leaf probabilities plus squared error on the
/// ground-truth leaf's regression output.
pub fn tree_loss(out: &TreeOutput, label: &PairLabel) -> Result<TreeLoss> {
    let r_count = out.leaf_probs.len();
    if label.onehot.len() != r_count {
        return Err(Error::Dimension {
            expected: r_count,
            got: label.onehot.len(),
        });
    }
    let ones = label.onehot.iter().filter(|&&v| v == 1.0).count();
    if ones != 1 || label.onehot.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Data("label is not one-hot".into()));
    }

    let mut cls = 0.0;
    let mut d_leaf_probs = vec![0.0; r_count];
    for r in 0..r_count {
        let p = out.leaf_probs[r];
        let pc = p.clamp(EPS_P, 1.0 - EPS_P);
        let l = label.onehot[r];
        cls -= l * pc.ln() + (1.0 - l) * (1.0 - pc).ln();
        // Clamped region is locally flat; gradient zero there.
        if p > EPS_P && p < 1.0 - EPS_P {
            d_leaf_probs[r] = -l / pc + (1.0 - l) / (1.0 - pc);
        }
    }

    let i = label.group_index - 1;
    let diff = out.leaf_regressions[i] - label.sigma;
    let reg = diff * diff;
    let mut d_leaf_regressions = vec![0.0; r_count];
    d_leaf_regressions[i] = 2.0 * diff;

    Ok(TreeLoss {
        total: cls + reg,
        cls,
        reg,
        d_leaf_probs,
        d_leaf_regressions,
    })
}

/// Decoded score difference: pick the highest-probability leaf (ties toward
/// the lower index) and map its regression output into that group's interval.
pub fn decode_delta(out: &TreeOutput, p: &GroupPartition) -> Result<(f64, usize)> {
    if p.r_count() != out.leaf_probs.len() {
        return Err(Error::Dimension {
            expected: p.r_count(),
            got: out.leaf_probs.len(),
        });
    }
    let mut best = 0usize;
    for (r, &prob) in out.leaf_probs.iter().enumerate() {
        if prob > out.leaf_probs[best] {
            best = r;
        }
    }
    let (left, right) = p.bounds()[best];
    let delta = out.leaf_regressions[best] * (right - left) + left;
    Ok((delta, best + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::PartitionStrategy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(depth: usize, nd: usize, input: usize) -> TreeConfig {
        TreeConfig {
            depth,
            node_feature_dim: nd,
            input_dim: input,
        }
    }

    /// Overwrites every internal node's logit row so its branch probability
    /// becomes sigmoid(logit_bias) regardless of the feature.
    fn pin_logits(model: &mut TreeModel, logit_bias: f64) {
        let nd = model.config.node_feature_dim;
        for node in &mut model.nodes {
            let (last, _) = node.layers.last_mut().unwrap();
            for v in &mut last.weight[nd] {
                *v = 0.0;
            }
            last.bias[nd] = logit_bias;
        }
    }

    #[test]
    fn single_split_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut model = TreeModel::init(cfg(1, 4, 3), &mut rng).unwrap();
        // sigmoid(ln(0.7/0.3)) = 0.7
        pin_logits(&mut model, (0.7f64 / 0.3).ln());
        let (out, _) = model.forward(&[0.1, 0.2, 0.3]).unwrap();
        assert!((out.leaf_probs[0] - 0.7).abs() < 1e-12);
        assert!((out.leaf_probs[1] - 0.3).abs() < 1e-12);
        assert!((out.leaf_probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_splits_give_uniform_leaves() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = TreeModel::init(cfg(2, 4, 3), &mut rng).unwrap();
        pin_logits(&mut model, 0.0);
        let (out, _) = model.forward(&[1.0, -1.0, 0.5]).unwrap();
        for &p in &out.leaf_probs {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    /// Independent oracle: recompute each leaf probability by walking its
    /// root-to-leaf path explicitly from the per-node branch probabilities.
    fn path_product_oracle(node_probs: &[f64], depth: usize) -> Vec<f64> {
        let leaves = 1 << depth;
        (0..leaves)
            .map(|r| {
                let mut h = 1usize;
                let mut p = 1.0;
                for layer in 0..depth {
                    let go_left = (r >> (depth - 1 - layer)) & 1 == 0;
                    p *= if go_left {
                        node_probs[h]
                    } else {
                        1.0 - node_probs[h]
                    };
                    h = 2 * h + usize::from(!go_left);
                }
                p
            })
            .collect()
    }

    #[test]
    fn leaf_probs_match_explicit_path_enumeration() {
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = TreeModel::init(cfg(3, 6, 5), &mut rng).unwrap();
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (out, tape) = model.forward(&x).unwrap();
            let oracle = path_product_oracle(&tape.node_probs, 3);
            for (a, b) in out.leaf_probs.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12);
            }
            let sum: f64 = out.leaf_probs.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    fn onehot_label(r_count: usize, index: usize, sigma: f64) -> PairLabel {
        let mut onehot = vec![0.0; r_count];
        onehot[index - 1] = 1.0;
        PairLabel {
            group_index: index,
            sigma,
            onehot,
        }
    }

    #[test]
    fn loss_at_uniform_probabilities() {
        let out = TreeOutput {
            leaf_probs: vec![0.5, 0.5],
            leaf_regressions: vec![0.3, 0.9],
            layer_node_probs: vec![],
        };
        let label = onehot_label(2, 1, 0.3);
        let loss = tree_loss(&out, &label).unwrap();
        assert!((loss.cls - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!(loss.reg.abs() < 1e-12);
    }

    #[test]
    fn loss_regression_term() {
        let out = TreeOutput {
            leaf_probs: vec![1.0 - 1e-9, 1e-9],
            leaf_regressions: vec![0.0, 0.0],
            layer_node_probs: vec![],
        };
        let label = onehot_label(2, 1, 1.0);
        let loss = tree_loss(&out, &label).unwrap();
        assert!((loss.reg - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_near_zero_for_perfect_prediction() {
        let out = TreeOutput {
            leaf_probs: vec![1.0, 0.0],
            leaf_regressions: vec![0.4, 0.0],
            layer_node_probs: vec![],
        };
        let label = onehot_label(2, 1, 0.4);
        let loss = tree_loss(&out, &label).unwrap();
        assert!(loss.total < 1e-5, "J = {}", loss.total);
    }

    #[test]
    fn loss_rejects_bad_onehot() {
        let out = TreeOutput {
            leaf_probs: vec![0.5, 0.5],
            leaf_regressions: vec![0.0, 0.0],
            layer_node_probs: vec![],
        };
        let label = PairLabel {
            group_index: 1,
            sigma: 0.0,
            onehot: vec![1.0, 1.0],
        };
        assert!(tree_loss(&out, &label).is_err());
    }

    fn partition2(bounds: Vec<(f64, f64)>) -> GroupPartition {
        GroupPartition::from_parts(bounds, PartitionStrategy::Uniform).unwrap()
    }

    #[test]
    fn decode_interpolates_selected_group() {
        let p = partition2(vec![(-2.0, 2.0), (2.0, 6.0)]);
        let out = TreeOutput {
            leaf_probs: vec![0.1, 0.9],
            leaf_regressions: vec![0.0, 0.25],
            layer_node_probs: vec![],
        };
        let (delta, r) = decode_delta(&out, &p).unwrap();
        assert_eq!(r, 2);
        assert!((delta - 3.0).abs() < 1e-12);
    }

    #[test]
    fn decode_endpoint_at_zero_sigma() {
        let p = partition2(vec![(-2.0, 2.0), (2.0, 6.0)]);
        let out = TreeOutput {
            leaf_probs: vec![0.9, 0.1],
            leaf_regressions: vec![0.0, 0.0],
            layer_node_probs: vec![],
        };
        let (delta, r) = decode_delta(&out, &p).unwrap();
        assert_eq!(r, 1);
        assert_eq!(delta, -2.0);
    }

    #[test]
    fn decode_tie_breaks_to_lower_index() {
        let p = partition2(vec![(0.0, 1.0), (1.0, 2.0)]);
        let out = TreeOutput {
            leaf_probs: vec![0.5, 0.5],
            leaf_regressions: vec![0.5, 0.5],
            layer_node_probs: vec![],
        };
        let (_, r) = decode_delta(&out, &p).unwrap();
        assert_eq!(r, 1);
    }

    /// Finite-difference oracle over all tree parameters for the joint loss.
    fn tree_fd_check(depth: usize, seed: u64) -> f64 {
        let config = cfg(depth, 6, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = TreeModel::init(config.clone(), &mut rng).unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let label = onehot_label(config.leaf_count(), 1 + (seed as usize % config.leaf_count()), 0.3);

        let (out, tape) = model.forward(&x).unwrap();
        let loss = tree_loss(&out, &label).unwrap();
        let (_, grads) = model
            .backward(&tape, &loss.d_leaf_probs, &loss.d_leaf_regressions)
            .unwrap();
        let mut analytic = Vec::new();
        grads.flatten(&mut analytic);

        let mut flat = Vec::new();
        model.flatten_params(&mut flat);
        let mut probe = model.clone();
        let step = 1e-5;
        let mut max_err = 0.0f64;
        for i in 0..flat.len() {
            let orig = flat[i];
            flat[i] = orig + step;
            probe.assign_params(&flat).unwrap();
            let (o, _) = probe.forward(&x).unwrap();
            let plus = tree_loss(&o, &label).unwrap().total;
            flat[i] = orig - step;
            probe.assign_params(&flat).unwrap();
            let (o, _) = probe.forward(&x).unwrap();
            let minus = tree_loss(&o, &label).unwrap().total;
            flat[i] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            max_err = max_err.max(crate::neural::relative_error(analytic[i], numeric));
        }
        max_err
    }

    #[test]
    fn gradients_match_finite_differences_d2() {
        let err = tree_fd_check(2, 11);
        assert!(err < 1e-4, "d=2 gradient error {err}");
    }

    #[test]
    fn non_true_leaf_heads_get_no_regression_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = TreeModel::init(cfg(2, 4, 3), &mut rng).unwrap();
        let (out, tape) = model.forward(&[0.3, -0.2, 0.9]).unwrap();
        // Regression-only upstream: zero classification gradient.
        let d_probs = vec![0.0; 4];
        let mut d_sigma = vec![0.0; 4];
        let true_leaf = 2usize;
        d_sigma[true_leaf] = 2.0 * (out.leaf_regressions[true_leaf] - 0.1);
        let (_, grads) = model.backward(&tape, &d_probs, &d_sigma).unwrap();
        for (r, g) in grads.leaves.iter().enumerate() {
            let total: f64 = g.layers[0].0.iter().flatten().map(|v| v.abs()).sum::<f64>()
                + g.layers[0].1.iter().map(|v| v.abs()).sum::<f64>();
            if r == true_leaf {
                assert!(total > 0.0);
            } else {
                assert_eq!(total, 0.0, "leaf {r} got spurious gradient");
            }
        }
    }

    #[test]
    fn identical_siblings_receive_symmetric_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut model = TreeModel::init(cfg(2, 4, 3), &mut rng).unwrap();
        // Make both depth-2 nodes and all leaf heads identical, with logits
        // pinned to zero so every branch probability is exactly 0.5.
        model.nodes[2] = model.nodes[1].clone();
        let leaf0 = model.leaves[0].clone();
        for l in &mut model.leaves {
            *l = leaf0.clone();
        }
        pin_logits(&mut model, 0.0);
        let (out, tape) = model.forward(&[0.4, 0.1, -0.3]).unwrap();
        assert_eq!(out.leaf_probs, vec![0.25; 4]);
        // Symmetric upstream: uniform over leaves.
        let d_probs = vec![1.0; 4];
        let d_sigma = vec![0.5; 4];
        let (_, grads) = model.backward(&tape, &d_probs, &d_sigma).unwrap();
        assert_eq!(grads.leaves[0].layers, grads.leaves[3].layers);
        assert_eq!(grads.leaves[1].layers, grads.leaves[2].layers);
        assert_eq!(grads.nodes[1].layers, grads.nodes[2].layers);
    }
}
