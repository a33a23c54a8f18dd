//! Model checkpoints: one JSON document whose floats are hexadecimal float
//! literals, so parameters round-trip bit-exactly while staying readable.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use pairscore::neural::{Activation, AffineLayer, MlpBlock};
use pairscore::partition::PartitionStrategy;
use pairscore::tree::TreeModel;
use pairscore::{Error, GroupPartition, Result, TrainedModel, TreeConfig};

pub const FORMAT_VERSION: u32 = 1;

/// Canonical hexadecimal float literal for a finite f64, always 13 mantissa
/// hex digits (e.g. "0x1.921fb54442d18p+1").
pub fn f64_to_hex(v: f64) -> Result<String> {
    if !v.is_finite() {
        return Err(Error::Numeric(format!("cannot serialize non-finite value {v}")));
    }
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & 0x000f_ffff_ffff_ffff;
    Ok(if biased == 0 {
        if frac == 0 {
            format!("{sign}0x0.0000000000000p+0")
        } else {
            format!("{sign}0x0.{frac:013x}p-1022")
        }
    } else {
        format!("{sign}0x1.{frac:013x}p{:+}", biased - 1023)
    })
}

/// Parses the canonical form emitted by [`f64_to_hex`].
pub fn f64_from_hex(s: &str) -> Result<f64> {
    let bad = || Error::Numeric(format!("malformed hex float literal '{s}'"));
    let (neg, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let rest = rest.strip_prefix("0x").ok_or_else(bad)?;
    let (lead, rest) = rest.split_at(1);
    let rest = rest.strip_prefix('.').ok_or_else(bad)?;
    let (digits, exp_str) = rest.split_once('p').ok_or_else(bad)?;
    if digits.len() != 13 {
        return Err(bad());
    }
    let frac = u64::from_str_radix(digits, 16).map_err(|_| bad())?;
    let exp: i64 = exp_str.parse().map_err(|_| bad())?;
    let magnitude = match lead {
        "0" if exp == 0 && frac == 0 => 0u64,
        "0" if exp == -1022 && frac != 0 => frac,
        "1" => {
            let biased = exp + 1023;
            if !(1..=2046).contains(&biased) {
                return Err(bad());
            }
            ((biased as u64) << 52) | frac
        }
        _ => return Err(bad()),
    };
    Ok(f64::from_bits(magnitude | if neg { 1u64 << 63 } else { 0 }))
}

fn hex_vec(v: &[f64]) -> Result<Vec<String>> {
    v.iter().map(|&x| f64_to_hex(x)).collect()
}

fn unhex_vec(v: &[String]) -> Result<Vec<f64>> {
    v.iter().map(|s| f64_from_hex(s)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerSpec {
    activation: Activation,
    rows: usize,
    cols: usize,
    /// Row-major weight entries, rows * cols literals.
    weight: Vec<String>,
    bias: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockSpec {
    name: String,
    layers: Vec<LayerSpec>,
}

fn block_to_spec(name: &str, block: &MlpBlock) -> Result<BlockSpec> {
    let mut layers = Vec::with_capacity(block.layers.len());
    for (affine, act) in &block.layers {
        let rows = affine.out_dim();
        let cols = affine.in_dim();
        let mut weight = Vec::with_capacity(rows * cols);
        for row in &affine.weight {
            weight.extend(hex_vec(row)?);
        }
        layers.push(LayerSpec {
            activation: *act,
            rows,
            cols,
            weight,
            bias: hex_vec(&affine.bias)?,
        });
    }
    Ok(BlockSpec {
        name: name.to_string(),
        layers,
    })
}

fn block_from_spec(spec: &BlockSpec) -> Result<MlpBlock> {
    let mut layers = Vec::with_capacity(spec.layers.len());
    for l in &spec.layers {
        if l.weight.len() != l.rows * l.cols || l.bias.len() != l.rows {
            return Err(Error::Data(format!(
                "block {}: weight/bias lengths disagree with declared shape {}x{}",
                spec.name, l.rows, l.cols
            )));
        }
        let flat = unhex_vec(&l.weight)?;
        let weight = flat.chunks(l.cols).map(|c| c.to_vec()).collect();
        layers.push((
            AffineLayer {
                weight,
                bias: unhex_vec(&l.bias)?,
            },
            l.activation,
        ));
    }
    Ok(MlpBlock { layers })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub tree_config: TreeConfig,
    pub partition_strategy: PartitionStrategy,
    pub partition_bounds: Vec<(String, String)>,
    pub epsilon: BTreeMap<String, String>,
    pub feature_dim: usize,
    pub seed: u64,
    /// SHA-256 of the canonical training-config JSON.
    pub config_digest: String,
    /// root, then internal nodes in heap order, then leaves left to right.
    pub blocks: Vec<BlockSpec>,
    pub adapter: Option<BlockSpec>,
}

impl Checkpoint {
    pub fn from_model(model: &TrainedModel, seed: u64, config_digest: &str) -> Result<Self> {
        let mut blocks = vec![block_to_spec("root", &model.tree.root)?];
        for (i, n) in model.tree.nodes.iter().enumerate() {
            blocks.push(block_to_spec(&format!("node{i:02}"), n)?);
        }
        for (i, l) in model.tree.leaves.iter().enumerate() {
            blocks.push(block_to_spec(&format!("leaf{i:02}"), l)?);
        }
        let partition_bounds = model
            .partition
            .bounds()
            .iter()
            .map(|&(l, r)| Ok((f64_to_hex(l)?, f64_to_hex(r)?)))
            .collect::<Result<Vec<_>>>()?;
        let epsilon = model
            .epsilon
            .iter()
            .map(|(k, &v)| Ok((k.clone(), f64_to_hex(v)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(Checkpoint {
            format_version: FORMAT_VERSION,
            tree_config: model.tree.config.clone(),
            partition_strategy: model.partition.strategy(),
            partition_bounds,
            epsilon,
            feature_dim: model.feature_dim,
            seed,
            config_digest: config_digest.to_string(),
            blocks,
            adapter: model
                .adapter
                .as_ref()
                .map(|a| block_to_spec("adapter", a))
                .transpose()?,
        })
    }

    pub fn to_model(&self) -> Result<TrainedModel> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Data(format!(
                "unsupported checkpoint format version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.tree_config.validate()?;
        let internal = self.tree_config.internal_count();
        let leaves = self.tree_config.leaf_count();
        if self.blocks.len() != 1 + internal + leaves {
            return Err(Error::Data(format!(
                "checkpoint holds {} blocks, expected {}",
                self.blocks.len(),
                1 + internal + leaves
            )));
        }
        let root = block_from_spec(&self.blocks[0])?;
        let nodes = self.blocks[1..1 + internal]
            .iter()
            .map(block_from_spec)
            .collect::<Result<Vec<_>>>()?;
        let leaf_blocks = self.blocks[1 + internal..]
            .iter()
            .map(block_from_spec)
            .collect::<Result<Vec<_>>>()?;
        let bounds = self
            .partition_bounds
            .iter()
            .map(|(l, r)| Ok((f64_from_hex(l)?, f64_from_hex(r)?)))
            .collect::<Result<Vec<_>>>()?;
        let partition = GroupPartition::from_parts(bounds, self.partition_strategy)?;
        let epsilon = self
            .epsilon
            .iter()
            .map(|(k, v)| Ok((k.clone(), f64_from_hex(v)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(TrainedModel {
            tree: TreeModel {
                config: self.tree_config.clone(),
                root,
                nodes,
                leaves: leaf_blocks,
            },
            partition,
            epsilon,
            adapter: self.adapter.as_ref().map(block_from_spec).transpose()?,
            feature_dim: self.feature_dim,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Data(format!("checkpoint serialization failed: {e}")))?;
        text.push('\n');
        fs::write(path, text)
            .map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("invalid checkpoint {}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_roundtrip_special_values() {
        for v in [
            0.0,
            -0.0,
            1.0,
            -1.0,
            std::f64::consts::PI,
            f64::MIN_POSITIVE,
            f64::MIN_POSITIVE / 8.0, // subnormal
            f64::MAX,
            -1e-300,
        ] {
            let s = f64_to_hex(v).unwrap();
            let back = f64_from_hex(&s).unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{v} via {s}");
        }
    }

    #[test]
    fn hex_canonical_examples() {
        assert_eq!(f64_to_hex(1.0).unwrap(), "0x1.0000000000000p+0");
        assert_eq!(f64_to_hex(-2.5).unwrap(), "-0x1.4000000000000p+1");
        assert_eq!(f64_from_hex("0x1.8000000000000p+1").unwrap(), 3.0);
    }

    #[test]
    fn hex_rejects_noncanonical() {
        for s in ["1.5", "0x1.0p+0", "0x2.0000000000000p+0", "0x1.0000000000000", ""] {
            assert!(f64_from_hex(s).is_err(), "{s}");
        }
    }

    #[test]
    fn hex_rejects_non_finite() {
        assert!(f64_to_hex(f64::NAN).is_err());
        assert!(f64_to_hex(f64::INFINITY).is_err());
    }

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_model() -> TrainedModel {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let config = TreeConfig {
            depth: 2,
            node_feature_dim: 3,
            input_dim: 5,
        };
        let tree = TreeModel::init(config, &mut rng).unwrap();
        let partition = GroupPartition::from_parts(
            vec![(-2.0, -1.0), (-1.0, 0.5), (0.5, 1.0), (1.0, 2.0)],
            PartitionStrategy::Quantile,
        )
        .unwrap();
        TrainedModel {
            tree,
            partition,
            epsilon: [("a".to_string(), 110.0)].into(),
            adapter: None,
            feature_dim: 2,
        }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let model = small_model();
        let ck = Checkpoint::from_model(&model, 9, "digest").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("ck.json");
        ck.save(&p1).unwrap();
        let loaded = Checkpoint::load(&p1).unwrap();
        let p2 = dir.path().join("ck2.json");
        loaded.save(&p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn reconstructed_model_forwards_identically() {
        let model = small_model();
        let ck = Checkpoint::from_model(&model, 9, "digest").unwrap();
        let back = ck.to_model().unwrap();
        let x = vec![0.1, -0.2, 0.3, 0.4, 0.5];
        let (a, _) = model.tree.forward(&x).unwrap();
        let (b, _) = back.tree.forward(&x).unwrap();
        assert_eq!(a.leaf_probs, b.leaf_probs);
        assert_eq!(a.leaf_regressions, b.leaf_regressions);
        assert_eq!(back.partition.bounds(), model.partition.bounds());
        assert_eq!(back.epsilon, model.epsilon);
    }

    #[test]
    fn wrong_format_version_is_rejected() {
        let mut ck = Checkpoint::from_model(&small_model(), 9, "digest").unwrap();
        ck.format_version = FORMAT_VERSION + 1;
        assert!(ck.to_model().is_err());
    }
}
