//! Score-difference groups: quantile (equal-frequency) or uniform partition
//! of the delta range, group lookup, and training-pair labels.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, ExemplarPolicy};
use crate::error::{Error, Result};

/// R contiguous score-difference intervals, ordered ascending.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GroupPartition {
    bounds: Vec<(f64, f64)>,
    strategy: PartitionStrategy,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum PartitionStrategy {
    Quantile,
    Uniform,
}

/// Classification/regression targets for one training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLabel {
    /// 1-based group index in [1, R].
    pub group_index: usize,
    /// Normalized in-group position, clamped to [0, 1].
    pub sigma: f64,
    /// One-hot vector of length R with a single 1 at group_index.
    pub onehot: Vec<f64>,
}

fn check_power_of_two(r: usize) -> Result<()> {
    if r < 2 || !r.is_power_of_two() {
        return Err(Error::Config(format!(
            "group count must be a power of two >= 2, got {r}"
        )));
    }
    Ok(())
}

impl GroupPartition {
    pub fn r_count(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn strategy(&self) -> PartitionStrategy {
        self.strategy
    }

    /// Full delta range covered by the partition.
    pub fn range(&self) -> (f64, f64) {
        (self.bounds[0].0, self.bounds[self.bounds.len() - 1].1)
    }

    pub fn from_parts(bounds: Vec<(f64, f64)>, strategy: PartitionStrategy) -> Result<Self> {
        check_power_of_two(bounds.len())?;
        for w in bounds.windows(2) {
            if w[0].1 != w[1].0 {
                return Err(Error::Data("partition bounds are not contiguous".into()));
            }
        }
        for &(l, r) in &bounds {
            if !(l < r) {
                return Err(Error::DegeneratePartition { value: l });
            }
        }
        Ok(GroupPartition { bounds, strategy })
    }
}

/// All ordered pairwise score differences s_m - s_n between policy-compatible
/// samples, sorted ascending.
pub fn collect_deltas(train: &Dataset, policy: &ExemplarPolicy) -> Result<Vec<f64>> {
    policy.validate()?;
    let samples = train.samples();
    let mut deltas = Vec::new();
    for input in samples {
        for exemplar in samples {
            if policy.eligible(input, exemplar) {
                deltas.push(input.score - exemplar.score);
            }
        }
    }
    if deltas.len() < 2 {
        return Err(Error::Data(format!(
            "need at least 2 policy-eligible pairs to collect deltas, got {}",
            deltas.len()
        )));
    }
    deltas.sort_by(|a, b| a.total_cmp(b));
    Ok(deltas)
}

/// Equal-frequency partition: group bounds at the floor((T-1) r / R)-th
/// elements of the sorted delta list.
pub fn build_quantile(deltas: &[f64], r_count: usize) -> Result<GroupPartition> {
    check_power_of_two(r_count)?;
    let t = deltas.len();
    if t < 2 {
        return Err(Error::Data("delta list must contain at least 2 values".into()));
    }
    let at = |r: usize| deltas[(t - 1) * r / r_count];
    let mut bounds = Vec::with_capacity(r_count);
    for r in 1..=r_count {
        let left = at(r - 1);
        let right = at(r);
        if !(left < right) {
            return Err(Error::DegeneratePartition { value: left });
        }
        bounds.push((left, right));
    }
    Ok(GroupPartition {
        bounds,
        strategy: PartitionStrategy::Quantile,
    })
}

/// R equal-width contiguous intervals covering [min, max].
pub fn build_uniform(min: f64, max: f64, r_count: usize) -> Result<GroupPartition> {
    check_power_of_two(r_count)?;
    if !(min < max) {
        return Err(Error::Data(format!(
            "uniform partition needs min < max, got [{min}, {max}]"
        )));
    }
    let width = (max - min) / r_count as f64;
    let edge = |i: usize| {
        if i == r_count {
            max
        } else {
            min + width * i as f64
        }
    };
    let bounds = (0..r_count).map(|i| (edge(i), edge(i + 1))).collect();
    Ok(GroupPartition {
        bounds,
        strategy: PartitionStrategy::Uniform,
    })
}

/// 1-based index of the group containing `delta`. Groups are half-open
/// [left, right) with the last group right-closed; out-of-range deltas clamp
/// to the outermost groups.
pub fn locate(p: &GroupPartition, delta: f64) -> usize {
    let r = p.r_count();
    for (i, &(_, right)) in p.bounds.iter().enumerate().take(r - 1) {
        if delta < right {
            return i + 1;
        }
    }
    r
}

/// Classification one-hot and normalized regression target for a delta.
pub fn make_label(p: &GroupPartition, delta: f64) -> PairLabel {
    let group_index = locate(p, delta);
    let (left, right) = p.bounds[group_index - 1];
    let width = right - left;
    let sigma = if width > 0.0 {
        ((delta - left) / width).clamp(0.0, 1.0)
    } else {
        0.5
    };
    let mut onehot = vec![0.0; p.r_count()];
    onehot[group_index - 1] = 1.0;
    PairLabel {
        group_index,
        sigma,
        onehot,
    }
}
