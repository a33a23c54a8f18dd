//! Contrastive score regression for quality assessment: train a soft binary
//! regression tree on score differences between attribute-matched sample
//! pairs, infer by multi-exemplar voting, and evaluate with rank-correlation
//! and relative-L2 metrics.

pub mod dataset;
pub mod error;
pub mod metrics;
pub mod neural;
pub mod partition;
pub mod pipeline;
pub mod tree;

pub use dataset::{Dataset, ExemplarPolicy, Sample, SplitMode, SynthConfig};
pub use error::{Error, Result};
pub use metrics::EvalReport;
pub use partition::{GroupPartition, PairLabel, PartitionStrategy};
pub use pipeline::{BaselineModel, Prediction, TrainConfig, TrainedModel};
pub use tree::{TreeConfig, TreeModel, TreeOutput};
