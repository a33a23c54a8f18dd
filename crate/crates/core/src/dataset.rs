//! Sample storage, JSONL ingestion, synthetic generation with a known score
//! oracle, exemplar selection and train/test splitting.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One action instance: a pooled clip feature plus its judged quality score.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Sample {
    pub id: String,
    pub category: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<f64>,
    pub score: f64,
    pub feature: Vec<f64>,
}

/// Immutable collection of samples with a declared feature dimension and
/// per-category score ranges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<Sample>,
    feature_dim: usize,
    score_range: BTreeMap<String, (f64, f64)>,
}

/// How exemplars are matched to an input sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExemplarPolicy {
    pub match_category: bool,
    pub match_difficulty: bool,
    pub random_seed: u64,
}

impl ExemplarPolicy {
    pub fn category_only(seed: u64) -> Self {
        ExemplarPolicy {
            match_category: true,
            match_difficulty: false,
            random_seed: seed,
        }
    }

    pub fn category_and_difficulty(seed: u64) -> Self {
        ExemplarPolicy {
            match_category: true,
            match_difficulty: true,
            random_seed: seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.match_difficulty && !self.match_category {
            return Err(Error::Config(
                "difficulty matching requires category matching".into(),
            ));
        }
        Ok(())
    }

    /// True when `candidate` may serve as an exemplar for `input`.
    pub fn eligible(&self, input: &Sample, candidate: &Sample) -> bool {
        if candidate.id == input.id {
            return false;
        }
        if self.match_category && candidate.category != input.category {
            return false;
        }
        if self.match_difficulty {
            // DD values are discrete labels; exact equality is intended.
            match (input.difficulty, candidate.difficulty) {
                (Some(a), Some(b)) => a == b,
                _ => false,
            }
        } else {
            true
        }
    }
}

/// Configuration for the deterministic synthetic generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub feature_dim: usize,
    pub latent_dim: usize,
    pub noise_std: f64,
    pub score_range: (f64, f64),
    pub n_categories: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be positive".into()));
        }
        if self.feature_dim == 0 || self.latent_dim == 0 || self.n_categories == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        if self.noise_std < 0.0 {
            return Err(Error::Config("noise_std must be nonnegative".into()));
        }
        if !(self.score_range.0 < self.score_range.1) {
            return Err(Error::Config("score_range must be nondegenerate".into()));
        }
        Ok(())
    }
}

/// Train/test partitioning mode.
#[derive(Debug, Clone, Copy)]
pub enum SplitMode {
    /// Fraction of samples held out for testing, in (0, 1).
    Holdout(f64),
    /// k-fold cross validation, k >= 2.
    KFold(usize),
}

impl Dataset {
    /// Builds a dataset, computing per-category score ranges as (min, max)
    /// over the samples unless `declared_ranges` overrides them.
    pub fn new(
        samples: Vec<Sample>,
        feature_dim: usize,
        declared_ranges: Option<BTreeMap<String, (f64, f64)>>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Data("dataset is empty".into()));
        }
        let mut ranges: BTreeMap<String, (f64, f64)> = BTreeMap::new();
        for (i, s) in samples.iter().enumerate() {
            if s.feature.len() != feature_dim {
                return Err(Error::FeatureDim {
                    line: i + 1,
                    expected: feature_dim,
                    got: s.feature.len(),
                });
            }
            if !s.score.is_finite() {
                return Err(Error::Data(format!("sample {} has non-finite score", s.id)));
            }
            if let Some(dd) = s.difficulty {
                if !(dd > 0.0) {
                    return Err(Error::Data(format!(
                        "sample {} has non-positive difficulty",
                        s.id
                    )));
                }
            }
            let e = ranges
                .entry(s.category.clone())
                .or_insert((s.score, s.score));
            e.0 = e.0.min(s.score);
            e.1 = e.1.max(s.score);
        }
        let score_range = match declared_ranges {
            Some(declared) => {
                for (cat, (lo, hi)) in &ranges {
                    let (dlo, dhi) = declared.get(cat).ok_or_else(|| {
                        Error::Data(format!("declared score_range missing category {cat}"))
                    })?;
                    if lo < dlo || hi > dhi {
                        return Err(Error::Data(format!(
                            "scores for category {cat} fall outside declared range"
                        )));
                    }
                    if !(dlo < dhi) {
                        return Err(Error::Data(format!(
                            "declared range for category {cat} is degenerate"
                        )));
                    }
                }
                declared
            }
            None => {
                for (cat, (lo, hi)) in &ranges {
                    if !(lo < hi) {
                        return Err(Error::Data(format!(
                            "all scores equal for category {cat}; score range is degenerate"
                        )));
                    }
                }
                ranges
            }
        };
        Ok(Dataset {
            samples,
            feature_dim,
            score_range,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn score_range(&self) -> &BTreeMap<String, (f64, f64)> {
        &self.score_range
    }

    pub fn categories(&self) -> Vec<String> {
        self.score_range.keys().cloned().collect()
    }

    /// Dataset restricted to the given sample indices (ranges preserved).
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let samples: Vec<Sample> = indices.iter().map(|&i| self.samples[i].clone()).collect();
        if samples.is_empty() {
            return Err(Error::Data("subset is empty".into()));
        }
        // Keep the parent's declared ranges so train/test agree on epsilon.
        Ok(Dataset {
            samples,
            feature_dim: self.feature_dim,
            score_range: self.score_range.clone(),
        })
    }
}

#[derive(Deserialize)]
struct HeaderRecord {
    feature_dim: usize,
    #[serde(default)]
    score_range: BTreeMap<String, (f64, f64)>,
}

/// Loads a JSON-lines dataset file. An optional first-line header object
/// `{"feature_dim": D, "score_range": {...}}` overrides the inferred values.
pub fn load_jsonl(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    let mut samples = Vec::new();
    let mut header: Option<HeaderRecord> = None;
    let mut feature_dim: Option<usize> = None;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        if idx == 0 && value.get("feature_dim").is_some() && value.get("id").is_none() {
            let h: HeaderRecord = serde_json::from_value(value).map_err(|e| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
            feature_dim = Some(h.feature_dim);
            header = Some(h);
            continue;
        }
        let sample: Sample = serde_json::from_value(value).map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let dim = *feature_dim.get_or_insert(sample.feature.len());
        if sample.feature.len() != dim {
            return Err(Error::FeatureDim {
                line: lineno,
                expected: dim,
                got: sample.feature.len(),
            });
        }
        samples.push(sample);
    }

    if samples.is_empty() {
        return Err(Error::Data(format!("{} contains no samples", path.display())));
    }
    let dim = feature_dim.unwrap();
    let declared = header.and_then(|h| {
        if h.score_range.is_empty() {
            None
        } else {
            Some(h.score_range)
        }
    });
    Dataset::new(samples, dim, declared)
}

/// Writes a dataset as JSON lines with a leading header record.
pub fn save_jsonl(ds: &Dataset, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| Error::Data(format!("cannot create {}: {e}", path.display())))?;
    let header = serde_json::json!({
        "feature_dim": ds.feature_dim,
        "score_range": ds.score_range,
    });
    writeln!(file, "{header}").map_err(|e| Error::Data(e.to_string()))?;
    for s in &ds.samples {
        let line = serde_json::to_string(s).map_err(|e| Error::Data(e.to_string()))?;
        writeln!(file, "{line}").map_err(|e| Error::Data(e.to_string()))?;
    }
    Ok(())
}

/// Seed-fixed pieces of the synthetic map: a random linear lift `A` and one
/// offset vector per category.
pub struct SynthContext {
    lift: Vec<Vec<f64>>, // feature_dim x latent_dim
    category_offsets: Vec<Vec<f64>>,
    cfg: SynthConfig,
}

impl SynthContext {
    pub fn new(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Self {
        let scale = 1.0 / (cfg.latent_dim as f64).sqrt();
        let lift = (0..cfg.feature_dim)
            .map(|_| {
                (0..cfg.latent_dim)
                    .map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        z * scale
                    })
                    .collect()
            })
            .collect();
        let category_offsets = (0..cfg.n_categories)
            .map(|_| {
                (0..cfg.latent_dim)
                    .map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        z * 0.5
                    })
                    .collect()
            })
            .collect();
        SynthContext {
            lift,
            category_offsets,
            cfg: cfg.clone(),
        }
    }

    pub fn lift(&self) -> &[Vec<f64>] {
        &self.lift
    }

    /// Smooth monotone embedding of the normalized score t in [0, 1].
    /// The first component is t itself, so the map is injective at zero noise.
    pub fn embed(&self, q: f64, category_index: usize) -> Vec<f64> {
        let (lo, hi) = self.cfg.score_range;
        let t = (q - lo) / (hi - lo);
        let offset = &self.category_offsets[category_index];
        (0..self.cfg.latent_dim)
            .map(|j| {
                let base = match j % 3 {
                    0 => t,
                    1 => t * t,
                    _ => (2.0 * t - 1.0).tanh(),
                };
                base + offset[j]
            })
            .collect()
    }

    pub fn feature(&self, q: f64, category_index: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let g = self.embed(q, category_index);
        self.lift
            .iter()
            .map(|row| {
                let clean: f64 = row.iter().zip(&g).map(|(a, b)| a * b).sum();
                if self.cfg.noise_std > 0.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    clean + self.cfg.noise_std * z
                } else {
                    clean
                }
            })
            .collect()
    }
}

const SYNTH_DD_TABLE: [f64; 4] = [2.8, 3.0, 3.2, 3.4];

/// Deterministic synthetic dataset with a known score oracle: the score is
/// the latent quality q, and features are a noisy linear lift of a smooth
/// monotone embedding of q.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ctx = SynthContext::new(cfg, &mut rng);
    let (lo, hi) = cfg.score_range;
    let mut samples = Vec::with_capacity(cfg.n_samples);
    for i in 0..cfg.n_samples {
        let cat = i % cfg.n_categories;
        let q: f64 = rng.random_range(lo..hi);
        let feature = ctx.feature(q, cat, &mut rng);
        samples.push(Sample {
            id: format!("synth-{i:05}"),
            category: format!("cat{cat}"),
            difficulty: Some(SYNTH_DD_TABLE[(i / cfg.n_categories) % SYNTH_DD_TABLE.len()]),
            score: q,
            feature,
        });
    }
    let mut declared = BTreeMap::new();
    for c in 0..cfg.n_categories {
        declared.insert(format!("cat{c}"), (lo, hi));
    }
    Dataset::new(samples, cfg.feature_dim, Some(declared))
}

/// Draws `m` distinct policy-eligible exemplars for `input`, uniformly
/// without replacement, using the caller's RNG.
pub fn select_exemplars_with_rng<R: Rng>(
    input: &Sample,
    pool: &Dataset,
    policy: &ExemplarPolicy,
    m: usize,
    rng: &mut R,
) -> Result<Vec<Sample>> {
    policy.validate()?;
    let eligible: Vec<&Sample> = pool
        .samples
        .iter()
        .filter(|c| policy.eligible(input, c))
        .collect();
    if eligible.len() < m {
        return Err(Error::InsufficientExemplars {
            available: eligible.len(),
            requested: m,
        });
    }
    let picks = rand::seq::index::sample(rng, eligible.len(), m);
    Ok(picks.iter().map(|i| eligible[i].clone()).collect())
}

/// Convenience wrapper seeding the draw from the policy's own seed; every
/// call with the same arguments returns the same exemplars.
pub fn select_exemplars(
    input: &Sample,
    pool: &Dataset,
    policy: &ExemplarPolicy,
    m: usize,
) -> Result<Vec<Sample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(policy.random_seed);
    select_exemplars_with_rng(input, pool, policy, m, &mut rng)
}

/// Splits a dataset into (train, test) partitions, deterministic under seed.
/// Holdout returns one partition; k-fold returns k with test sizes differing
/// by at most one.
pub fn split(ds: &Dataset, mode: SplitMode, seed: u64) -> Result<Vec<(Dataset, Dataset)>> {
    let n = ds.len();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    use rand::seq::SliceRandom;
    indices.shuffle(&mut rng);

    match mode {
        SplitMode::Holdout(frac) => {
            if !(frac > 0.0 && frac < 1.0) {
                return Err(Error::Config("holdout fraction must be in (0, 1)".into()));
            }
            let test_size = ((n as f64) * frac).round() as usize;
            let test_size = test_size.clamp(1, n.saturating_sub(1));
            if n < 2 {
                return Err(Error::Data("need at least 2 samples to split".into()));
            }
            let (test_idx, train_idx) = indices.split_at(test_size);
            Ok(vec![(ds.subset(train_idx)?, ds.subset(test_idx)?)])
        }
        SplitMode::KFold(k) => {
            if k < 2 {
                return Err(Error::Config("k must be at least 2".into()));
            }
            if n < k {
                return Err(Error::Data(format!("dataset of {n} samples cannot be split into {k} folds")));
            }
            let base = n / k;
            let rem = n % k;
            let mut folds = Vec::with_capacity(k);
            let mut start = 0usize;
            for f in 0..k {
                let size = base + usize::from(f < rem);
                let test_idx = &indices[start..start + size];
                let train_idx: Vec<usize> = indices[..start]
                    .iter()
                    .chain(&indices[start + size..])
                    .copied()
                    .collect();
                folds.push((ds.subset(&train_idx)?, ds.subset(test_idx)?));
                start += size;
            }
            Ok(folds)
        }
    }
}
