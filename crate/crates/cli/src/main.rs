//! Command-line surface: synthesize datasets, inspect partitions, train the
//! contrastive tree, evaluate with multi-exemplar voting, and run ablations.

mod checkpoint;
mod run;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use pairscore::dataset::{self, ExemplarPolicy, SplitMode};
use pairscore::partition;
use pairscore::pipeline::{self, TrainConfig};
use pairscore::{Dataset, Error, Result, SynthConfig};

use checkpoint::Checkpoint;
use run::EvalParams;

#[derive(Parser)]
#[command(
    name = "pairscore",
    version,
    about = "Contrastive score regression with a group-aware soft tree"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a deterministic synthetic dataset with known ground truth.
    Synth(SynthArgs),
    /// Compare quantile and uniform group partitions over training deltas.
    Partition(PartitionArgs),
    /// Train the contrastive tree and persist a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint: report, predictions, curves, layer accuracy.
    Eval(EvalArgs),
    /// Write per-sample predictions only (no metrics).
    Predict(PredictArgs),
    /// Train and compare baseline, absolute-tree, and contrastive models.
    Ablate(AblateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Deserialize)]
enum PolicyArg {
    /// Exemplars share the input's category.
    #[value(name = "category")]
    #[serde(rename = "category")]
    Category,
    /// Exemplars share category and degree of difficulty.
    #[value(name = "category+dd")]
    #[serde(rename = "category+dd")]
    CategoryDd,
}

impl PolicyArg {
    fn to_policy(self, seed: u64) -> ExemplarPolicy {
        match self {
            PolicyArg::Category => ExemplarPolicy::category_only(seed),
            PolicyArg::CategoryDd => ExemplarPolicy::category_and_difficulty(seed),
        }
    }
}

fn load_cfg<T: Default + for<'de> Deserialize<'de>>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("invalid config {}: {e}", p.display())))
        }
        None => Ok(T::default()),
    }
}

#[derive(Args)]
struct SynthArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output dataset (JSON lines, header record first).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    feature_dim: Option<usize>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    score_min: Option<f64>,
    #[arg(long)]
    score_max: Option<f64>,
    #[arg(long)]
    categories: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SynthFile {
    n: Option<usize>,
    feature_dim: Option<usize>,
    latent_dim: Option<usize>,
    noise: Option<f64>,
    score_min: Option<f64>,
    score_max: Option<f64>,
    categories: Option<usize>,
    seed: Option<u64>,
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let f: SynthFile = load_cfg(&a.config)?;
    let cfg = SynthConfig {
        n_samples: a.n.or(f.n).unwrap_or(500),
        feature_dim: a.feature_dim.or(f.feature_dim).unwrap_or(64),
        latent_dim: a.latent_dim.or(f.latent_dim).unwrap_or(3),
        noise_std: a.noise.or(f.noise).unwrap_or(0.05),
        score_range: (
            a.score_min.or(f.score_min).unwrap_or(0.0),
            a.score_max.or(f.score_max).unwrap_or(100.0),
        ),
        n_categories: a.categories.or(f.categories).unwrap_or(1),
        seed: a.seed.or(f.seed).unwrap_or(7),
    };
    let ds = dataset::synth_generate(&cfg)?;
    dataset::save_jsonl(&ds, &a.out)?;
    println!(
        "wrote {}: n={} D={} categories={} score_range=({}, {})",
        a.out.display(),
        ds.len(),
        ds.feature_dim(),
        ds.categories().len(),
        cfg.score_range.0,
        cfg.score_range.1,
    );
    Ok(())
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    data: PathBuf,
    /// Per-group bounds and pair counts for both strategies (CSV).
    #[arg(long)]
    out: PathBuf,
    /// Number of groups R (must be a power of two).
    #[arg(long, default_value_t = 32)]
    groups: usize,
    #[arg(long, value_enum, default_value_t = PolicyArg::Category)]
    policy: PolicyArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn cmd_partition(a: PartitionArgs) -> Result<()> {
    let ds = dataset::load_jsonl(&a.data)?;
    let deltas = partition::collect_deltas(&ds, &a.policy.to_policy(a.seed))?;
    let quantile = partition::build_quantile(&deltas, a.groups)?;
    let uniform = partition::build_uniform(deltas[0], *deltas.last().unwrap(), a.groups)?;
    run::write_partition_csv(&a.out, &quantile, &uniform, &deltas)?;
    let qc = run::inclusive_counts(&quantile, &deltas);
    let uc = run::inclusive_counts(&uniform, &deltas);
    println!(
        "{} deltas over {} groups; quantile counts [{}, {}], uniform counts [{}, {}]; wrote {}",
        deltas.len(),
        a.groups,
        qc.iter().min().unwrap(),
        qc.iter().max().unwrap(),
        uc.iter().min().unwrap(),
        uc.iter().max().unwrap(),
        a.out.display(),
    );
    Ok(())
}

#[derive(Args)]
struct TrainArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out_checkpoint: PathBuf,
    /// Per-epoch loss log (CSV: epoch,j,j_cls,j_reg).
    #[arg(long)]
    out_log: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Tree depth d; groups R = 2^d.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    node_dim: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lr_adapter: Option<f64>,
    /// Train a small feature adapter alongside the tree.
    #[arg(long)]
    adapter: bool,
    #[arg(long)]
    pairs_per_input: Option<usize>,
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    #[arg(long)]
    headroom: Option<f64>,
}

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainFile {
    seed: Option<u64>,
    depth: Option<usize>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    node_dim: Option<usize>,
    lr: Option<f64>,
    lr_adapter: Option<f64>,
    adapter: Option<bool>,
    pairs_per_input: Option<usize>,
    policy: Option<PolicyArg>,
    headroom: Option<f64>,
}

fn merge_train_config(a: &TrainArgs, f: &TrainFile) -> TrainConfig {
    let seed = a.seed.or(f.seed).unwrap_or(7);
    let depth = a.depth.or(f.depth).unwrap_or(5);
    let mut cfg = TrainConfig::with_defaults(depth, seed);
    if let Some(v) = a.epochs.or(f.epochs) {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch_size.or(f.batch_size) {
        cfg.batch_size = v;
    }
    if let Some(v) = a.node_dim.or(f.node_dim) {
        cfg.node_feature_dim = v;
    }
    if let Some(v) = a.lr.or(f.lr) {
        cfg.lr_tree = v;
    }
    if let Some(v) = a.lr_adapter.or(f.lr_adapter) {
        cfg.lr_adapter = v;
    }
    cfg.adapter_enabled = a.adapter || f.adapter.unwrap_or(false);
    if let Some(v) = a.pairs_per_input.or(f.pairs_per_input) {
        cfg.pairs_per_input = v;
    }
    if let Some(v) = a.headroom.or(f.headroom) {
        cfg.epsilon_headroom = v;
    }
    cfg.policy = a.policy.or(f.policy).unwrap_or(PolicyArg::Category).to_policy(seed);
    cfg
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let file: TrainFile = load_cfg(&a.config)?;
    let cfg = merge_train_config(&a, &file);
    cfg.validate()?;
    let ds = dataset::load_jsonl(&a.data)?;
    let digest = run::sha256_hex(
        &serde_json::to_string(&cfg)
            .map_err(|e| Error::Config(format!("config serialization failed: {e}")))?,
    );
    let (model, log) = pipeline::train(&ds, &cfg)?;
    Checkpoint::from_model(&model, cfg.seed, &digest)?.save(&a.out_checkpoint)?;
    if let Some(p) = &a.out_log {
        run::write_log_csv(p, &log)?;
    }
    let last = log.last().unwrap();
    println!(
        "trained d={} on {} samples for {} epochs; final J={:.6} (cls {:.6}, reg {:.6}); wrote {}",
        cfg.depth,
        ds.len(),
        cfg.epochs,
        last.mean_j,
        last.mean_cls,
        last.mean_reg,
        a.out_checkpoint.display(),
    );
    Ok(())
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Test set to score.
    #[arg(long)]
    data: PathBuf,
    /// Exemplar pool (normally the training set).
    #[arg(long)]
    pool: PathBuf,
    /// Exemplars per input (M).
    #[arg(long, default_value_t = 10)]
    exemplars: usize,
    /// Relative-L2 tolerance.
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest K for the per-layer accuracy table.
    #[arg(long, default_value_t = 2)]
    k_max: usize,
    #[arg(long, value_enum, default_value_t = PolicyArg::Category)]
    policy: PolicyArg,
    #[arg(long)]
    out_report: PathBuf,
    #[arg(long)]
    out_predictions: Option<PathBuf>,
    #[arg(long)]
    out_curve: Option<PathBuf>,
    #[arg(long)]
    out_layers: Option<PathBuf>,
}

fn run_inference(
    checkpoint: &Path,
    data: &Path,
    pool: &Path,
    params: &EvalParams,
) -> Result<(run::EvalArtifacts, Dataset, Dataset)> {
    let model = Checkpoint::load(checkpoint)?.to_model()?;
    let test = dataset::load_jsonl(data)?;
    let pool_ds = dataset::load_jsonl(pool)?;
    let artifacts = run::evaluate_model(&model, &pool_ds, &test, params)?;
    Ok((artifacts, test, pool_ds))
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let params = EvalParams {
        m: a.exemplars,
        theta: a.theta,
        seed: a.seed,
        policy: a.policy.to_policy(a.seed),
        k_max: a.k_max,
    };
    let (artifacts, ..) = run_inference(&a.checkpoint, &a.data, &a.pool, &params)?;
    run::write_report_json(&a.out_report, &artifacts.report)?;
    if let Some(p) = &a.out_predictions {
        run::write_predictions_jsonl(p, &artifacts.predictions)?;
    }
    if let Some(p) = &a.out_curve {
        run::write_curve_csv(p, &artifacts.report.cumulative_curve)?;
    }
    if let Some(p) = &a.out_layers {
        run::write_layers_csv(p, &artifacts.report.layer_accuracy)?;
    }
    println!(
        "evaluated {} samples with M={}: rho (Fisher avg) = {:.4}, R-l2 x100 = {:.4}; wrote {}",
        artifacts.report.n_test,
        artifacts.report.m_exemplars,
        artifacts.report.rho_fisher_avg,
        artifacts.report.rl2_mean_x100,
        a.out_report.display(),
    );
    Ok(())
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    pool: PathBuf,
    #[arg(long, default_value_t = 10)]
    exemplars: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Category)]
    policy: PolicyArg,
    /// Predictions as JSON lines.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let params = EvalParams {
        m: a.exemplars,
        theta: 0.0,
        seed: a.seed,
        policy: a.policy.to_policy(a.seed),
        k_max: 0,
    };
    let (artifacts, ..) = run_inference(&a.checkpoint, &a.data, &a.pool, &params)?;
    run::write_predictions_jsonl(&a.out, &artifacts.predictions)?;
    println!(
        "predicted {} samples with M={}; wrote {}",
        artifacts.predictions.len(),
        a.exemplars,
        a.out.display(),
    );
    Ok(())
}

#[derive(Args)]
struct AblateArgs {
    /// JSON config file (train fields); flags override.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    /// Holdout test fraction.
    #[arg(long, default_value_t = 0.25)]
    holdout: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    node_dim: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    pairs_per_input: Option<usize>,
    #[arg(long, default_value_t = 10)]
    exemplars: usize,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    /// Comparison table (CSV: model,spearman,rl2_x100,split_digest).
    #[arg(long)]
    out: PathBuf,
}

fn cmd_ablate(a: AblateArgs) -> Result<()> {
    let file: TrainFile = load_cfg(&a.config)?;
    let targs = TrainArgs {
        config: None,
        data: a.data.clone(),
        out_checkpoint: PathBuf::new(),
        out_log: None,
        seed: a.seed,
        depth: a.depth,
        epochs: a.epochs,
        batch_size: a.batch_size,
        node_dim: a.node_dim,
        lr: a.lr,
        lr_adapter: None,
        adapter: false,
        pairs_per_input: a.pairs_per_input,
        policy: a.policy,
        headroom: None,
    };
    let cfg = merge_train_config(&targs, &file);
    cfg.validate()?;

    let ds = dataset::load_jsonl(&a.data)?;
    let parts = dataset::split(&ds, SplitMode::Holdout(a.holdout), cfg.seed)?;
    let (train, test) = &parts[0];
    let digest = run::split_digest(test);

    let mut ranges = train.score_range().clone();
    for (cat, r) in test.score_range() {
        ranges.entry(cat.clone()).or_insert(*r);
    }

    let (baseline, _) = pipeline::baseline_train(train, &cfg)?;
    let base_preds: Vec<f64> = test
        .samples()
        .iter()
        .map(|s| pipeline::baseline_predict(&baseline, s))
        .collect::<Result<_>>()?;
    let (base_rho, base_rl2) = run::summarize_scores(&base_preds, test, &ranges, a.theta)?;

    let (absolute, _) = pipeline::absolute_train(train, &cfg)?;
    let abs_preds: Vec<f64> = test
        .samples()
        .iter()
        .map(|s| pipeline::absolute_predict(&absolute, s).map(|(v, _)| v))
        .collect::<Result<_>>()?;
    let (abs_rho, abs_rl2) = run::summarize_scores(&abs_preds, test, &ranges, a.theta)?;

    let (contrastive, _) = pipeline::train(train, &cfg)?;
    let params = EvalParams {
        m: a.exemplars,
        theta: a.theta,
        seed: cfg.seed,
        policy: cfg.policy.clone(),
        k_max: 0,
    };
    let artifacts = run::evaluate_model(&contrastive, train, test, &params)?;
    let (con_rho, con_rl2) = (
        artifacts.report.rho_fisher_avg,
        artifacts.report.rl2_mean_x100,
    );

    let mut out = String::from("model,spearman,rl2_x100,split_digest\n");
    out.push_str(&format!("direct_regression,{base_rho},{base_rl2},{digest}\n"));
    out.push_str(&format!("tree_absolute,{abs_rho},{abs_rl2},{digest}\n"));
    out.push_str(&format!("contrastive_tree,{con_rho},{con_rl2},{digest}\n"));
    run::write_text(&a.out, &out)?;
    println!(
        "ablation on {} train / {} test: direct {:.4}, absolute tree {:.4}, contrastive tree {:.4}; wrote {}",
        train.len(),
        test.len(),
        base_rho,
        abs_rho,
        con_rho,
        a.out.display(),
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Synth(a) => cmd_synth(a),
        Cmd::Partition(a) => cmd_partition(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Predict(a) => cmd_predict(a),
        Cmd::Ablate(a) => cmd_ablate(a),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
