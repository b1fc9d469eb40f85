//! Subcommands of the `dmlp` binary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dmlp_core::eac::BlendSpace;
use dmlp_core::evaluate::{evaluate_classifier, train_linear_ce, train_linear_soft, TrainConfig};
use dmlp_core::labels::softmax_rows;
use dmlp_core::noise::{label_accuracy, ClassMap, GaussianMixture, MixtureSpec, NoiseSpec};
use dmlp_core::{purify, CleanValidationSet, FeatureMatrix, HardLabels, PurifierConfig};

use crate::io::{self, FeatureFormat};
use crate::manifest::{self, RunManifest};
use crate::{config, report};

#[derive(Debug, Parser)]
#[command(name = "dmlp", version, about = "Label purification with a clean validation set")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample features and labels from a Gaussian mixture.
    Synth(SynthArgs),
    /// Inject label noise.
    Corrupt(CorruptArgs),
    /// Purify noisy labels.
    Purify(Box<PurifyArgs>),
    /// Train a linear classifier on (purified) labels.
    Retrain(RetrainArgs),
    /// Accuracy of a saved classifier.
    Eval(EvalArgs),
    /// Inspect or flatten a correction report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub classes: usize,
    #[arg(long, default_value_t = 8.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent sample from the same mixture; use distinct draws for
    /// train, validation and test splits.
    #[arg(long, default_value_t = 0)]
    pub draw: u64,
    #[arg(long)]
    pub out_features: PathBuf,
    #[arg(long)]
    pub out_labels: PathBuf,
    /// Defaults to csv for `.csv` paths and binary otherwise.
    #[arg(long, value_enum)]
    pub format: Option<FeatureFormat>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Kind {
    Symmetric,
    Asymmetric,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[arg(long)]
    pub ratio: f64,
    /// Asymmetric class map, `from:to` pairs such as `0:1,2:3`, or `cifar10`.
    #[arg(long)]
    pub map: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Flip exactly `round(ratio·n)` eligible samples.
    #[arg(long)]
    pub exact_count: bool,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeatureInput {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FeatureFormat>,
}

#[derive(Debug, Args)]
pub struct PurifyArgs {
    #[command(flatten)]
    pub input: FeatureInput,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub val_features: PathBuf,
    /// Labels text or one-hot CSV.
    #[arg(long)]
    pub val_labels: PathBuf,
    /// Clean labels, only used for the accuracy columns of the report.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<usize>,
    /// Config file or a previous run manifest. Flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub eta_i: Option<f64>,
    #[arg(long)]
    pub entropy_weight: Option<f64>,
    #[arg(long)]
    pub val_batch: Option<usize>,
    #[arg(long)]
    pub normalize_gram: bool,
    #[arg(long)]
    pub bias_feature: bool,

    #[arg(long)]
    pub eta_e: Option<f64>,
    #[arg(long)]
    pub period: Option<u64>,
    #[arg(long)]
    pub eac_entropy_weight: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub adam_eps: Option<f64>,
    #[arg(long)]
    pub eac_seed: Option<u64>,
    #[arg(long)]
    pub no_eac_bias: bool,
    #[arg(long)]
    pub hard_targets: bool,
    #[arg(long, value_enum)]
    pub blend_space: Option<Blend>,
    #[arg(long)]
    pub eac_steps: Option<usize>,

    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[arg(long)]
    pub normalize_features: bool,
    #[arg(long)]
    pub no_ipc: bool,
    #[arg(long)]
    pub no_eac: bool,
    /// Recorded in the manifest. Kernels are sequential, so results do not
    /// depend on it.
    #[arg(long)]
    pub threads: Option<usize>,

    #[arg(long)]
    pub out_labels: PathBuf,
    #[arg(long)]
    pub out_logits: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Save the auxiliary classifier.
    #[arg(long)]
    pub out_model: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Blend {
    Logit,
    Probability,
}

#[derive(Debug, Args)]
pub struct RetrainArgs {
    #[command(flatten)]
    pub input: FeatureInput,
    /// Hard labels to train on.
    #[arg(long, required_unless_present = "soft_logits", conflicts_with = "soft_logits")]
    pub labels: Option<PathBuf>,
    /// Logits CSV from `purify --out-logits`; trains on `softmax(α·logits)`.
    #[arg(long)]
    pub soft_logits: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub no_bias: bool,
    #[arg(long)]
    pub out_model: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: FeatureInput,
    #[arg(long)]
    pub labels: PathBuf,
    /// Also write the result as JSON here, with a manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Write the per-iteration records as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Corrupt(a) => corrupt(a),
        Command::Purify(a) => purify_cmd(*a),
        Command::Retrain(a) => retrain(a),
        Command::Eval(a) => eval(a),
        Command::Report(a) => report_cmd(a),
    }
}

fn load_features(input: &FeatureInput) -> Result<FeatureMatrix> {
    load_features_at(&input.features, input.format)
}

fn load_features_at(path: &Path, format: Option<FeatureFormat>) -> Result<FeatureMatrix> {
    Ok(io::load_features(
        path,
        format.unwrap_or_else(|| FeatureFormat::from_path(path)),
    )?)
}

fn manifest_path(explicit: &Option<PathBuf>, primary: &Path) -> PathBuf {
    explicit.clone().unwrap_or_else(|| manifest::default_path(primary))
}

fn with_classes(labels: HardLabels, classes: usize) -> Result<HardLabels> {
    if labels.classes() == classes {
        Ok(labels)
    } else {
        Ok(HardLabels::new(labels.into_vec(), classes)?)
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = MixtureSpec {
        n: a.n,
        dim: a.dim,
        classes: a.classes,
        separation: a.separation,
        seed: a.seed,
    };
    let mut m = RunManifest::new("synth", serde_json::json!({ "mixture": spec, "draw": a.draw }));
    let (features, labels) = GaussianMixture::new(&spec)?.sample(a.n, a.draw)?;
    let format = a.format.unwrap_or_else(|| FeatureFormat::from_path(&a.out_features));
    io::write_features(&a.out_features, &features, format)?;
    io::write_labels(&a.out_labels, &labels)?;
    m.seed("mixture", a.seed);
    m.output(&a.out_features);
    m.output(&a.out_labels);
    m.finish(&manifest_path(&a.manifest, &a.out_features))
}

fn parse_map(text: &str, classes: usize) -> Result<ClassMap> {
    if text.eq_ignore_ascii_case("cifar10") {
        if classes > 10 {
            bail!("cifar10 map needs at most 10 classes, labels have {classes}");
        }
        return Ok(ClassMap::cifar10());
    }
    let mut pairs = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (from, to) = part
            .split_once(':')
            .with_context(|| format!("bad map entry {part:?}, expected from:to"))?;
        let from: usize = from.trim().parse().with_context(|| format!("bad class in {part:?}"))?;
        let to: usize = to.trim().parse().with_context(|| format!("bad class in {part:?}"))?;
        pairs.push((from, to));
    }
    let c = pairs.iter().map(|&(f, t)| f.max(t) + 1).max().unwrap_or(0).max(classes);
    Ok(ClassMap::from_pairs(c, &pairs)?)
}

fn corrupt(a: CorruptArgs) -> Result<()> {
    let labels = io::load_labels(&a.labels, a.classes)?;
    let spec = match a.kind {
        Kind::Symmetric => {
            if a.map.is_some() {
                bail!("--map only applies to asymmetric noise");
            }
            NoiseSpec::symmetric(a.ratio, a.seed)
        }
        Kind::Asymmetric => {
            let map = parse_map(
                a.map.as_deref().context("asymmetric noise needs --map")?,
                labels.classes(),
            )?;
            NoiseSpec::asymmetric(a.ratio, map, a.seed)
        }
    };
    let spec = NoiseSpec {
        exact_count: a.exact_count,
        ..spec
    };
    let labels = match &spec.class_map {
        Some(map) => with_classes(labels, map.classes())?,
        None => labels,
    };
    let mut m = RunManifest::new("corrupt", serde_json::to_value(&spec)?);
    m.input("labels", &a.labels)?;
    let noisy = spec.apply(&labels)?;
    io::write_labels(&a.out, &noisy)?;
    eprintln!(
        "flipped {:.4} of {} labels",
        1.0 - label_accuracy(&noisy, &labels)?,
        labels.len()
    );
    m.seed("noise", a.seed);
    m.output(&a.out);
    m.finish(&manifest_path(&a.manifest, &a.out))
}

/// Merges flags into the configuration.
pub fn resolve_purifier_config(a: &PurifyArgs) -> Result<PurifierConfig> {
    let mut cfg: PurifierConfig = match &a.config {
        Some(p) => config::load(p)?,
        None => PurifierConfig::default(),
    };
    macro_rules! set {
        ($flag:expr => $field:expr) => {
            if let Some(v) = $flag {
                $field = v;
            }
        };
    }
    set!(a.alpha => cfg.ipc.alpha);
    set!(a.lambda => cfg.ipc.lambda);
    set!(a.eta_i => cfg.ipc.eta);
    set!(a.entropy_weight => cfg.ipc.entropy_weight);
    if a.val_batch.is_some() {
        cfg.ipc.val_batch = a.val_batch;
    }
    cfg.ipc.normalize_gram |= a.normalize_gram;
    cfg.ipc.bias_feature |= a.bias_feature;

    set!(a.eta_e => cfg.eac.eta);
    set!(a.period => cfg.eac.period);
    set!(a.eac_entropy_weight => cfg.eac.entropy_weight);
    set!(a.lr => cfg.eac.optimizer.lr);
    set!(a.beta1 => cfg.eac.optimizer.beta1);
    set!(a.beta2 => cfg.eac.optimizer.beta2);
    set!(a.adam_eps => cfg.eac.optimizer.eps);
    set!(a.eac_seed => cfg.eac.seed);
    set!(a.eac_steps => cfg.eac.steps_per_iter);
    if a.no_eac_bias {
        cfg.eac.use_bias = false;
    }
    cfg.eac.hard_targets |= a.hard_targets;
    if let Some(b) = a.blend_space {
        cfg.eac.blend_space = match b {
            Blend::Logit => BlendSpace::Logit,
            Blend::Probability => BlendSpace::Probability,
        };
    }

    set!(a.batch => cfg.batch_size);
    set!(a.epochs => cfg.epochs);
    set!(a.seed => cfg.shuffle_seed);
    set!(a.init_scale => cfg.init_scale);
    cfg.normalize_features |= a.normalize_features;
    if a.no_ipc {
        cfg.ipc_enabled = false;
    }
    if a.no_eac {
        cfg.eac_enabled = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn purify_cmd(a: PurifyArgs) -> Result<()> {
    let cfg = resolve_purifier_config(&a)?;
    let mut m = RunManifest::new("purify", config::to_value(&cfg));
    m.threads = a.threads;

    let features = load_features(&a.input)?;
    let noisy = io::load_labels(&a.labels, a.classes)?;
    let val_features = load_features_at(&a.val_features, None)?;
    let val_labels = io::load_labels(&a.val_labels, a.classes)?;
    let c = noisy.classes().max(val_labels.classes()).max(a.classes.unwrap_or(0));
    let noisy = with_classes(noisy, c)?;
    let val = CleanValidationSet::from_hard(val_features, &with_classes(val_labels, c)?)?;
    let truth = match &a.truth {
        Some(p) => Some(with_classes(io::load_labels(p, Some(c))?, c)?),
        None => None,
    };

    m.input("features", &a.input.features)?;
    m.input("labels", &a.labels)?;
    m.input("val_features", &a.val_features)?;
    m.input("val_labels", &a.val_labels)?;
    if let Some(p) = &a.truth {
        m.input("truth", p)?;
    }
    m.seed("shuffle", cfg.shuffle_seed);
    m.seed("eac", cfg.eac.seed);

    let start = Instant::now();
    let mut out = purify(&features, &noisy, &val, &cfg, truth.as_ref())?;
    out.report.summary.wall_time_secs = Some(start.elapsed().as_secs_f64());

    io::write_labels(&a.out_labels, &out.labels)?;
    m.output(&a.out_labels);
    if let Some(p) = &a.out_logits {
        io::write_matrix_csv(p, out.logits.matrix())?;
        m.output(p);
    }
    if let Some(p) = &a.report {
        report::save(p, &out.report)?;
        m.output(p);
    }
    if let Some(p) = &a.out_model {
        io::save_model(p, &out.classifier)?;
        m.output(p);
    }
    let s = &out.report.summary;
    match (s.initial_acc, s.final_acc) {
        (Some(i), Some(f)) => eprintln!("{} iterations, label accuracy {i:.4} -> {f:.4}", s.iterations),
        _ => eprintln!("{} iterations", s.iterations),
    }
    m.finish(&manifest_path(&a.manifest, &a.out_labels))
}

fn retrain(a: RetrainArgs) -> Result<()> {
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => config::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch {
        cfg.batch = v;
    }
    if let Some(v) = a.lr {
        cfg.optimizer.lr = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.weight_decay {
        cfg.weight_decay = v;
    }
    if a.no_bias {
        cfg.use_bias = false;
    }
    cfg.validate()?;

    let mut value = config::to_value(&cfg);
    if a.soft_logits.is_some() {
        value["soft_alpha"] = serde_json::json!(a.alpha);
    }
    let mut m = RunManifest::new("retrain", value);
    let features = load_features(&a.input)?;
    m.input("features", &a.input.features)?;
    let clf = if let Some(p) = &a.soft_logits {
        m.input("soft_logits", p)?;
        let logits = io::load_matrix_csv(p)?;
        train_linear_soft(&features, &softmax_rows(&logits, a.alpha), &cfg)?
    } else {
        let p = a.labels.as_ref().expect("clap requires labels or soft logits");
        m.input("labels", p)?;
        train_linear_ce(&features, &io::load_labels(p, None)?, &cfg)?
    };
    io::save_model(&a.out_model, &clf)?;
    m.seed("train", cfg.seed);
    m.output(&a.out_model);
    m.finish(&manifest_path(&a.manifest, &a.out_model))
}

fn eval(a: EvalArgs) -> Result<()> {
    let clf = io::load_model(&a.model)?;
    let features = load_features(&a.input)?;
    let labels = io::load_labels(&a.labels, None)?;
    let acc = evaluate_classifier(&clf, &features, &labels)?;
    let result = serde_json::json!({ "accuracy": acc, "n": labels.len() });
    println!("{result}");
    if let Some(out) = &a.out {
        let mut m = RunManifest::new("eval", serde_json::Value::Null);
        m.input("model", &a.model)?;
        m.input("features", &a.input.features)?;
        m.input("labels", &a.labels)?;
        std::fs::write(out, format!("{result}\n")).with_context(|| format!("writing {}", out.display()))?;
        m.output(out);
        m.finish(&manifest::default_path(out))?;
    }
    Ok(())
}

fn report_cmd(a: ReportArgs) -> Result<()> {
    let r = report::load(&a.input)?;
    match &a.csv {
        Some(out) => {
            let mut m = RunManifest::new("report", serde_json::Value::Null);
            m.input("report", &a.input)?;
            std::fs::write(out, report::to_csv(&r)).with_context(|| format!("writing {}", out.display()))?;
            m.output(out);
            m.finish(&manifest::default_path(out))
        }
        None => {
            println!("{}", serde_json::to_string_pretty(&r.summary)?);
            Ok(())
        }
    }
}
