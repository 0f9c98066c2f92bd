//! Subcommand implementations behind the `cfbench` binary.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::Serialize;

use cfbench::cfgen::{self, CfRequest, CfResult, FeatureGdVariant};
use cfbench::dataio::LabeledDataset;
use cfbench::models::{
    classifier_accuracy, load_autoencoder, load_classifier, reconstruction_mse, save_autoencoder,
    save_classifier, train_autoencoder, train_classifier, Autoencoder, Classifier, TrainConfig,
};
use cfbench::synth::{write_corpus, SynthConfig};

use crate::config::{
    autoencoder_path, classifier_path, load_dataset, Method, SweepSettings,
};
use crate::report::{aggregate_csv, detail_csv};
use crate::sweep::run_sweep;
use crate::pgm;

/// Flags shared by every subcommand that reads the four IDX files.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Directory holding train-images-idx3-ubyte, train-labels-idx1-ubyte,
    /// t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Directory to write classifier.cfbm and autoencoder.cfbm into
    #[arg(long, default_value = "models")]
    pub models: PathBuf,

    /// Classifier training epochs
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,

    /// Classifier learning rate
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,

    /// Autoencoder training epochs
    #[arg(long, default_value_t = 40)]
    pub ae_epochs: usize,

    /// Autoencoder learning rate
    #[arg(long, default_value_t = 2.0)]
    pub ae_lr: f64,

    /// Mini-batch size for both models
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,

    /// Autoencoder bottleneck width
    #[arg(long, default_value_t = 16)]
    pub latent_dim: usize,

    /// RNG seed for init and shuffling
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Train on only the first N filtered samples (0 = all)
    #[arg(long, default_value_t = 0)]
    pub train_limit: usize,
}

#[derive(Debug, Serialize)]
struct TrainSidecar<'a> {
    data: String,
    epochs: usize,
    lr: f64,
    ae_epochs: usize,
    ae_lr: f64,
    batch_size: usize,
    latent_dim: usize,
    seed: u64,
    train_limit: usize,
    train_samples: usize,
    test_samples: usize,
    test_accuracy: f64,
    test_reconstruction_mse: f64,
    classifier_file: &'a str,
    autoencoder_file: &'a str,
}

pub fn cmd_train(args: &TrainArgs) -> anyhow::Result<()> {
    let (mut train, test) = load_dataset(&args.data.data)?;
    if args.train_limit > 0 {
        train = train.take_first(args.train_limit);
    }
    if train.is_empty() {
        bail!("training split is empty after filtering");
    }

    let clf = train_classifier(
        &train,
        &TrainConfig {
            epochs: args.epochs,
            batch_size: args.batch_size,
            lr: args.lr,
            seed: args.seed,
        },
    )?;
    let accuracy = classifier_accuracy(&clf, &test)?;
    println!("classifier: held-out accuracy {accuracy:.4} ({} test samples)", test.len());

    let ae = train_autoencoder(
        &train,
        args.latent_dim,
        &TrainConfig {
            epochs: args.ae_epochs,
            batch_size: args.batch_size,
            lr: args.ae_lr,
            seed: args.seed,
        },
    )?;
    let mse = reconstruction_mse(&ae, &test)?;
    println!("autoencoder: held-out per-pixel reconstruction MSE {mse:.5}");

    std::fs::create_dir_all(&args.models)
        .with_context(|| format!("creating {}", args.models.display()))?;
    save_classifier(&clf, &classifier_path(&args.models))?;
    save_autoencoder(&ae, &autoencoder_path(&args.models))?;

    let sidecar = TrainSidecar {
        data: args.data.data.display().to_string(),
        epochs: args.epochs,
        lr: args.lr,
        ae_epochs: args.ae_epochs,
        ae_lr: args.ae_lr,
        batch_size: args.batch_size,
        latent_dim: args.latent_dim,
        seed: args.seed,
        train_limit: args.train_limit,
        train_samples: train.len(),
        test_samples: test.len(),
        test_accuracy: accuracy,
        test_reconstruction_mse: mse,
        classifier_file: "classifier.cfbm",
        autoencoder_file: "autoencoder.cfbm",
    };
    write_json(&args.models.join("train_config.json"), &sidecar)?;
    println!("models written to {}", args.models.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Directory holding classifier.cfbm and autoencoder.cfbm
    #[arg(long, default_value = "models")]
    pub models: PathBuf,

    /// Output directory for details.csv, aggregate.csv, config.json
    #[arg(long, default_value = "out")]
    pub out: PathBuf,

    /// Comma-separated methods (default: all five)
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<Method>,

    /// Comma-separated target-class probabilities
    #[arg(long = "target-p", value_delimiter = ',')]
    pub target_p: Vec<f64>,

    /// Evaluation samples drawn from the seeded-shuffled test split
    #[arg(long, default_value_t = 200)]
    pub samples: usize,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Convergence tolerance on |prob - target_p|
    #[arg(long, default_value_t = cfgen::DEFAULT_TOL)]
    pub tol: f64,

    /// Override the step size for every method (default: 0.1 in feature
    /// space, 0.05 in latent space)
    #[arg(long)]
    pub lr: Option<f64>,

    #[arg(long, default_value_t = cfgen::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,

    #[arg(long, default_value_t = 50)]
    pub kde_bins: usize,

    #[arg(long, default_value_t = 0.05)]
    pub kde_bandwidth: f64,

    /// Threshold on |x_cf - x0| above which a pixel counts as changed
    #[arg(long, default_value_t = 1e-3)]
    pub change_eps: f64,

    /// Weight on the inverse-MAD L1 distance in feature-gd-mad
    #[arg(long, default_value_t = cfgen::DEFAULT_MAD_LAMBDA)]
    pub mad_lambda: f64,

    /// Prototype hinge weight c
    #[arg(long, default_value_t = 1.0)]
    pub proto_c: f64,

    /// Prototype L1 weight beta
    #[arg(long, default_value_t = 0.1)]
    pub proto_beta: f64,

    /// Prototype autoencoder reconstruction weight
    #[arg(long, default_value_t = 0.1)]
    pub proto_wae: f64,

    /// Prototype latent-pull weight
    #[arg(long, default_value_t = 0.1)]
    pub proto_wproto: f64,

    /// Nearest target-class encodings averaged into the prototype
    #[arg(long, default_value_t = cfgen::DEFAULT_PROTO_K)]
    pub proto_k: usize,

    /// Step size for the prototype composite objective
    #[arg(long, default_value_t = cfgen::DEFAULT_PROTO_LR)]
    pub proto_lr: f64,

    /// Run prototype-cf at every target_p instead of only 0.5
    #[arg(long, default_value_t = false)]
    pub proto_all_targets: bool,
}

impl SweepArgs {
    pub fn settings(&self) -> SweepSettings {
        let defaults = SweepSettings::default();
        SweepSettings {
            methods: if self.methods.is_empty() {
                defaults.methods
            } else {
                self.methods.clone()
            },
            target_ps: if self.target_p.is_empty() {
                defaults.target_ps
            } else {
                self.target_p.clone()
            },
            samples: self.samples,
            seed: self.seed,
            tol: self.tol,
            feature_lr: self.lr.unwrap_or(defaults.feature_lr),
            latent_lr: self.lr.unwrap_or(defaults.latent_lr),
            max_iters: self.max_iters,
            kde_bins: self.kde_bins,
            kde_bandwidth: self.kde_bandwidth,
            change_eps: self.change_eps,
            mad_lambda: self.mad_lambda,
            proto_c: self.proto_c,
            proto_beta: self.proto_beta,
            proto_wae: self.proto_wae,
            proto_wproto: self.proto_wproto,
            proto_k: self.proto_k,
            proto_lr: self.proto_lr,
            proto_all_targets: self.proto_all_targets,
        }
    }
}

#[derive(Debug, Serialize)]
struct SweepSidecar<'a> {
    data: String,
    models: String,
    #[serde(flatten)]
    settings: &'a SweepSettings,
    precompute_seconds: f64,
    detail_rows: usize,
}

fn load_models(dir: &Path) -> anyhow::Result<(Classifier, Autoencoder)> {
    let clf = load_classifier(&classifier_path(dir))
        .with_context(|| format!("loading {}", classifier_path(dir).display()))?;
    let ae = load_autoencoder(&autoencoder_path(dir))
        .with_context(|| format!("loading {}", autoencoder_path(dir).display()))?;
    Ok((clf, ae))
}

pub fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<()> {
    let settings = args.settings();
    let (train, test) = load_dataset(&args.data.data)?;
    let (clf, ae) = load_models(&args.models)?;

    let output = run_sweep(&clf, &ae, &train, &test, &settings)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    std::fs::write(args.out.join("details.csv"), detail_csv(&output.details))?;
    std::fs::write(
        args.out.join("aggregate.csv"),
        aggregate_csv(&output.aggregates),
    )?;
    let sidecar = SweepSidecar {
        data: args.data.data.display().to_string(),
        models: args.models.display().to_string(),
        settings: &settings,
        precompute_seconds: output.precompute_seconds,
        detail_rows: output.details.len(),
    };
    write_json(&args.out.join("config.json"), &sidecar)?;

    println!(
        "precompute {:.3}s; {} detail rows",
        output.precompute_seconds,
        output.details.len()
    );
    for row in &output.aggregates {
        println!(
            "{:<16} p={:<4} n={:<4} conv={:.3} sparsity={:.4}±{:.4} indist={:.4}±{:.4} time={:.4}s orig={:.4}",
            row.method.name(),
            row.target_p,
            row.n,
            row.converged_frac,
            row.sparsity.mean,
            row.sparsity.ci_half,
            row.indist.mean,
            row.indist.ci_half,
            row.time.mean,
            row.orig_indist_mean,
        );
    }
    println!("results written to {}", args.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, default_value = "models")]
    pub models: PathBuf,

    #[arg(long, default_value = "out")]
    pub out: PathBuf,

    /// Index into the filtered test split
    #[arg(long)]
    pub sample_id: usize,

    #[arg(long)]
    pub method: Method,

    #[arg(long, default_value_t = 0.5)]
    pub target_p: f64,

    #[arg(long, default_value_t = cfgen::DEFAULT_TOL)]
    pub tol: f64,

    #[arg(long)]
    pub lr: Option<f64>,

    #[arg(long, default_value_t = cfgen::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,

    #[arg(long, default_value_t = cfgen::DEFAULT_MAD_LAMBDA)]
    pub mad_lambda: f64,

    #[arg(long, default_value_t = 1.0)]
    pub proto_c: f64,

    #[arg(long, default_value_t = 0.1)]
    pub proto_beta: f64,

    #[arg(long, default_value_t = 0.1)]
    pub proto_wae: f64,

    #[arg(long, default_value_t = 0.1)]
    pub proto_wproto: f64,

    #[arg(long, default_value_t = cfgen::DEFAULT_PROTO_K)]
    pub proto_k: usize,
}

#[derive(Debug, Serialize)]
struct HeatmapSidecar {
    data: String,
    models: String,
    sample_id: usize,
    method: Method,
    target_p: f64,
    tol: f64,
    lr: f64,
    max_iters: usize,
    mad_lambda: f64,
    proto_c: f64,
    proto_beta: f64,
    proto_wae: f64,
    proto_wproto: f64,
    proto_k: usize,
    true_class: u8,
    target_class: u8,
    converged: bool,
    iterations: usize,
    time_s: f64,
    final_prob: f64,
}

/// Generates one counterfactual outside the sweep machinery.
fn generate_single(
    args: &HeatmapArgs,
    clf: &Classifier,
    ae: &Autoencoder,
    train: &LabeledDataset,
    x0: &[f64],
    target_class: u8,
) -> anyhow::Result<(CfResult, f64)> {
    let lr = args.lr.unwrap_or(match args.method {
        Method::LatentCf => cfgen::DEFAULT_LATENT_LR,
        Method::PrototypeCf => cfgen::DEFAULT_PROTO_LR,
        _ => cfgen::DEFAULT_FEATURE_LR,
    });
    let req = CfRequest {
        x0: x0.to_vec(),
        target_class,
        target_p: args.target_p,
        tol: args.tol,
        lr,
        max_iters: args.max_iters,
    };
    let result = match args.method {
        Method::FeatureGd => cfgen::feature_gd(&req, clf, FeatureGdVariant::Plain)?,
        Method::FeatureGdClip => cfgen::feature_gd(&req, clf, FeatureGdVariant::Clip)?,
        Method::FeatureGdMad => {
            let mad = cfgen::compute_mad(train)?;
            cfgen::feature_gd_mad(&req, clf, &mad, args.mad_lambda)?
        }
        Method::LatentCf => cfgen::latent_cf(&req, clf, ae)?,
        Method::PrototypeCf => {
            let proto = cfgen::compute_prototype(x0, target_class, train, ae, args.proto_k)?;
            let lw = cfgen::PrototypeLossWeights {
                c: args.proto_c,
                beta: args.proto_beta,
                w_ae: args.proto_wae,
                w_proto: args.proto_wproto,
            };
            cfgen::prototype_cf(&req, clf, ae, &proto, &lw)?
        }
    };
    Ok((result, lr))
}

pub fn cmd_heatmap(args: &HeatmapArgs) -> anyhow::Result<()> {
    let (train, test) = load_dataset(&args.data.data)?;
    let (clf, ae) = load_models(&args.models)?;
    if args.sample_id >= test.len() {
        bail!(
            "sample_id {} out of range (test split has {} samples)",
            args.sample_id,
            test.len()
        );
    }
    let x0 = test.image(args.sample_id);
    let true_class = test.label(args.sample_id);
    let predicted = u8::from(clf.prob(x0)? >= 0.5);
    let target_class = 1 - predicted;
    let side = test.side();

    let (result, lr) = generate_single(args, &clf, &ae, &train, x0, target_class)?;
    let diff: Vec<f64> = result.x_cf.iter().zip(x0).map(|(a, b)| a - b).collect();

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let stem = format!("sample{}_{}", args.sample_id, args.method);
    std::fs::write(
        args.out.join(format!("{stem}_original.pgm")),
        pgm::encode_image(x0, side)?,
    )?;
    std::fs::write(
        args.out.join(format!("{stem}_counterfactual.pgm")),
        pgm::encode_image(&result.x_cf, side)?,
    )?;
    std::fs::write(
        args.out.join(format!("{stem}_diff.pgm")),
        pgm::encode_signed_diff(&diff, side)?,
    )?;

    let mut diff_csv = String::from("pixel,diff\n");
    for (i, d) in diff.iter().enumerate() {
        diff_csv.push_str(&format!("{i},{d}\n"));
    }
    std::fs::write(args.out.join(format!("{stem}_diff.csv")), diff_csv)?;

    let sidecar = HeatmapSidecar {
        data: args.data.data.display().to_string(),
        models: args.models.display().to_string(),
        sample_id: args.sample_id,
        method: args.method,
        target_p: args.target_p,
        tol: args.tol,
        lr,
        max_iters: args.max_iters,
        mad_lambda: args.mad_lambda,
        proto_c: args.proto_c,
        proto_beta: args.proto_beta,
        proto_wae: args.proto_wae,
        proto_wproto: args.proto_wproto,
        proto_k: args.proto_k,
        true_class,
        target_class,
        converged: result.converged,
        iterations: result.iterations,
        time_s: result.elapsed_seconds,
        final_prob: result.final_prob,
    };
    write_json(&args.out.join(format!("{stem}_config.json")), &sidecar)?;
    println!(
        "{stem}: converged={} iterations={} final_prob={:.4}; files in {}",
        result.converged,
        result.iterations,
        result.final_prob,
        args.out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory to write the four IDX files into
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, default_value_t = 2000)]
    pub train: usize,

    #[arg(long, default_value_t = 500)]
    pub test: usize,

    #[arg(long, default_value_t = 28)]
    pub side: usize,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

pub fn cmd_synth(args: &SynthArgs) -> anyhow::Result<()> {
    let cfg = SynthConfig {
        train: args.train,
        test: args.test,
        side: args.side,
        seed: args.seed,
    };
    write_corpus(&args.out, &cfg)?;
    println!(
        "wrote {} train / {} test synthetic digits ({}x{}) to {}",
        args.train,
        args.test,
        args.side,
        args.side,
        args.out.display()
    );
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
