//! Effective run configuration: parsed from CLI flags, serialized verbatim
//! as a JSON sidecar next to every output so results are self-describing.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use cfbench::cfgen;
use cfbench::dataio::{filter_and_normalize, load_idx_images, load_idx_labels, LabeledDataset};

/// The five generator identifiers used in CLI flags and CSV rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    FeatureGd,
    FeatureGdClip,
    FeatureGdMad,
    PrototypeCf,
    LatentCf,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::FeatureGd,
        Method::FeatureGdClip,
        Method::FeatureGdMad,
        Method::PrototypeCf,
        Method::LatentCf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::FeatureGd => "feature-gd",
            Method::FeatureGdClip => "feature-gd-clip",
            Method::FeatureGdMad => "feature-gd-mad",
            Method::PrototypeCf => "prototype-cf",
            Method::LatentCf => "latent-cf",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "feature-gd" => Ok(Method::FeatureGd),
            "feature-gd-clip" => Ok(Method::FeatureGdClip),
            "feature-gd-mad" => Ok(Method::FeatureGdMad),
            "prototype-cf" => Ok(Method::PrototypeCf),
            "latent-cf" => Ok(Method::LatentCf),
            other => bail!(
                "unknown method {other:?} (expected one of: feature-gd, feature-gd-clip, \
                 feature-gd-mad, prototype-cf, latent-cf)"
            ),
        }
    }
}

/// Everything a sweep needs besides data and models. Defaults match the
/// documented benchmark configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSettings {
    pub methods: Vec<Method>,
    pub target_ps: Vec<f64>,
    /// Evaluation samples drawn from the seeded-shuffled test split.
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub feature_lr: f64,
    pub latent_lr: f64,
    pub max_iters: usize,
    pub kde_bins: usize,
    pub kde_bandwidth: f64,
    pub change_eps: f64,
    pub mad_lambda: f64,
    pub proto_c: f64,
    pub proto_beta: f64,
    pub proto_wae: f64,
    pub proto_wproto: f64,
    pub proto_k: usize,
    /// Step size for the prototype composite objective.
    pub proto_lr: f64,
    /// Prototype search bounds confidence from below, so by default it only
    /// runs at the 0.5 decision boundary.
    pub proto_all_targets: bool,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            target_ps: vec![0.5, 0.6, 0.7, 0.8, 0.9, 0.99],
            samples: 200,
            seed: 42,
            tol: cfgen::DEFAULT_TOL,
            feature_lr: cfgen::DEFAULT_FEATURE_LR,
            latent_lr: cfgen::DEFAULT_LATENT_LR,
            max_iters: cfgen::DEFAULT_MAX_ITERS,
            kde_bins: 50,
            kde_bandwidth: 0.05,
            change_eps: 1e-3,
            mad_lambda: cfgen::DEFAULT_MAD_LAMBDA,
            proto_c: 1.0,
            proto_beta: 0.1,
            proto_wae: 0.1,
            proto_wproto: 0.1,
            proto_k: cfgen::DEFAULT_PROTO_K,
            proto_lr: cfgen::DEFAULT_PROTO_LR,
            proto_all_targets: false,
        }
    }
}

impl SweepSettings {
    pub fn proto_weights(&self) -> cfgen::PrototypeLossWeights {
        cfgen::PrototypeLossWeights {
            c: self.proto_c,
            beta: self.proto_beta,
            w_ae: self.proto_wae,
            w_proto: self.proto_wproto,
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.methods.is_empty() {
            bail!("no methods selected");
        }
        if self.target_ps.is_empty() {
            bail!("no target probabilities selected");
        }
        for &p in &self.target_ps {
            if !(p > 0.0 && p < 1.0) {
                bail!("target_p {p} outside (0,1)");
            }
            if self.tol >= p.min(1.0 - p) {
                bail!("tol {} too large for target_p {p}", self.tol);
            }
        }
        Ok(())
    }
}

/// The standard file names inside a `--data` directory.
pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Loads and filters one split from a data directory.
pub fn load_split(dir: &Path, images: &str, labels: &str) -> anyhow::Result<LabeledDataset> {
    let images_path = dir.join(images);
    let labels_path = dir.join(labels);
    let raw_images = load_idx_images(&images_path)
        .with_context(|| format!("reading {}", images_path.display()))?;
    let raw_labels = load_idx_labels(&labels_path)
        .with_context(|| format!("reading {}", labels_path.display()))?;
    Ok(filter_and_normalize(&raw_images, &raw_labels, 4, 9)?)
}

/// Loads the train and test splits (filtered to 4s and 9s, mapped to 0/1).
pub fn load_dataset(dir: &Path) -> anyhow::Result<(LabeledDataset, LabeledDataset)> {
    Ok((
        load_split(dir, TRAIN_IMAGES, TRAIN_LABELS)?,
        load_split(dir, TEST_IMAGES, TEST_LABELS)?,
    ))
}

/// Conventional model file names inside a `--models` directory.
pub fn classifier_path(dir: &Path) -> PathBuf {
    dir.join("classifier.cfbm")
}

pub fn autoencoder_path(dir: &Path) -> PathBuf {
    dir.join("autoencoder.cfbm")
}
