//! The sweep engine: runs every (method, target_p, sample) work item over
//! shared immutable models, scores the outcomes, and aggregates per group.
//!
//! Work items execute in parallel; rows are sorted by
//! `(method, target_p, sample_id)` before any output is produced, so two
//! sweeps with the same configuration and seed emit identical rows except for
//! the timing columns.

use anyhow::{bail, Context};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use cfbench::cfgen::{
    self, CfRequest, CfResult, FeatureGdVariant, MadWeights, PrototypeSet,
};
use cfbench::dataio::LabeledDataset;
use cfbench::metrics::{self, PixelKde, SampleMetrics, Summary};
use cfbench::models::{Autoencoder, Classifier};

use crate::config::{Method, SweepSettings};

/// One detail CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailRow {
    pub method: Method,
    pub sample_id: usize,
    pub true_class: u8,
    pub target_class: u8,
    pub target_p: f64,
    pub converged: bool,
    pub iterations: usize,
    pub time_s: f64,
    pub sparsity: f64,
    pub indist_score: f64,
    pub final_prob: f64,
    pub orig_score: f64,
}

/// One aggregate CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: Method,
    pub target_p: f64,
    pub n: usize,
    pub converged_frac: f64,
    pub sparsity: Summary,
    pub indist: Summary,
    pub time: Summary,
    pub orig_indist_mean: f64,
}

/// Everything a sweep produces, before serialization.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub details: Vec<DetailRow>,
    pub aggregates: Vec<AggregateRow>,
    /// Seconds spent fitting KDEs, MAD weights, and population encodings;
    /// reported separately from per-sample generation time.
    pub precompute_seconds: f64,
}

/// Shared immutable state for all work items.
struct SweepContext<'a> {
    clf: &'a Classifier,
    ae: &'a Autoencoder,
    test: &'a LabeledDataset,
    settings: &'a SweepSettings,
    kde: [PixelKde; 2],
    mad: MadWeights,
    /// Per-class encodings of the training population, dataset order.
    class_encodings: [Vec<Vec<f64>>; 2],
}

fn run_one(
    ctx: &SweepContext,
    method: Method,
    target_p: f64,
    sample_id: usize,
) -> anyhow::Result<DetailRow> {
    let x0 = ctx.test.image(sample_id);
    let true_class = ctx.test.label(sample_id);
    let predicted = u8::from(ctx.clf.prob(x0)? >= 0.5);
    let target_class = 1 - predicted;

    let lr = match method {
        Method::LatentCf => ctx.settings.latent_lr,
        Method::PrototypeCf => ctx.settings.proto_lr,
        _ => ctx.settings.feature_lr,
    };
    let req = CfRequest {
        x0: x0.to_vec(),
        target_class,
        target_p,
        tol: ctx.settings.tol,
        lr,
        max_iters: ctx.settings.max_iters,
    };

    let result: CfResult = match method {
        Method::FeatureGd => cfgen::feature_gd(&req, ctx.clf, FeatureGdVariant::Plain)?,
        Method::FeatureGdClip => cfgen::feature_gd(&req, ctx.clf, FeatureGdVariant::Clip)?,
        Method::FeatureGdMad => {
            cfgen::feature_gd_mad(&req, ctx.clf, &ctx.mad, ctx.settings.mad_lambda)?
        }
        Method::LatentCf => cfgen::latent_cf(&req, ctx.clf, ctx.ae)?,
        Method::PrototypeCf => {
            // prototype selection is precomputation, outside the timed call
            let z0 = ctx.ae.encode(x0)?;
            let proto = PrototypeSet::from_encodings(
                &z0,
                &ctx.class_encodings[target_class as usize],
                ctx.settings.proto_k,
            )?;
            cfgen::prototype_cf(&req, ctx.clf, ctx.ae, &proto, &ctx.settings.proto_weights())?
        }
    };

    let sparsity = metrics::sparsity(x0, &result.x_cf, ctx.settings.change_eps)?;
    let indist_score =
        metrics::in_distribution_score(&result.x_cf, &ctx.kde[target_class as usize])?;
    let orig_score = metrics::in_distribution_score(x0, &ctx.kde[true_class as usize])?;

    Ok(DetailRow {
        method,
        sample_id,
        true_class,
        target_class,
        target_p,
        converged: result.converged,
        iterations: result.iterations,
        time_s: result.elapsed_seconds,
        sparsity,
        indist_score,
        final_prob: result.final_prob,
        orig_score,
    })
}

/// Evaluation sample ids: a seeded shuffle of the test split, truncated.
pub fn evaluation_ids(test: &LabeledDataset, samples: usize, seed: u64) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..test.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    ids.truncate(samples);
    ids
}

/// Runs the full grid and aggregates the results.
pub fn run_sweep(
    clf: &Classifier,
    ae: &Autoencoder,
    train: &LabeledDataset,
    test: &LabeledDataset,
    settings: &SweepSettings,
) -> anyhow::Result<SweepOutput> {
    settings.validate()?;
    if train.is_empty() {
        bail!("empty training split");
    }

    let precompute_start = std::time::Instant::now();
    let fit_class = |class: u8| -> anyhow::Result<PixelKde> {
        metrics::fit_kde(
            train.class_images(class),
            settings.kde_bins,
            settings.kde_bandwidth,
        )
        .with_context(|| format!("fitting KDE for class {class}"))
    };
    let kde = [fit_class(0)?, fit_class(1)?];
    let mad = cfgen::compute_mad(train)?;
    let needs_proto = settings.methods.contains(&Method::PrototypeCf);
    let encode_class = |class: u8| -> anyhow::Result<Vec<Vec<f64>>> {
        if !needs_proto {
            return Ok(Vec::new());
        }
        train
            .class_images(class)
            .map(|img| ae.encode(img).map_err(Into::into))
            .collect()
    };
    let class_encodings = [encode_class(0)?, encode_class(1)?];
    let precompute_seconds = precompute_start.elapsed().as_secs_f64();

    let ctx = SweepContext {
        clf,
        ae,
        test,
        settings,
        kde,
        mad,
        class_encodings,
    };

    let ids = evaluation_ids(test, settings.samples, settings.seed);
    let mut items: Vec<(Method, f64, usize)> = Vec::new();
    for &method in &settings.methods {
        for &p in &settings.target_ps {
            if method == Method::PrototypeCf && !settings.proto_all_targets && p != 0.5 {
                continue;
            }
            for &id in &ids {
                items.push((method, p, id));
            }
        }
    }

    let mut details = items
        .par_iter()
        .map(|&(method, p, id)| run_one(&ctx, method, p, id))
        .collect::<anyhow::Result<Vec<DetailRow>>>()?;
    details.sort_by(|a, b| {
        a.method
            .name()
            .cmp(b.method.name())
            .then(a.target_p.total_cmp(&b.target_p))
            .then(a.sample_id.cmp(&b.sample_id))
    });

    let aggregates = aggregate_details(&details)?;
    Ok(SweepOutput {
        details,
        aggregates,
        precompute_seconds,
    })
}

/// Groups detail rows by `(method, target_p)` and summarizes them.
pub fn aggregate_details(details: &[DetailRow]) -> anyhow::Result<Vec<AggregateRow>> {
    if details.is_empty() {
        return Ok(Vec::new());
    }
    let samples: Vec<SampleMetrics> = details
        .iter()
        .map(|d| SampleMetrics {
            method: d.method.name().to_string(),
            target_p: d.target_p,
            in_distribution: d.indist_score,
            sparsity: d.sparsity,
            elapsed_seconds: d.time_s,
        })
        .collect();
    let report = metrics::aggregate(&samples)?;

    report
        .groups
        .iter()
        .map(|g| {
            let members: Vec<&DetailRow> = details
                .iter()
                .filter(|d| d.method.name() == g.method && d.target_p == g.target_p)
                .collect();
            let method = members[0].method;
            let converged = members.iter().filter(|d| d.converged).count();
            let orig_mean = members.iter().map(|d| d.orig_score).sum::<f64>()
                / members.len() as f64;
            Ok(AggregateRow {
                method,
                target_p: g.target_p,
                n: g.n,
                converged_frac: converged as f64 / members.len() as f64,
                sparsity: g.sparsity,
                indist: g.in_distribution,
                time: g.elapsed_seconds,
                orig_indist_mean: orig_mean,
            })
        })
        .collect()
}
