//! The three counterfactual quality metrics: in-distribution probability,
//! sparsity, and generation time, plus their per-group aggregation.
//!
//! The in-distribution oracle is a per-pixel smoothed histogram over the
//! target-class population: intensities are binned on `[0, 1]`, each pixel's
//! histogram is convolved with a truncated Gaussian, and rows are normalized
//! to probability vectors. Scoring an image looks up each pixel's bin
//! probability and averages over pixels, so scores are bounded in `[0, 1]`
//! (unlike a continuous density).

use std::collections::BTreeMap;

use crate::{Error, Result};

/// Per-pixel smoothed intensity distribution over a class population.
#[derive(Debug, Clone)]
pub struct PixelKde {
    bins: usize,
    bandwidth: f64,
    /// `rows[pixel][bin]`, each row non-negative and summing to 1.
    rows: Vec<Vec<f64>>,
}

impl PixelKde {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn pixel_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, pixel: usize) -> &[f64] {
        &self.rows[pixel]
    }

    /// Bin index for an intensity; `None` when the value lies outside `[0, 1]`.
    fn bin_of(&self, v: f64) -> Option<usize> {
        if !(0.0..=1.0).contains(&v) {
            return None;
        }
        Some(((v * self.bins as f64) as usize).min(self.bins - 1))
    }
}

/// Discretized Gaussian kernel taps at bin-width spacing, truncated at
/// `±4*bandwidth` and normalized to sum 1.
fn kernel_taps(bins: usize, bandwidth: f64) -> Vec<f64> {
    let delta = 1.0 / bins as f64;
    let radius = (4.0 * bandwidth / delta).ceil() as usize;
    let mut taps: Vec<f64> = (0..=radius)
        .map(|t| {
            let d = t as f64 * delta;
            (-d * d / (2.0 * bandwidth * bandwidth)).exp()
        })
        .collect();
    let total: f64 = taps[0] + 2.0 * taps[1..].iter().sum::<f64>();
    for t in &mut taps {
        *t /= total;
    }
    taps
}

/// Fits the per-pixel smoothed intensity distribution for one class
/// population.
pub fn fit_kde<'a, I>(target_class_images: I, bins: usize, bandwidth: f64) -> Result<PixelKde>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let images: Vec<&[f64]> = target_class_images.into_iter().collect();
    if images.is_empty() {
        return Err(Error::InsufficientData("empty KDE population".into()));
    }
    if bins < 2 {
        return Err(Error::InvalidConfig("KDE needs at least 2 bins".into()));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidConfig("KDE bandwidth must be positive".into()));
    }
    let pixels = images[0].len();
    if images.iter().any(|img| img.len() != pixels) {
        return Err(Error::Shape("KDE population images differ in length".into()));
    }

    let taps = kernel_taps(bins, bandwidth);
    let radius = taps.len() - 1;
    let mut rows = Vec::with_capacity(pixels);
    let mut counts = vec![0.0f64; bins];

    for p in 0..pixels {
        counts.iter_mut().for_each(|c| *c = 0.0);
        for img in &images {
            let v = img[p];
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!(
                    "population intensity {v} outside [0,1]"
                )));
            }
            let b = ((v * bins as f64) as usize).min(bins - 1);
            counts[b] += 1.0;
        }
        // Convolve with zero padding, then renormalize the row so truncation
        // at the edges cannot leak probability mass.
        let mut row = vec![0.0f64; bins];
        for (b, slot) in row.iter_mut().enumerate() {
            let mut acc = counts[b] * taps[0];
            for t in 1..=radius {
                if b >= t {
                    acc += counts[b - t] * taps[t];
                }
                if b + t < bins {
                    acc += counts[b + t] * taps[t];
                }
            }
            *slot = acc;
        }
        let total: f64 = row.iter().sum();
        for v in &mut row {
            *v /= total;
        }
        rows.push(row);
    }

    Ok(PixelKde {
        bins,
        bandwidth,
        rows,
    })
}

/// Mean per-pixel bin probability of an image under a fitted [`PixelKde`].
///
/// Intensities outside `[0, 1]` have no population mass and contribute 0;
/// the result is always in `[0, 1]`.
pub fn in_distribution_score(x: &[f64], kde: &PixelKde) -> Result<f64> {
    if x.len() != kde.pixel_count() {
        return Err(Error::Shape(format!(
            "image has {} pixels, KDE has {}",
            x.len(),
            kde.pixel_count()
        )));
    }
    let mut total = 0.0;
    for (p, &v) in x.iter().enumerate() {
        if let Some(b) = kde.bin_of(v) {
            total += kde.rows[p][b];
        }
    }
    Ok(total / x.len() as f64)
}

/// Fraction of features changed by more than `change_eps`.
pub fn sparsity(x0: &[f64], x_cf: &[f64], change_eps: f64) -> Result<f64> {
    if x0.len() != x_cf.len() {
        return Err(Error::Shape(format!(
            "length mismatch {} vs {}",
            x0.len(),
            x_cf.len()
        )));
    }
    if change_eps < 0.0 {
        return Err(Error::InvalidConfig("change_eps must be >= 0".into()));
    }
    if x0.is_empty() {
        return Err(Error::InsufficientData("empty image".into()));
    }
    let changed = x0
        .iter()
        .zip(x_cf)
        .filter(|(a, b)| (*a - *b).abs() > change_eps)
        .count();
    Ok(changed as f64 / x0.len() as f64)
}

/// Mean, sample standard deviation, and 95% normal CI half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub ci_half: f64,
}

/// Computes mean, sample std (n-1 denominator), and `1.96 * std / sqrt(n)`.
///
/// A single-element group gets std 0 and a degenerate (zero-width) CI; the
/// caller sees that through the group's `degenerate` flag.
pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::InsufficientData("empty group".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() == 1 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(Summary {
        mean,
        std,
        ci_half: 1.96 * std / n.sqrt(),
    })
}

/// One evaluated counterfactual, ready for grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMetrics {
    pub method: String,
    pub target_p: f64,
    pub in_distribution: f64,
    pub sparsity: f64,
    pub elapsed_seconds: f64,
}

/// Aggregated metrics for one `(method, target_p)` group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub method: String,
    pub target_p: f64,
    pub n: usize,
    pub in_distribution: Summary,
    pub sparsity: Summary,
    pub elapsed_seconds: Summary,
    /// True when the group has a single sample, so std/CI carry no
    /// information.
    pub degenerate: bool,
}

/// Per-(method, target_p) aggregation of the three quality metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub groups: Vec<GroupReport>,
}

impl MetricsReport {
    pub fn group(&self, method: &str, target_p: f64) -> Option<&GroupReport> {
        self.groups
            .iter()
            .find(|g| g.method == method && g.target_p == target_p)
    }
}

/// Groups samples by `(method, target_p)` and summarizes each metric.
///
/// Groups come out sorted by method name, then target probability.
pub fn aggregate(samples: &[SampleMetrics]) -> Result<MetricsReport> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples to aggregate".into()));
    }
    let mut grouped: BTreeMap<(String, u64), Vec<&SampleMetrics>> = BTreeMap::new();
    for s in samples {
        if !(0.0..1.0).contains(&s.target_p) || s.target_p <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "target_p {} outside (0,1)",
                s.target_p
            )));
        }
        grouped
            .entry((s.method.clone(), s.target_p.to_bits()))
            .or_default()
            .push(s);
    }
    let mut groups = Vec::with_capacity(grouped.len());
    for ((method, bits), members) in grouped {
        let col = |f: fn(&SampleMetrics) -> f64| -> Vec<f64> {
            members.iter().map(|m| f(m)).collect()
        };
        groups.push(GroupReport {
            method,
            target_p: f64::from_bits(bits),
            n: members.len(),
            in_distribution: summarize(&col(|m| m.in_distribution))?,
            sparsity: summarize(&col(|m| m.sparsity))?,
            elapsed_seconds: summarize(&col(|m| m.elapsed_seconds))?,
            degenerate: members.len() == 1,
        });
    }
    Ok(MetricsReport { groups })
}
