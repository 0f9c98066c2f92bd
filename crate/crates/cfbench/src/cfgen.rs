//! The five counterfactual generators.
//!
//! All methods drive the classifier's *target-class* probability
//! `p_t(x) = f(x)` (target class 1) or `1 - f(x)` (target class 0) toward a
//! requested `target_p`:
//!
//! - [`latent_cf`] — gradient descent on `(p_t(D(z)) - target_p)^2` in the
//!   autoencoder's latent space, starting from `z = E(x0)`.
//! - [`feature_gd`] — the same squared loss directly in pixel space, plain or
//!   with per-step clipping to `[0, 1]`.
//! - [`feature_gd_mad`] — pixel-space descent with an added L1 distance to
//!   `x0` weighted by inverse per-feature median absolute deviation.
//! - [`prototype_cf`] — descent over a perturbation `delta` on a composite of
//!   hinge prediction loss, elastic-net terms on `delta`, an autoencoder
//!   reconstruction term, and a pull toward a target-class latent prototype.
//!
//! Generators are pure given their inputs (timing aside) and safe to run
//! concurrently over shared models.

use std::time::Instant;

use crate::dataio::LabeledDataset;
use crate::models::{Autoencoder, Classifier};
use crate::ndnet::composed_input_grad_vec;
use crate::{Error, Result};

/// Default convergence tolerance on `|prob - target_p|`.
pub const DEFAULT_TOL: f64 = 0.01;
/// Default step size for pixel-space methods.
pub const DEFAULT_FEATURE_LR: f64 = 0.1;
/// Default step size for latent-space traversal.
pub const DEFAULT_LATENT_LR: f64 = 0.05;
/// Default iteration budget.
pub const DEFAULT_MAX_ITERS: usize = 2000;
/// Floor applied to per-feature MAD values before inverting; constant
/// features (MAD 0) otherwise make the distance undefined, and the huge
/// resulting weight keeps them effectively frozen.
pub const MAD_EPSILON: f64 = 1e-6;
/// Default weight on the MAD distance term in [`feature_gd_mad`].
pub const DEFAULT_MAD_LAMBDA: f64 = 0.002;
/// Default number of nearest target-class encodings averaged into a
/// prototype.
pub const DEFAULT_PROTO_K: usize = 5;
/// Default step size for the prototype composite objective.
pub const DEFAULT_PROTO_LR: f64 = 0.02;

/// One counterfactual request: the instance to explain plus the search
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CfRequest {
    pub x0: Vec<f64>,
    /// Which binary class the counterfactual should reach (0 or 1).
    /// `target_p` is expressed as that class's probability.
    pub target_class: u8,
    pub target_p: f64,
    pub tol: f64,
    pub lr: f64,
    pub max_iters: usize,
}

impl CfRequest {
    /// Request with the documented pixel-space defaults.
    pub fn feature_space(x0: Vec<f64>, target_class: u8, target_p: f64) -> Self {
        Self {
            x0,
            target_class,
            target_p,
            tol: DEFAULT_TOL,
            lr: DEFAULT_FEATURE_LR,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }

    /// Request with the documented latent-space defaults.
    pub fn latent_space(x0: Vec<f64>, target_class: u8, target_p: f64) -> Self {
        Self {
            lr: DEFAULT_LATENT_LR,
            ..Self::feature_space(x0, target_class, target_p)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.target_class > 1 {
            return Err(Error::InvalidConfig(format!(
                "target_class must be 0 or 1, got {}",
                self.target_class
            )));
        }
        if !(self.target_p > 0.0 && self.target_p < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "target_p {} outside (0,1)",
                self.target_p
            )));
        }
        if !(self.tol > 0.0) || self.tol >= self.target_p.min(1.0 - self.target_p) {
            return Err(Error::InvalidConfig(format!(
                "tol {} must be positive and below min(target_p, 1-target_p)",
                self.tol
            )));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::InvalidConfig(format!("lr {} must be positive", self.lr)));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("request x0".into()));
        }
        Ok(())
    }
}

/// One counterfactual outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct CfResult {
    pub x_cf: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub elapsed_seconds: f64,
    /// Target-class probability of `x_cf`.
    pub final_prob: f64,
    /// Iterations where the tracked objective rose; a diagnostic for
    /// too-large step sizes, logged by the harness rather than fatal.
    pub loss_increases: usize,
}

/// Squared-error loss between a probability and the target, with its
/// derivative in the probability.
pub fn prob_loss(target_p: f64, prob: f64) -> (f64, f64) {
    let d = prob - target_p;
    (d * d, 2.0 * d)
}

/// Classifier viewed through the requested target class: probabilities and
/// input gradients are negated for class 0 so every generator can treat
/// "raise `p_t` toward `target_p`" uniformly.
struct TargetView<'a> {
    clf: &'a Classifier,
    sign: f64,
}

impl<'a> TargetView<'a> {
    fn new(clf: &'a Classifier, target_class: u8) -> Self {
        Self {
            clf,
            sign: if target_class == 1 { 1.0 } else { -1.0 },
        }
    }

    fn prob(&self, x: &[f64]) -> Result<f64> {
        let p = self.clf.prob(x)?;
        Ok(if self.sign > 0.0 { p } else { 1.0 - p })
    }

    /// Gradient of `scalar * p_t(x)` with respect to `x`.
    fn input_gradient(&self, x: &[f64], scalar: f64) -> Result<Vec<f64>> {
        self.clf.input_gradient(x, scalar * self.sign)
    }
}

fn check_finite(grad: &[f64], what: &str) -> Result<()> {
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("{what} gradient")));
    }
    Ok(())
}

/// Latent-space traversal: encode, descend on the squared probability loss
/// through decoder and classifier, decode.
pub fn latent_cf(req: &CfRequest, clf: &Classifier, ae: &Autoencoder) -> Result<CfResult> {
    req.validate()?;
    if req.x0.len() != ae.in_dim() || ae.in_dim() != clf.in_dim() {
        return Err(Error::Shape(format!(
            "x0 len {}, autoencoder in_dim {}, classifier in_dim {}",
            req.x0.len(),
            ae.in_dim(),
            clf.in_dim()
        )));
    }
    let view = TargetView::new(clf, req.target_class);
    let start = Instant::now();

    let mut z = ae.encode(&req.x0)?;
    let mut x = ae.decode(&z)?;
    let mut prob = view.prob(&x)?;
    let mut prev_loss = prob_loss(req.target_p, prob).0;
    let mut iterations = 0;
    let mut loss_increases = 0;

    while (prob - req.target_p).abs() > req.tol && iterations < req.max_iters {
        let dloss_dprob = prob_loss(req.target_p, prob).1;
        // d loss / d f(D(z)) folds the target-class sign into the upstream;
        // the chain through the decoder runs on the raw classifier.
        let upstream = dloss_dprob * view.sign;
        let grad = composed_input_grad_vec(clf.net(), ae.decoder(), &z, &[upstream])?;
        check_finite(&grad, "latent")?;
        for (zi, gi) in z.iter_mut().zip(&grad) {
            *zi -= req.lr * gi;
        }
        x = ae.decode(&z)?;
        prob = view.prob(&x)?;
        iterations += 1;

        let loss = prob_loss(req.target_p, prob).0;
        if loss > prev_loss {
            loss_increases += 1;
        }
        prev_loss = loss;
    }

    Ok(CfResult {
        converged: (prob - req.target_p).abs() <= req.tol,
        x_cf: x,
        iterations,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        final_prob: prob,
        loss_increases,
    })
}

/// Pixel-space gradient descent, optionally projecting into `[0, 1]` after
/// every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureGdVariant {
    Plain,
    Clip,
}

/// Direct pixel-space descent on the squared probability loss.
pub fn feature_gd(
    req: &CfRequest,
    clf: &Classifier,
    variant: FeatureGdVariant,
) -> Result<CfResult> {
    // lambda 0 makes the MAD penalty vanish identically, so the clip variant
    // is exactly the MAD loop with zero weight; the plain variant skips the
    // projection.
    descend_in_feature_space(req, clf, None, 0.0, variant == FeatureGdVariant::Clip)
}

/// Per-feature median absolute deviation weights over a population.
#[derive(Debug, Clone, PartialEq)]
pub struct MadWeights {
    mad: Vec<f64>,
    epsilon: f64,
}

impl MadWeights {
    pub fn new(mad: Vec<f64>, epsilon: f64) -> Result<Self> {
        if mad.iter().any(|&m| m < 0.0 || !m.is_finite()) {
            return Err(Error::InvalidConfig("MAD values must be >= 0".into()));
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidConfig("MAD epsilon must be positive".into()));
        }
        Ok(Self { mad, epsilon })
    }

    pub fn mad(&self) -> &[f64] {
        &self.mad
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.mad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mad.is_empty()
    }

    /// Effective inverse weight `1 / max(MAD_k, epsilon)`.
    #[inline]
    pub fn inv_weight(&self, k: usize) -> f64 {
        1.0 / self.mad[k].max(self.epsilon)
    }
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Per-feature median absolute deviation over the whole training population.
pub fn compute_mad(data: &LabeledDataset) -> Result<MadWeights> {
    if data.is_empty() {
        return Err(Error::InsufficientData("empty MAD population".into()));
    }
    let pixels = data.image(0).len();
    let mut mad = Vec::with_capacity(pixels);
    let mut column = vec![0.0f64; data.len()];
    for k in 0..pixels {
        for (j, slot) in column.iter_mut().enumerate() {
            *slot = data.image(j)[k];
        }
        column.sort_by(f64::total_cmp);
        let med = median_sorted(&column);
        let mut deviations: Vec<f64> = column.iter().map(|v| (v - med).abs()).collect();
        deviations.sort_by(f64::total_cmp);
        mad.push(median_sorted(&deviations));
    }
    MadWeights::new(mad, MAD_EPSILON)
}

/// Inverse-MAD weighted L1 distance.
pub fn mad_distance(x: &[f64], x_prime: &[f64], w: &MadWeights) -> Result<f64> {
    if x.len() != x_prime.len() || x.len() != w.len() {
        return Err(Error::Shape(format!(
            "lengths {} / {} / {} differ",
            x.len(),
            x_prime.len(),
            w.len()
        )));
    }
    Ok(x
        .iter()
        .zip(x_prime)
        .enumerate()
        .map(|(k, (a, b))| (a - b).abs() * w.inv_weight(k))
        .sum())
}

/// Pixel-space descent on `prob_loss + lambda * mad_distance(x0, x)`, with
/// per-step clipping to `[0, 1]`.
///
/// The distance term's subgradient is 0 wherever `x_k == x0_k`; convergence
/// is judged on `|p_t(x) - target_p| <= tol` alone.
pub fn feature_gd_mad(
    req: &CfRequest,
    clf: &Classifier,
    w: &MadWeights,
    lambda: f64,
) -> Result<CfResult> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "lambda {lambda} must be a finite non-negative value"
        )));
    }
    if w.len() != req.x0.len() {
        return Err(Error::Shape(format!(
            "MAD weights len {} does not match x0 len {}",
            w.len(),
            req.x0.len()
        )));
    }
    descend_in_feature_space(req, clf, Some(w), lambda, true)
}

/// Shared pixel-space loop behind [`feature_gd`] and [`feature_gd_mad`].
fn descend_in_feature_space(
    req: &CfRequest,
    clf: &Classifier,
    mad: Option<&MadWeights>,
    lambda: f64,
    clip: bool,
) -> Result<CfResult> {
    req.validate()?;
    if req.x0.len() != clf.in_dim() {
        return Err(Error::Shape(format!(
            "x0 len {} does not match classifier in_dim {}",
            req.x0.len(),
            clf.in_dim()
        )));
    }
    let view = TargetView::new(clf, req.target_class);
    let start = Instant::now();

    let mut x = req.x0.clone();
    let mut prob = view.prob(&x)?;
    let objective = |x: &[f64], prob: f64| -> f64 {
        let mut loss = prob_loss(req.target_p, prob).0;
        if let Some(w) = mad {
            if lambda > 0.0 {
                loss += lambda
                    * x.iter()
                        .zip(&req.x0)
                        .enumerate()
                        .map(|(k, (a, b))| (a - b).abs() * w.inv_weight(k))
                        .sum::<f64>();
            }
        }
        loss
    };
    let mut prev_loss = objective(&x, prob);
    let mut iterations = 0;
    let mut loss_increases = 0;

    while (prob - req.target_p).abs() > req.tol && iterations < req.max_iters {
        let dloss_dprob = prob_loss(req.target_p, prob).1;
        let mut grad = view.input_gradient(&x, dloss_dprob)?;
        if let Some(w) = mad {
            for (k, g) in grad.iter_mut().enumerate() {
                let d = x[k] - req.x0[k];
                if d != 0.0 {
                    *g += lambda * d.signum() * w.inv_weight(k);
                }
            }
        }
        check_finite(&grad, "feature")?;
        for (xi, gi) in x.iter_mut().zip(&grad) {
            *xi -= req.lr * gi;
            if clip {
                *xi = xi.clamp(0.0, 1.0);
            }
        }
        prob = view.prob(&x)?;
        iterations += 1;

        let loss = objective(&x, prob);
        if loss > prev_loss {
            loss_increases += 1;
        }
        prev_loss = loss;
    }

    Ok(CfResult {
        converged: (prob - req.target_p).abs() <= req.tol,
        x_cf: x,
        iterations,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        final_prob: prob,
        loss_increases,
    })
}

/// Mean latent encoding of the `k` target-class training samples nearest to
/// the query's encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    prototype: Vec<f64>,
    k: usize,
}

impl PrototypeSet {
    pub fn prototype(&self) -> &[f64] {
        &self.prototype
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Selects the `k` encodings nearest to `z0` (ties broken by position)
    /// and averages them. [`compute_prototype`] delegates here; sweeps that
    /// precompute the population encodings can call it directly.
    pub fn from_encodings(z0: &[f64], encodings: &[Vec<f64>], k: usize) -> Result<PrototypeSet> {
        if k == 0 {
            return Err(Error::InvalidConfig("prototype k must be positive".into()));
        }
        if encodings.len() < k {
            return Err(Error::InsufficientData(format!(
                "need {k} target-class samples, have {}",
                encodings.len()
            )));
        }
        let latent = z0.len();
        let mut ranked: Vec<(f64, &Vec<f64>)> = encodings
            .iter()
            .map(|z| {
                debug_assert_eq!(z.len(), latent);
                let dist2: f64 = z.iter().zip(z0).map(|(a, b)| (a - b) * (a - b)).sum();
                (dist2, z)
            })
            .collect();
        // Stable sort keeps dataset order among equal distances.
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut prototype = vec![0.0; latent];
        for (_, z) in ranked.iter().take(k) {
            for (p, v) in prototype.iter_mut().zip(z.iter()) {
                *p += v;
            }
        }
        for p in &mut prototype {
            *p /= k as f64;
        }
        Ok(PrototypeSet { prototype, k })
    }
}

/// Encodes every target-class training sample, keeps the `k` nearest to
/// `E(x0)` in Euclidean latent distance (ties broken by dataset index), and
/// averages them.
pub fn compute_prototype(
    x0: &[f64],
    target_class: u8,
    data: &LabeledDataset,
    ae: &Autoencoder,
    k: usize,
) -> Result<PrototypeSet> {
    let z0 = ae.encode(x0)?;
    let encodings: Vec<Vec<f64>> = data
        .class_images(target_class)
        .map(|img| ae.encode(img))
        .collect::<Result<_>>()?;
    PrototypeSet::from_encodings(&z0, &encodings, k)
}

/// Weights for the composite prototype objective
/// `c*L_pred + beta*L1 + L2 + w_ae*L_AE + w_proto*L_proto`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrototypeLossWeights {
    pub c: f64,
    pub beta: f64,
    pub w_ae: f64,
    pub w_proto: f64,
}

impl Default for PrototypeLossWeights {
    fn default() -> Self {
        Self {
            c: 1.0,
            beta: 0.1,
            w_ae: 0.1,
            w_proto: 0.1,
        }
    }
}

impl PrototypeLossWeights {
    fn validate(&self) -> Result<()> {
        let all = [self.c, self.beta, self.w_ae, self.w_proto];
        if all.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "prototype loss weights must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Composite prototype objective and its full (sub)gradient in `delta`.
///
/// `x = clip(x0 + delta, 0, 1)`; the hinge prediction term is
/// `c * max(0, target_p - p_t(x))`, L1 uses `sign(delta)` (0 at 0), and the
/// clip's chain rule zeroes pixel gradients wherever `x0 + delta` leaves
/// `[0, 1]`. Exposed so the optimizer's gradients can be checked against
/// finite differences.
pub fn prototype_loss(
    req: &CfRequest,
    delta: &[f64],
    clf: &Classifier,
    ae: &Autoencoder,
    proto: &PrototypeSet,
    lw: &PrototypeLossWeights,
) -> Result<(f64, Vec<f64>)> {
    let (x, mask) = clip_with_mask(&req.x0, delta);
    let view = TargetView::new(clf, req.target_class);
    let prob = view.prob(&x)?;

    let (mut loss, mut grad_x) = smooth_terms(req, &x, prob, &view, ae, proto, lw)?;
    // Chain through the clip, then add the delta-direct elastic-net terms.
    let mut grad: Vec<f64> = grad_x
        .drain(..)
        .zip(&mask)
        .map(|(g, &m)| if m { g } else { 0.0 })
        .collect();
    for (k, &d) in delta.iter().enumerate() {
        loss += lw.beta * d.abs() + d * d;
        grad[k] += lw.beta * d.signum() + 2.0 * d;
    }
    Ok((loss, grad))
}

/// Smooth composite pieces (`c*L_pred + w_ae*L_AE + w_proto*L_proto`) and
/// their gradient with respect to `x`.
fn smooth_terms(
    req: &CfRequest,
    x: &[f64],
    prob: f64,
    view: &TargetView,
    ae: &Autoencoder,
    proto: &PrototypeSet,
    lw: &PrototypeLossWeights,
) -> Result<(f64, Vec<f64>)> {
    let n = x.len();
    let mut loss = 0.0;
    let mut grad = vec![0.0; n];

    if lw.c > 0.0 && prob < req.target_p {
        loss += lw.c * (req.target_p - prob);
        let g = view.input_gradient(x, -lw.c)?;
        for (acc, gi) in grad.iter_mut().zip(&g) {
            *acc += gi;
        }
    }

    if lw.w_ae > 0.0 {
        let recon = ae.reconstruct(x)?;
        let residual: Vec<f64> = x.iter().zip(&recon).map(|(a, r)| a - r).collect();
        loss += lw.w_ae * residual.iter().map(|d| d * d).sum::<f64>();
        // d/dx w_ae*||x - D(E(x))||^2 = 2 w_ae (x - r) - J^T 2 w_ae (x - r)
        let upstream: Vec<f64> = residual.iter().map(|d| 2.0 * lw.w_ae * d).collect();
        let pullback = composed_input_grad_vec(ae.decoder(), ae.encoder(), x, &upstream)?;
        for ((acc, u), pb) in grad.iter_mut().zip(&upstream).zip(&pullback) {
            *acc += u - pb;
        }
    }

    if lw.w_proto > 0.0 {
        let z = ae.encode(x)?;
        let residual: Vec<f64> = z.iter().zip(proto.prototype()).map(|(a, p)| a - p).collect();
        loss += lw.w_proto * residual.iter().map(|d| d * d).sum::<f64>();
        let upstream: Vec<f64> = residual.iter().map(|d| 2.0 * lw.w_proto * d).collect();
        let pullback = ae.encoder().input_gradient(x, &upstream)?;
        for (acc, pb) in grad.iter_mut().zip(&pullback) {
            *acc += pb;
        }
    }

    Ok((loss, grad))
}

fn clip_with_mask(x0: &[f64], delta: &[f64]) -> (Vec<f64>, Vec<bool>) {
    let mut x = Vec::with_capacity(x0.len());
    let mut mask = Vec::with_capacity(x0.len());
    for (a, d) in x0.iter().zip(delta) {
        let raw = a + d;
        mask.push((0.0..=1.0).contains(&raw));
        x.push(raw.clamp(0.0, 1.0));
    }
    (x, mask)
}

/// Prototype-guided descent over a pixel perturbation `delta`.
///
/// The smooth terms step by their gradient; the L1 term is applied as a
/// proximal shrink of `delta` toward 0 each iteration, which is what keeps
/// untouched pixels exactly untouched. Converged as soon as the target-class
/// probability reaches `target_p` (one-sided); otherwise runs to `max_iters`.
pub fn prototype_cf(
    req: &CfRequest,
    clf: &Classifier,
    ae: &Autoencoder,
    proto: &PrototypeSet,
    lw: &PrototypeLossWeights,
) -> Result<CfResult> {
    req.validate()?;
    lw.validate()?;
    if req.x0.len() != clf.in_dim() || req.x0.len() != ae.in_dim() {
        return Err(Error::Shape(format!(
            "x0 len {}, classifier in_dim {}, autoencoder in_dim {}",
            req.x0.len(),
            clf.in_dim(),
            ae.in_dim()
        )));
    }
    if proto.prototype().len() != ae.latent_dim() {
        return Err(Error::Shape(format!(
            "prototype dim {} does not match latent dim {}",
            proto.prototype().len(),
            ae.latent_dim()
        )));
    }
    let view = TargetView::new(clf, req.target_class);
    let start = Instant::now();

    let mut delta = vec![0.0; req.x0.len()];
    let (mut x, mut mask) = clip_with_mask(&req.x0, &delta);
    let mut prob = view.prob(&x)?;
    let mut iterations = 0;
    let mut loss_increases = 0;
    let mut prev_loss = f64::INFINITY;
    let shrink = req.lr * lw.beta;

    while prob < req.target_p && iterations < req.max_iters {
        let (smooth_loss, grad_x) = smooth_terms(req, &x, prob, &view, ae, proto, lw)?;
        check_finite(&grad_x, "prototype")?;

        let mut loss = smooth_loss;
        for (k, d) in delta.iter_mut().enumerate() {
            let g = if mask[k] { grad_x[k] } else { 0.0 } + 2.0 * *d;
            let stepped = *d - req.lr * g;
            // proximal step for beta*|delta|_1
            *d = if stepped > shrink {
                stepped - shrink
            } else if stepped < -shrink {
                stepped + shrink
            } else {
                0.0
            };
            loss += lw.beta * d.abs() + *d * *d;
        }
        let clipped = clip_with_mask(&req.x0, &delta);
        x = clipped.0;
        mask = clipped.1;
        prob = view.prob(&x)?;
        iterations += 1;

        if loss > prev_loss {
            loss_increases += 1;
        }
        prev_loss = loss;
    }

    Ok(CfResult {
        converged: prob >= req.target_p,
        x_cf: x,
        iterations,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        final_prob: prob,
        loss_increases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{train_classifier, TrainConfig};
    use crate::ndnet::{Activation, DenseLayer, Network};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_layer(
        rng: &mut ChaCha8Rng,
        in_dim: usize,
        out_dim: usize,
        act: Activation,
    ) -> DenseLayer {
        let scale = (2.0 / in_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-scale..scale))
            .collect();
        let bias = (0..out_dim).map(|_| rng.gen_range(-0.1..0.1)).collect();
        DenseLayer::new(in_dim, out_dim, weights, bias, act).unwrap()
    }

    /// Small untrained classifier + autoencoder pair over `dim` pixels.
    fn tiny_models(seed: u64, dim: usize, latent: usize) -> (Classifier, Autoencoder) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clf = Classifier::from_network(
            Network::new(vec![
                random_layer(&mut rng, dim, 6, Activation::Relu),
                random_layer(&mut rng, 6, 1, Activation::Sigmoid),
            ])
            .unwrap(),
        )
        .unwrap();
        let encoder = Network::new(vec![
            random_layer(&mut rng, dim, 5, Activation::Relu),
            random_layer(&mut rng, 5, latent, Activation::Identity),
        ])
        .unwrap();
        let decoder = Network::new(vec![
            random_layer(&mut rng, latent, 5, Activation::Relu),
            random_layer(&mut rng, 5, dim, Activation::Sigmoid),
        ])
        .unwrap();
        (clf, Autoencoder::from_networks(encoder, decoder).unwrap())
    }

    fn toy_dataset() -> LabeledDataset {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for i in 0..6 {
            let o = i as f64 * 0.02;
            images.push(vec![0.1 + o, 0.15, 0.1, 0.12 + o]);
            labels.push(0);
            images.push(vec![0.85 - o, 0.9, 0.88, 0.8 - o]);
            labels.push(1);
        }
        LabeledDataset::new(images, labels, 2).unwrap()
    }

    /// Lightly trained so outputs stay away from sigmoid saturation; the
    /// generators need usable gradients at the start points.
    fn trained_toy_classifier(seed: u64) -> Classifier {
        train_classifier(
            &toy_dataset(),
            &TrainConfig {
                epochs: 40,
                batch_size: 4,
                lr: 0.3,
                seed,
            },
        )
        .unwrap()
    }

    #[test]
    fn prob_loss_at_target_is_zero() {
        let (loss, grad) = prob_loss(0.5, 0.5);
        assert_eq!(loss, 0.0);
        assert_eq!(grad, 0.0);
    }

    #[test]
    fn prob_loss_arithmetic() {
        let (loss, grad) = prob_loss(0.5, 0.9);
        assert!((loss - 0.16).abs() < 1e-15);
        assert!((grad - 0.8).abs() < 1e-15);
    }

    #[test]
    fn prob_loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = 1e-7;
        for _ in 0..20 {
            let target = rng.gen_range(0.05..0.95);
            let prob = rng.gen_range(0.05..0.95);
            let (_, grad) = prob_loss(target, prob);
            let numeric =
                (prob_loss(target, prob + h).0 - prob_loss(target, prob - h).0) / (2.0 * h);
            assert!((grad - numeric).abs() < 1e-6, "{grad} vs {numeric}");
        }
    }

    #[test]
    fn latent_cf_already_within_tol_takes_zero_iterations() {
        let (clf, ae) = tiny_models(2, 4, 3);
        let x0 = vec![0.3, 0.6, 0.2, 0.8];
        let recon = ae.reconstruct(&x0).unwrap();
        let start_prob = clf.prob(&recon).unwrap();
        assert!(start_prob > 0.01 && start_prob < 0.99);

        let req = CfRequest {
            x0: x0.clone(),
            target_class: 1,
            target_p: start_prob,
            tol: 0.005,
            lr: 0.05,
            max_iters: 100,
        };
        let result = latent_cf(&req, &clf, &ae).unwrap();
        assert!(result.converged);
        assert_eq!(result.iterations, 0);
        assert_eq!(result.x_cf, recon);
        assert_eq!(result.final_prob, start_prob);
    }

    #[test]
    fn latent_cf_zero_budget_reports_unconverged_decode() {
        let (clf, ae) = tiny_models(3, 4, 3);
        let x0 = vec![0.1, 0.9, 0.4, 0.5];
        let recon = ae.reconstruct(&x0).unwrap();
        let start_prob = clf.prob(&recon).unwrap();
        // aim well away from the starting probability
        let target = if start_prob < 0.5 { 0.9 } else { 0.1 };

        let req = CfRequest {
            x0,
            target_class: 1,
            target_p: target,
            tol: 0.01,
            lr: 0.05,
            max_iters: 0,
        };
        let result = latent_cf(&req, &clf, &ae).unwrap();
        assert!(!result.converged);
        assert_eq!(result.iterations, 0);
        assert_eq!(result.x_cf, recon);
    }

    #[test]
    fn feature_gd_already_within_tol_returns_x0() {
        let (clf, _) = tiny_models(4, 4, 3);
        let x0 = vec![0.5, 0.5, 0.5, 0.5];
        let p = clf.prob(&x0).unwrap();
        let req = CfRequest {
            x0: x0.clone(),
            target_class: 1,
            target_p: p,
            tol: 0.005,
            lr: 0.1,
            max_iters: 50,
        };
        for variant in [FeatureGdVariant::Plain, FeatureGdVariant::Clip] {
            let result = feature_gd(&req, &clf, variant).unwrap();
            assert!(result.converged);
            assert_eq!(result.iterations, 0);
            assert_eq!(result.x_cf, x0);
        }
    }

    #[test]
    fn feature_gd_converges_on_trained_classifier() {
        let clf = trained_toy_classifier(7);
        let x0 = vec![0.1, 0.15, 0.1, 0.12]; // class 0 exemplar
        assert!(clf.prob(&x0).unwrap() < 0.5);
        let req = CfRequest::feature_space(x0, 1, 0.5);
        for variant in [FeatureGdVariant::Plain, FeatureGdVariant::Clip] {
            let result = feature_gd(&req, &clf, variant).unwrap();
            assert!(result.converged, "variant {variant:?} did not converge");
            assert!((result.final_prob - 0.5).abs() <= req.tol);
            assert!(result.iterations > 0);
        }
    }

    #[test]
    fn feature_gd_clip_variant_stays_in_unit_box() {
        let clf = trained_toy_classifier(8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x0: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
            let target_class = rng.gen_range(0..2) as u8;
            let req = CfRequest::feature_space(x0, target_class, 0.7);
            let result = feature_gd(&req, &clf, FeatureGdVariant::Clip).unwrap();
            assert!(result
                .x_cf
                .iter()
                .all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn feature_gd_works_toward_class_zero() {
        let clf = trained_toy_classifier(10);
        let x0 = vec![0.85, 0.9, 0.88, 0.8]; // class 1 exemplar
        assert!(clf.prob(&x0).unwrap() > 0.5);
        // target class 0 at probability 0.8 means raw f(x) near 0.2
        let req = CfRequest::feature_space(x0, 0, 0.8);
        let result = feature_gd(&req, &clf, FeatureGdVariant::Clip).unwrap();
        assert!(result.converged);
        assert!((result.final_prob - 0.8).abs() <= req.tol);
        assert!((clf.prob(&result.x_cf).unwrap() - 0.2).abs() <= req.tol);
    }

    #[test]
    fn mad_of_constant_feature_is_zero() {
        let images = vec![
            vec![0.5, 0.1, 0.0, 0.3],
            vec![0.5, 0.9, 0.0, 0.35],
            vec![0.5, 0.4, 0.0, 0.25],
        ];
        let data = LabeledDataset::new(images, vec![0, 1, 0], 2).unwrap();
        let w = compute_mad(&data).unwrap();
        assert_eq!(w.mad()[0], 0.0);
        assert_eq!(w.mad()[2], 0.0);
        assert!(w.mad()[1] > 0.0);
    }

    #[test]
    fn mad_of_one_to_five_column_is_one() {
        // Eq-by-hand: median 3, deviations [2,1,0,1,2], MAD 1. Scaled into
        // [0,1] by 1/5 so the dataset invariant holds.
        let column = [1.0, 2.0, 3.0, 4.0, 5.0];
        let images: Vec<Vec<f64>> = column.iter().map(|&v| vec![v / 5.0]).collect();
        let data = LabeledDataset::new(images, vec![0; 5], 1).unwrap();
        let w = compute_mad(&data).unwrap();
        assert!((w.mad()[0] - 1.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn mad_matches_brute_force_oracle() {
        // Oracle: median by repeated minimum extraction, sharing no sorting
        // code with the implementation. The extracted values come out
        // ascending, so the (n/2+1)-th extraction is the upper median.
        fn oracle_median(values: &[f64]) -> f64 {
            let mut pool = values.to_vec();
            let mut extracted = Vec::new();
            while extracted.len() < values.len() / 2 + 1 {
                let (mi, _) = pool
                    .iter()
                    .enumerate()
                    .fold((0, f64::INFINITY), |acc, (i, &v)| {
                        if v < acc.1 {
                            (i, v)
                        } else {
                            acc
                        }
                    });
                extracted.push(pool.swap_remove(mi));
            }
            if values.len() % 2 == 1 {
                *extracted.last().unwrap()
            } else {
                0.5 * (extracted[extracted.len() - 2] + extracted[extracted.len() - 1])
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(1..10);
            let side = rng.gen_range(1..4usize);
            let pixels = side * side;
            let images: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..pixels).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect();
            let data = LabeledDataset::new(images.clone(), vec![0; n], side).unwrap();
            let w = compute_mad(&data).unwrap();
            for k in 0..pixels {
                let column: Vec<f64> = images.iter().map(|img| img[k]).collect();
                let med = oracle_median(&column);
                let devs: Vec<f64> = column.iter().map(|v| (v - med).abs()).collect();
                let want = oracle_median(&devs);
                assert!(
                    (w.mad()[k] - want).abs() < 1e-12,
                    "pixel {k}: {} vs {want}",
                    w.mad()[k]
                );
            }
        }
    }

    #[test]
    fn mad_distance_axioms_and_hand_example() {
        let w = MadWeights::new(vec![1.0, 0.5, 0.2], 1e-6).unwrap();
        let x = vec![0.1, 0.2, 0.3];
        assert_eq!(mad_distance(&x, &x, &w).unwrap(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let a: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
            let dab = mad_distance(&a, &b, &w).unwrap();
            let dba = mad_distance(&b, &a, &w).unwrap();
            assert!((dab - dba).abs() < 1e-15, "symmetry");
            let dac = mad_distance(&a, &c, &w).unwrap();
            let dcb = mad_distance(&c, &b, &w).unwrap();
            assert!(dab <= dac + dcb + 1e-12, "triangle inequality");
            assert!(dab >= 0.0);
        }

        // one feature differing by 0.5 with MAD 1
        let w1 = MadWeights::new(vec![1.0, 1.0], 1e-6).unwrap();
        let d = mad_distance(&[0.2, 0.4], &[0.7, 0.4], &w1).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mad_lambda_zero_matches_clip_variant_exactly() {
        let clf = trained_toy_classifier(13);
        let w = compute_mad(&toy_dataset()).unwrap();
        let x0 = vec![0.1, 0.15, 0.1, 0.12];
        let req = CfRequest::feature_space(x0, 1, 0.6);
        let mad_run = feature_gd_mad(&req, &clf, &w, 0.0).unwrap();
        let clip_run = feature_gd(&req, &clf, FeatureGdVariant::Clip).unwrap();
        assert_eq!(mad_run.x_cf, clip_run.x_cf);
        assert_eq!(mad_run.iterations, clip_run.iterations);
        assert_eq!(mad_run.final_prob, clip_run.final_prob);
    }

    #[test]
    fn mad_already_within_tol_takes_zero_iterations() {
        let (clf, _) = tiny_models(14, 4, 3);
        let x0 = vec![0.4, 0.6, 0.5, 0.5];
        let p = clf.prob(&x0).unwrap();
        let w = MadWeights::new(vec![0.1; 4], 1e-6).unwrap();
        let req = CfRequest {
            x0: x0.clone(),
            target_class: 1,
            target_p: p,
            tol: 0.005,
            lr: 0.1,
            max_iters: 100,
        };
        let result = feature_gd_mad(&req, &clf, &w, 0.5).unwrap();
        assert_eq!(result.iterations, 0);
        assert_eq!(result.x_cf, x0);
    }

    #[test]
    fn prototype_k1_equals_nearest_encoding() {
        let (_, ae) = tiny_models(15, 4, 3);
        let data = toy_dataset();
        let x0 = data.image(0);
        let proto = compute_prototype(x0, 1, &data, &ae, 1).unwrap();

        let z0 = ae.encode(x0).unwrap();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for img in data.class_images(1) {
            let z = ae.encode(img).unwrap();
            let d: f64 = z.iter().zip(&z0).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                best = Some((d, z));
            }
        }
        assert_eq!(proto.prototype(), best.unwrap().1.as_slice());
    }

    #[test]
    fn prototype_full_k_is_class_mean() {
        let (_, ae) = tiny_models(16, 4, 3);
        let data = toy_dataset();
        let count = data.class_count(1);
        let proto = compute_prototype(data.image(0), 1, &data, &ae, count).unwrap();

        let mut mean = vec![0.0; ae.latent_dim()];
        for img in data.class_images(1) {
            for (m, z) in mean.iter_mut().zip(ae.encode(img).unwrap()) {
                *m += z;
            }
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        for (p, m) in proto.prototype().iter().zip(&mean) {
            assert!((p - m).abs() < 1e-12);
        }
    }

    #[test]
    fn prototype_brute_force_on_hand_placed_points() {
        let (_, ae) = tiny_models(17, 4, 3);
        let data = toy_dataset();
        let x0 = data.image(1);
        let k = 2;
        let proto = compute_prototype(x0, 0, &data, &ae, k).unwrap();

        // exhaustive: enumerate all pairs, pick the pair minimizing summed
        // distance ranks == the two nearest
        let z0 = ae.encode(x0).unwrap();
        let mut dz: Vec<(f64, Vec<f64>)> = data
            .class_images(0)
            .map(|img| {
                let z = ae.encode(img).unwrap();
                let d: f64 = z.iter().zip(&z0).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, z)
            })
            .collect();
        dz.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut want = vec![0.0; ae.latent_dim()];
        for (_, z) in dz.iter().take(k) {
            for (w, v) in want.iter_mut().zip(z) {
                *w += v / k as f64;
            }
        }
        for (p, m) in proto.prototype().iter().zip(&want) {
            assert!((p - m).abs() < 1e-12);
        }
    }

    #[test]
    fn prototype_requires_enough_samples() {
        let (_, ae) = tiny_models(18, 4, 3);
        let data = toy_dataset();
        let too_many = data.class_count(1) + 1;
        assert!(matches!(
            compute_prototype(data.image(0), 1, &data, &ae, too_many),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn prototype_cf_pure_l2_keeps_delta_zero() {
        let (clf, ae) = tiny_models(19, 4, 3);
        let data = toy_dataset();
        let proto = compute_prototype(data.image(0), 1, &data, &ae, 2).unwrap();
        let lw = PrototypeLossWeights {
            c: 0.0,
            beta: 0.0,
            w_ae: 0.0,
            w_proto: 0.0,
        };
        let x0 = data.image(0).to_vec();
        let p0 = clf.prob(&x0).unwrap();

        for (target_p, expect_converged) in [(p0 * 0.5, true), ((p0 + 1.0) / 2.0, false)] {
            let req = CfRequest {
                x0: x0.clone(),
                target_class: 1,
                target_p,
                tol: 0.001,
                lr: 0.1,
                max_iters: 40,
            };
            let result = prototype_cf(&req, &clf, &ae, &proto, &lw).unwrap();
            assert_eq!(result.converged, expect_converged);
            assert_eq!(result.x_cf, x0, "delta must stay zero");
            if expect_converged {
                assert_eq!(result.iterations, 0);
            } else {
                assert_eq!(result.iterations, req.max_iters);
            }
        }
    }

    #[test]
    fn prototype_loss_gradient_matches_finite_differences() {
        let (clf, ae) = tiny_models(20, 4, 3);
        let data = toy_dataset();
        let x0 = vec![0.45, 0.55, 0.5, 0.48];
        let proto = compute_prototype(&x0, 1, &data, &ae, 3).unwrap();
        let lw = PrototypeLossWeights::default();
        let req = CfRequest {
            x0,
            target_class: 1,
            target_p: 0.9,
            tol: 0.01,
            lr: 0.1,
            max_iters: 10,
        };

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h = 1e-6;
        for _ in 0..10 {
            // keep delta away from the L1 kink and the clip boundary
            let delta: Vec<f64> = (0..4)
                .map(|_| {
                    let mag = rng.gen_range(0.02..0.15);
                    if rng.gen_bool(0.5) {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect();
            let (_, analytic) = prototype_loss(&req, &delta, &clf, &ae, &proto, &lw).unwrap();
            for i in 0..delta.len() {
                let mut d = delta.clone();
                d[i] += h;
                let plus = prototype_loss(&req, &d, &clf, &ae, &proto, &lw).unwrap().0;
                d[i] -= 2.0 * h;
                let minus = prototype_loss(&req, &d, &clf, &ae, &proto, &lw).unwrap().0;
                let numeric = (plus - minus) / (2.0 * h);
                let diff = (analytic[i] - numeric).abs();
                let scale = analytic[i].abs().max(numeric.abs()).max(1e-3);
                assert!(
                    diff / scale < 1e-4,
                    "coord {i}: analytic {} vs numeric {numeric}",
                    analytic[i]
                );
            }
        }
    }

    #[test]
    fn prototype_cf_converges_one_sided() {
        let clf = trained_toy_classifier(22);
        let (_, ae) = tiny_models(23, 4, 3);
        let data = toy_dataset();
        let x0 = data.image(0).to_vec(); // class 0
        let proto = compute_prototype(&x0, 1, &data, &ae, 3).unwrap();
        let req = CfRequest::feature_space(x0, 1, 0.5);
        // The toy classifier is confident, so its hinge gradient starts tiny;
        // a heavier prediction weight and lighter L1 let the 4-pixel search
        // escape zero. The default weights are tuned for the image-scale
        // models, not this toy.
        let lw = PrototypeLossWeights {
            c: 20.0,
            beta: 0.01,
            w_ae: 0.05,
            w_proto: 0.05,
        };
        let result = prototype_cf(&req, &clf, &ae, &proto, &lw).unwrap();
        assert!(result.converged, "prototype did not converge: {result:?}");
        assert!(result.final_prob >= 0.5);
        assert!(result.x_cf.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn generators_are_deterministic_modulo_time() {
        let clf = trained_toy_classifier(24);
        let (_, ae) = tiny_models(25, 4, 3);
        let data = toy_dataset();
        let x0 = data.image(0).to_vec();
        let w = compute_mad(&data).unwrap();
        let proto = compute_prototype(&x0, 1, &data, &ae, 2).unwrap();
        let req = CfRequest::feature_space(x0.clone(), 1, 0.5);
        let lreq = CfRequest::latent_space(x0, 1, 0.5);

        let strip = |mut r: CfResult| {
            r.elapsed_seconds = 0.0;
            r
        };
        let lw = PrototypeLossWeights::default();
        assert_eq!(
            strip(latent_cf(&lreq, &clf, &ae).unwrap()),
            strip(latent_cf(&lreq, &clf, &ae).unwrap())
        );
        assert_eq!(
            strip(feature_gd(&req, &clf, FeatureGdVariant::Plain).unwrap()),
            strip(feature_gd(&req, &clf, FeatureGdVariant::Plain).unwrap())
        );
        assert_eq!(
            strip(feature_gd_mad(&req, &clf, &w, 0.01).unwrap()),
            strip(feature_gd_mad(&req, &clf, &w, 0.01).unwrap())
        );
        assert_eq!(
            strip(prototype_cf(&req, &clf, &ae, &proto, &lw).unwrap()),
            strip(prototype_cf(&req, &clf, &ae, &proto, &lw).unwrap())
        );
    }

    #[test]
    fn convergence_flag_matches_contract() {
        let clf = trained_toy_classifier(26);
        let (_, ae) = tiny_models(27, 4, 3);
        let data = toy_dataset();
        let w = compute_mad(&data).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(28);

        for _ in 0..10 {
            let x0: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
            let target_class = rng.gen_range(0..2) as u8;
            let target_p = rng.gen_range(0.3..0.9);
            let mut req = CfRequest::feature_space(x0.clone(), target_class, target_p);
            req.max_iters = rng.gen_range(0..400);

            for result in [
                feature_gd(&req, &clf, FeatureGdVariant::Plain).unwrap(),
                feature_gd(&req, &clf, FeatureGdVariant::Clip).unwrap(),
                feature_gd_mad(&req, &clf, &w, 0.002).unwrap(),
                latent_cf(&req, &clf, &ae).unwrap(),
            ] {
                if result.converged {
                    assert!((result.final_prob - target_p).abs() <= req.tol);
                } else {
                    assert!((result.final_prob - target_p).abs() > req.tol);
                }
            }

            let proto = compute_prototype(&x0, target_class, &data, &ae, 2).unwrap();
            let presult =
                prototype_cf(&req, &clf, &ae, &proto, &PrototypeLossWeights::default()).unwrap();
            if presult.converged {
                assert!(presult.final_prob >= target_p);
            } else {
                assert!(presult.final_prob < target_p);
            }
        }
    }

    #[test]
    fn invalid_requests_are_rejected() {
        let (clf, ae) = tiny_models(29, 4, 3);
        let base = CfRequest::feature_space(vec![0.5; 4], 1, 0.5);

        let mut bad = base.clone();
        bad.target_p = 1.0;
        assert!(latent_cf(&bad, &clf, &ae).is_err());

        let mut bad = base.clone();
        bad.tol = 0.6; // >= min(p, 1-p)
        assert!(feature_gd(&bad, &clf, FeatureGdVariant::Plain).is_err());

        let mut bad = base.clone();
        bad.target_class = 2;
        assert!(feature_gd(&bad, &clf, FeatureGdVariant::Clip).is_err());

        let mut bad = base;
        bad.x0 = vec![0.5; 3]; // wrong length
        assert!(matches!(
            latent_cf(&bad, &clf, &ae).unwrap_err(),
            Error::Shape(_)
        ));
    }

    #[test]
    fn small_lr_keeps_loss_monotone() {
        let clf = trained_toy_classifier(30);
        // start between the clusters where the classifier is uncommitted
        let x0 = vec![0.5, 0.5, 0.5, 0.5];
        let p0 = clf.prob(&x0).unwrap();
        let target_p = if p0 < 0.5 { p0 + 0.3 } else { p0 - 0.3 };
        let mut req = CfRequest::feature_space(x0, 1, target_p);
        req.lr = 0.01;
        let result = feature_gd(&req, &clf, FeatureGdVariant::Plain).unwrap();
        assert!(result.converged, "{result:?}");
        assert_eq!(result.loss_increases, 0);
    }
}
