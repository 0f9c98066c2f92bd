//! The binary classifier and autoencoder used by every generator: training,
//! evaluation, and a versioned on-disk format.
//!
//! Architectures are dense stacks sized for desk-scale runs:
//! classifier `in -> 128 relu -> 32 relu -> 1 sigmoid`, autoencoder
//! `in -> 128 relu -> latent identity` with the mirrored decoder ending in a
//! sigmoid so reconstructions stay in `(0, 1)`.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataio::LabeledDataset;
use crate::ndnet::{Activation, DenseLayer, GradientBundle, Network, Sgd};
use crate::{Error, Result};

/// Classifier output is clamped into `(0, 1)` by this margin so that
/// log-losses and probability preconditions stay well-defined even when the
/// sigmoid saturates in f64.
pub const PROB_CLAMP: f64 = 1e-12;

const CLASSIFIER_HIDDEN: [usize; 2] = [128, 32];
const AUTOENCODER_HIDDEN: usize = 128;

/// Training hyperparameters. All fields must be positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.lr <= 0.0 || !self.lr.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "epochs, batch_size, and lr must be positive (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// Binary classifier `f`: a dense network ending in a single sigmoid unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    net: Network,
}

impl Classifier {
    pub fn from_network(net: Network) -> Result<Self> {
        if net.out_dim() != 1 {
            return Err(Error::Shape(format!(
                "classifier out_dim must be 1, got {}",
                net.out_dim()
            )));
        }
        let last = net.layers().last().unwrap();
        if last.activation() != Activation::Sigmoid {
            return Err(Error::InvalidConfig(
                "classifier must end in a sigmoid".into(),
            ));
        }
        Ok(Self { net })
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn in_dim(&self) -> usize {
        self.net.in_dim()
    }

    /// Class-1 probability, strictly inside `(0, 1)`.
    pub fn prob(&self, x: &[f64]) -> Result<f64> {
        let out = self.net.forward_vec(x)?;
        Ok(out[0].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP))
    }

    /// Gradient of `scalar_upstream * f(x)` with respect to `x`.
    pub fn input_gradient(&self, x: &[f64], scalar_upstream: f64) -> Result<Vec<f64>> {
        self.net.input_gradient(x, &[scalar_upstream])
    }
}

/// Autoencoder `(E, D)` with a deterministic latent bottleneck.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    encoder: Network,
    decoder: Network,
}

impl Autoencoder {
    pub fn from_networks(encoder: Network, decoder: Network) -> Result<Self> {
        if encoder.out_dim() != decoder.in_dim() {
            return Err(Error::Shape(format!(
                "encoder out_dim {} does not match decoder in_dim {}",
                encoder.out_dim(),
                decoder.in_dim()
            )));
        }
        if encoder.in_dim() != decoder.out_dim() {
            return Err(Error::Shape(format!(
                "encoder in_dim {} does not match decoder out_dim {}",
                encoder.in_dim(),
                decoder.out_dim()
            )));
        }
        if decoder.layers().last().unwrap().activation() != Activation::Sigmoid {
            return Err(Error::InvalidConfig(
                "decoder must end in a sigmoid".into(),
            ));
        }
        Ok(Self { encoder, decoder })
    }

    pub fn encoder(&self) -> &Network {
        &self.encoder
    }

    pub fn decoder(&self) -> &Network {
        &self.decoder
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.out_dim()
    }

    pub fn in_dim(&self) -> usize {
        self.encoder.in_dim()
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.encoder.forward_vec(x)
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.decoder.forward_vec(z)
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.decode(&self.encode(x)?)
    }
}

/// Xavier/Glorot uniform layer init: weights in `±sqrt(6/(fan_in+fan_out))`,
/// zero bias.
fn xavier_layer(
    rng: &mut ChaCha8Rng,
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
) -> DenseLayer {
    let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
    let weights = (0..in_dim * out_dim)
        .map(|_| rng.gen_range(-limit..limit))
        .collect();
    DenseLayer::new(in_dim, out_dim, weights, vec![0.0; out_dim], activation)
        .expect("xavier layer dims are valid")
}

/// The reconstruction objective used inside AE training. The reported metric
/// is always per-pixel MSE regardless of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReconLoss {
    /// dL/dr = 2 (r - t) / n
    #[allow(dead_code)]
    Mse,
    /// Per-pixel cross-entropy against soft targets; dL/dr = (r - t)/(r(1-r)).
    /// Saturates the decoder's sigmoid toward exact 0/1 pixels far faster
    /// than MSE, which matters for background fidelity.
    Bce,
}

struct EpochStats {
    mean_loss: f64,
}

/// Runs seeded mini-batch SGD over one network.
///
/// `upstream_fn(sample_index, output, upstream_out) -> per-sample loss` fills
/// the gradient of the per-sample loss with respect to the network output.
fn run_sgd<F>(
    mut net: Network,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    momentum: f64,
    mut upstream_fn: F,
) -> Result<Network>
where
    F: FnMut(usize, &[f64], &mut [f64]) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut indices: Vec<usize> = (0..data.len()).collect();
    let mut upstream = vec![0.0; net.out_dim()];
    let mut optimizer = Sgd::with_momentum(cfg.lr, momentum);

    for epoch in 0..cfg.epochs {
        // Fisher-Yates with the config RNG keeps runs bit-reproducible.
        for i in (1..indices.len()).rev() {
            let j = rng.gen_range(0..=i);
            indices.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for batch in indices.chunks(cfg.batch_size) {
            let mut grads = GradientBundle::zeros_like(&net);
            for &i in batch {
                let x = data.image(i);
                let out = net.forward_vec(x)?;
                epoch_loss += upstream_fn(i, &out, &mut upstream);
                net.backward_accumulate(x, &upstream, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            net = optimizer.step(&net, &grads)?;
        }
        let stats = EpochStats {
            mean_loss: epoch_loss / data.len() as f64,
        };
        if !stats.mean_loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "training loss diverged at epoch {epoch} (mean loss {})",
                stats.mean_loss
            )));
        }
    }
    Ok(net)
}

/// Trains the binary classifier by mini-batch SGD on binary cross-entropy.
///
/// Deterministic given the config seed.
pub fn train_classifier(data: &LabeledDataset, cfg: &TrainConfig) -> Result<Classifier> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    let in_dim = data.image(0).len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let net = Network::new(vec![
        xavier_layer(&mut rng, in_dim, CLASSIFIER_HIDDEN[0], Activation::Relu),
        xavier_layer(
            &mut rng,
            CLASSIFIER_HIDDEN[0],
            CLASSIFIER_HIDDEN[1],
            Activation::Relu,
        ),
        xavier_layer(&mut rng, CLASSIFIER_HIDDEN[1], 1, Activation::Sigmoid),
    ])?;

    let trained = run_sgd(net, data, cfg, 0.0, |i, out, upstream| {
        let y = data.label(i) as f64;
        let p = out[0].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        upstream[0] = (p - y) / (p * (1.0 - p));
        -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
    })?;
    Classifier::from_network(trained)
}

/// Trains the autoencoder (encoder and decoder jointly) on per-pixel
/// cross-entropy, with heavy-ball momentum.
pub fn train_autoencoder(
    data: &LabeledDataset,
    latent_dim: usize,
    cfg: &TrainConfig,
) -> Result<Autoencoder> {
    train_autoencoder_tuned(data, latent_dim, cfg, AE_MOMENTUM)
}

/// Autoencoder momentum; reconstruction quality at a fixed epoch budget is
/// what this buys.
const AE_MOMENTUM: f64 = 0.9;

#[doc(hidden)]
pub fn train_autoencoder_tuned(
    data: &LabeledDataset,
    latent_dim: usize,
    cfg: &TrainConfig,
    momentum: f64,
) -> Result<Autoencoder> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    if latent_dim == 0 {
        return Err(Error::InvalidConfig("latent_dim must be positive".into()));
    }
    let in_dim = data.image(0).len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let stacked = Network::new(vec![
        xavier_layer(&mut rng, in_dim, AUTOENCODER_HIDDEN, Activation::Relu),
        xavier_layer(&mut rng, AUTOENCODER_HIDDEN, latent_dim, Activation::Identity),
        xavier_layer(&mut rng, latent_dim, AUTOENCODER_HIDDEN, Activation::Relu),
        xavier_layer(&mut rng, AUTOENCODER_HIDDEN, in_dim, Activation::Sigmoid),
    ])?;

    let loss = ReconLoss::Bce;
    let trained = run_sgd(stacked, data, cfg, momentum, |i, out, upstream| {
        let target = data.image(i);
        let n = target.len() as f64;
        let mut total = 0.0;
        match loss {
            ReconLoss::Mse => {
                for ((&r, &t), u) in out.iter().zip(target).zip(upstream.iter_mut()) {
                    let d = r - t;
                    *u = 2.0 * d / n;
                    total += d * d;
                }
            }
            ReconLoss::Bce => {
                for ((&r, &t), u) in out.iter().zip(target).zip(upstream.iter_mut()) {
                    let r = r.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                    *u = (r - t) / (r * (1.0 - r)) / n;
                    total += -(t * r.ln() + (1.0 - t) * (1.0 - r).ln());
                }
            }
        }
        total / n
    })?;

    let layers = trained.layers();
    let encoder = Network::new(layers[..2].to_vec())?;
    let decoder = Network::new(layers[2..].to_vec())?;
    Autoencoder::from_networks(encoder, decoder)
}

/// Fraction of samples whose thresholded probability matches the label.
pub fn classifier_accuracy(clf: &Classifier, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InsufficientData("empty evaluation set".into()));
    }
    let mut correct = 0usize;
    for i in 0..data.len() {
        let p = clf.prob(data.image(i))?;
        let predicted = u8::from(p >= 0.5);
        correct += usize::from(predicted == data.label(i));
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Mean per-pixel squared reconstruction error over a dataset.
pub fn reconstruction_mse(ae: &Autoencoder, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InsufficientData("empty evaluation set".into()));
    }
    let mut total = 0.0;
    for i in 0..data.len() {
        let r = ae.reconstruct(data.image(i))?;
        let x = data.image(i);
        let sq: f64 = r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        total += sq / x.len() as f64;
    }
    Ok(total / data.len() as f64)
}

// ---------------------------------------------------------------------------
// On-disk model format
//
// magic "CFBM", version u32 LE, kind u8 (1 classifier / 2 autoencoder),
// network count u8, then per network: layer count u32, and per layer
// in_dim u32, out_dim u32, activation u8 (0/1/2), weights and bias as f64 LE.
// ---------------------------------------------------------------------------

const MODEL_MAGIC: &[u8; 4] = b"CFBM";
const MODEL_VERSION: u32 = 1;
const KIND_CLASSIFIER: u8 = 1;
const KIND_AUTOENCODER: u8 = 2;

fn activation_tag(a: Activation) -> u8 {
    match a {
        Activation::Identity => 0,
        Activation::Relu => 1,
        Activation::Sigmoid => 2,
    }
}

fn activation_from_tag(tag: u8) -> Result<Activation> {
    match tag {
        0 => Ok(Activation::Identity),
        1 => Ok(Activation::Relu),
        2 => Ok(Activation::Sigmoid),
        other => Err(Error::Format(format!("unknown activation tag {other}"))),
    }
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    let start = buf.len();
    buf.resize(start + values.len() * 8, 0);
    LittleEndian::write_f64_into(values, &mut buf[start..]);
}

fn encode_network(buf: &mut Vec<u8>, net: &Network) {
    push_u32(buf, net.layers().len() as u32);
    for layer in net.layers() {
        push_u32(buf, layer.in_dim() as u32);
        push_u32(buf, layer.out_dim() as u32);
        buf.push(activation_tag(layer.activation()));
        push_f64s(buf, layer.weights());
        push_f64s(buf, layer.bias());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Truncated {
                expected: self.pos + n,
                actual: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(LittleEndian::read_u32(self.take(4)?))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n * 8)?;
        let mut out = vec![0.0; n];
        LittleEndian::read_f64_into(raw, &mut out);
        Ok(out)
    }
}

fn decode_network(r: &mut Reader) -> Result<Network> {
    let layer_count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let in_dim = r.u32()? as usize;
        let out_dim = r.u32()? as usize;
        let activation = activation_from_tag(r.u8()?)?;
        let weights = r.f64s(in_dim * out_dim)?;
        let bias = r.f64s(out_dim)?;
        layers.push(DenseLayer::new(in_dim, out_dim, weights, bias, activation)?);
    }
    Network::new(layers)
}

fn write_model(path: &Path, kind: u8, nets: &[&Network]) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    push_u32(&mut buf, MODEL_VERSION);
    buf.push(kind);
    buf.push(nets.len() as u8);
    for net in nets {
        encode_network(&mut buf, net);
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

fn read_model(path: &Path, want_kind: u8) -> Result<Vec<Network>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?
        .read_to_end(&mut bytes)?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    if r.take(4)? != MODEL_MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::Version {
            found: version,
            supported: MODEL_VERSION,
        });
    }
    let kind = r.u8()?;
    if kind != want_kind {
        return Err(Error::Format(format!(
            "model kind {kind} does not match expected {want_kind}"
        )));
    }
    let count = r.u8()? as usize;
    (0..count).map(|_| decode_network(&mut r)).collect()
}

/// Persists a classifier; the round-trip is bit-exact.
pub fn save_classifier(clf: &Classifier, path: &Path) -> Result<()> {
    write_model(path, KIND_CLASSIFIER, &[clf.net()])
}

pub fn load_classifier(path: &Path) -> Result<Classifier> {
    let mut nets = read_model(path, KIND_CLASSIFIER)?;
    if nets.len() != 1 {
        return Err(Error::Format(format!(
            "classifier file holds {} networks",
            nets.len()
        )));
    }
    Classifier::from_network(nets.pop().unwrap())
}

/// Persists an autoencoder (encoder then decoder); the round-trip is bit-exact.
pub fn save_autoencoder(ae: &Autoencoder, path: &Path) -> Result<()> {
    write_model(path, KIND_AUTOENCODER, &[ae.encoder(), ae.decoder()])
}

pub fn load_autoencoder(path: &Path) -> Result<Autoencoder> {
    let mut nets = read_model(path, KIND_AUTOENCODER)?;
    if nets.len() != 2 {
        return Err(Error::Format(format!(
            "autoencoder file holds {} networks",
            nets.len()
        )));
    }
    let decoder = nets.pop().unwrap();
    let encoder = nets.pop().unwrap();
    Autoencoder::from_networks(encoder, decoder)
}
