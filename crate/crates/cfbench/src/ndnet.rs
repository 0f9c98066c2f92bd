//! Minimal differentiable-network core.
//!
//! Dense layers with identity/relu/sigmoid activations, forward evaluation,
//! exact backpropagation to parameters and to inputs, and an SGD step. Values
//! are stored as flat row-major `f64` buffers with explicit shapes; no tensor
//! library is involved.
//!
//! Networks are immutable once constructed: every operation here is a pure
//! function of its arguments, so shared references can be used freely across
//! threads.

use crate::{Error, Result};

/// A flat, row-major tensor of finite real values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, checking that the shape matches the data length.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} expects {} values, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    /// Builds a 1-D tensor from a vector.
    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Element-wise activation applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the activation's own output.
    ///
    /// The relu subgradient at 0 is taken as 0.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

/// A dense layer: `y = activation(W x + b)` with `W` stored row-major as
/// `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Shape("layer dims must be > 0".into()));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::Shape(format!(
                "weights len {} does not match {}x{}",
                weights.len(),
                out_dim,
                in_dim
            )));
        }
        if bias.len() != out_dim {
            return Err(Error::Shape(format!(
                "bias len {} does not match out_dim {}",
                bias.len(),
                out_dim
            )));
        }
        if !weights.iter().chain(bias.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("layer parameters".into()));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        })
    }

    /// Identity map of the given dimension (identity weights, zero bias).
    pub fn identity(dim: usize) -> Self {
        let mut weights = vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        Self {
            in_dim: dim,
            out_dim: dim,
            weights,
            bias: vec![0.0; dim],
            activation: Activation::Identity,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    #[inline]
    fn forward_into(&self, input: &[f64], output: &mut [f64]) {
        debug_assert_eq!(input.len(), self.in_dim);
        debug_assert_eq!(output.len(), self.out_dim);
        for (o, out) in output.iter_mut().enumerate() {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut z = self.bias[o];
            for (w, x) in row.iter().zip(input) {
                z += w * x;
            }
            *out = self.activation.apply(z);
        }
    }
}

/// Per-layer parameter gradients, shaped exactly like the layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients of a scalar objective with respect to every network parameter
/// and to the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub layers: Vec<LayerGrad>,
    pub input: Vec<f64>,
}

impl GradientBundle {
    /// All-zero bundle shaped like the given network.
    pub fn zeros_like(net: &Network) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| LayerGrad {
                weights: vec![0.0; l.weights.len()],
                bias: vec![0.0; l.bias.len()],
            })
            .collect();
        Self {
            layers,
            input: vec![0.0; net.in_dim()],
        }
    }

    /// Accumulates `other` into `self` (shapes must match).
    pub fn add_assign(&mut self, other: &GradientBundle) {
        assert_eq!(self.layers.len(), other.layers.len(), "layer count mismatch");
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
        for (x, y) in self.input.iter_mut().zip(&other.input) {
            *x += y;
        }
    }

    /// Multiplies every component by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            for v in &mut l.weights {
                *v *= factor;
            }
            for v in &mut l.bias {
                *v *= factor;
            }
        }
        for v in &mut self.input {
            *v *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
            && self.input.iter().all(|v| v.is_finite())
    }
}

/// An ordered stack of dense layers with chained dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<DenseLayer>,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::Shape(format!(
                    "layer out_dim {} feeds layer in_dim {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Single-layer identity network of the given dimension.
    pub fn identity(dim: usize) -> Self {
        Self {
            layers: vec![DenseLayer::identity(dim)],
        }
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.in_dim() {
            return Err(Error::Shape(format!(
                "input len {} does not match network in_dim {}",
                x.len(),
                self.in_dim()
            )));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    /// Evaluates the network on a 1-D input.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(Tensor::vector(self.forward_vec(x.as_slice())?))
    }

    /// Slice-level forward pass.
    pub fn forward_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut current = x.to_vec();
        for layer in &self.layers {
            let mut next = vec![0.0; layer.out_dim];
            layer.forward_into(&current, &mut next);
            current = next;
        }
        Ok(current)
    }

    /// Forward pass that keeps every layer's post-activation output.
    fn forward_trace(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_input(x)?;
        let mut trace = Vec::with_capacity(self.layers.len());
        let mut current = x;
        for layer in &self.layers {
            let mut next = vec![0.0; layer.out_dim];
            layer.forward_into(current, &mut next);
            trace.push(next);
            current = trace.last().unwrap();
        }
        Ok(trace)
    }

    /// Exact gradients of `upstream · output` with respect to every parameter
    /// and to the input, by the chain rule.
    pub fn backward(&self, x: &Tensor, upstream: &Tensor) -> Result<GradientBundle> {
        self.backward_vec(x.as_slice(), upstream.as_slice())
    }

    /// Slice-level backward pass.
    pub fn backward_vec(&self, x: &[f64], upstream: &[f64]) -> Result<GradientBundle> {
        if upstream.len() != self.out_dim() {
            return Err(Error::Shape(format!(
                "upstream len {} does not match network out_dim {}",
                upstream.len(),
                self.out_dim()
            )));
        }
        let trace = self.forward_trace(x)?;
        let mut layer_grads: Vec<LayerGrad> = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.to_vec();

        for (k, layer) in self.layers.iter().enumerate().rev() {
            let output = &trace[k];
            let input: &[f64] = if k == 0 { x } else { &trace[k - 1] };
            let mut wgrad = vec![0.0; layer.weights.len()];
            let mut bgrad = vec![0.0; layer.out_dim];
            let mut prev_delta = vec![0.0; layer.in_dim];

            for o in 0..layer.out_dim {
                let dz = delta[o] * layer.activation.derivative_from_output(output[o]);
                bgrad[o] = dz;
                let row = o * layer.in_dim;
                for i in 0..layer.in_dim {
                    wgrad[row + i] = dz * input[i];
                    prev_delta[i] += layer.weights[row + i] * dz;
                }
            }
            layer_grads.push(LayerGrad {
                weights: wgrad,
                bias: bgrad,
            });
            delta = prev_delta;
        }
        layer_grads.reverse();
        Ok(GradientBundle {
            layers: layer_grads,
            input: delta,
        })
    }

    /// Backward pass that adds parameter gradients into an existing bundle.
    ///
    /// Mini-batch training sums per-sample gradients; accumulating in place
    /// avoids allocating a full parameter-sized bundle per sample. The
    /// bundle's `input` field is overwritten, not accumulated.
    pub fn backward_accumulate(
        &self,
        x: &[f64],
        upstream: &[f64],
        into: &mut GradientBundle,
    ) -> Result<()> {
        if upstream.len() != self.out_dim() {
            return Err(Error::Shape(format!(
                "upstream len {} does not match network out_dim {}",
                upstream.len(),
                self.out_dim()
            )));
        }
        if into.layers.len() != self.layers.len() || into.input.len() != self.in_dim() {
            return Err(Error::Shape("bundle does not mirror network".into()));
        }
        let trace = self.forward_trace(x)?;
        let mut delta = upstream.to_vec();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let output = &trace[k];
            let input: &[f64] = if k == 0 { x } else { &trace[k - 1] };
            let grad = &mut into.layers[k];
            let mut prev_delta = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let dz = delta[o] * layer.activation.derivative_from_output(output[o]);
                grad.bias[o] += dz;
                let row = o * layer.in_dim;
                for i in 0..layer.in_dim {
                    grad.weights[row + i] += dz * input[i];
                    prev_delta[i] += layer.weights[row + i] * dz;
                }
            }
            delta = prev_delta;
        }
        into.input.copy_from_slice(&delta);
        Ok(())
    }

    /// Gradient of `upstream · output` with respect to the input only.
    ///
    /// Same chain rule as [`Network::backward_vec`] minus the parameter-grad
    /// bookkeeping; the generators call this in their inner loops.
    pub fn input_gradient(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        if upstream.len() != self.out_dim() {
            return Err(Error::Shape(format!(
                "upstream len {} does not match network out_dim {}",
                upstream.len(),
                self.out_dim()
            )));
        }
        let trace = self.forward_trace(x)?;
        let mut delta = upstream.to_vec();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let output = &trace[k];
            let mut prev_delta = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let dz = delta[o] * layer.activation.derivative_from_output(output[o]);
                let row = o * layer.in_dim;
                for i in 0..layer.in_dim {
                    prev_delta[i] += layer.weights[row + i] * dz;
                }
            }
            delta = prev_delta;
        }
        Ok(delta)
    }
}

/// One plain SGD step: every parameter `p` becomes `p - lr * g`.
///
/// Pure: returns a new network, the argument is untouched.
pub fn sgd_step(net: &Network, grads: &GradientBundle, lr: f64) -> Result<Network> {
    if grads.layers.len() != net.layers.len() {
        return Err(Error::Shape(format!(
            "gradient has {} layers, network has {}",
            grads.layers.len(),
            net.layers.len()
        )));
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    let mut layers = Vec::with_capacity(net.layers.len());
    for (layer, grad) in net.layers.iter().zip(&grads.layers) {
        if grad.weights.len() != layer.weights.len() || grad.bias.len() != layer.bias.len() {
            return Err(Error::Shape("gradient shape does not mirror layer".into()));
        }
        let weights = layer
            .weights
            .iter()
            .zip(&grad.weights)
            .map(|(w, g)| w - lr * g)
            .collect();
        let bias = layer
            .bias
            .iter()
            .zip(&grad.bias)
            .map(|(b, g)| b - lr * g)
            .collect();
        layers.push(DenseLayer::new(
            layer.in_dim,
            layer.out_dim,
            weights,
            bias,
            layer.activation,
        )?);
    }
    Network::new(layers)
}

/// SGD with optional fixed momentum (momentum 0 reduces to [`sgd_step`]).
#[derive(Debug, Clone)]
pub struct Sgd {
    lr: f64,
    momentum: f64,
    velocity: Option<GradientBundle>,
}

impl Sgd {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            momentum: 0.0,
            velocity: None,
        }
    }

    pub fn with_momentum(lr: f64, momentum: f64) -> Self {
        Self {
            lr,
            momentum,
            velocity: None,
        }
    }

    pub fn step(&mut self, net: &Network, grads: &GradientBundle) -> Result<Network> {
        if self.momentum == 0.0 {
            return sgd_step(net, grads, self.lr);
        }
        let mut velocity = match self.velocity.take() {
            Some(mut v) => {
                v.scale(self.momentum);
                v.add_assign(grads);
                v
            }
            None => grads.clone(),
        };
        velocity.input.iter_mut().for_each(|v| *v = 0.0);
        let next = sgd_step(net, &velocity, self.lr)?;
        self.velocity = Some(velocity);
        Ok(next)
    }
}

/// Gradient of `upstream · outer(inner(z))` with respect to `z`, via chained
/// backward passes through both networks.
pub fn composed_input_grad(
    outer: &Network,
    inner: &Network,
    z: &Tensor,
    upstream: &Tensor,
) -> Result<Tensor> {
    Ok(Tensor::vector(composed_input_grad_vec(
        outer,
        inner,
        z.as_slice(),
        upstream.as_slice(),
    )?))
}

/// Slice-level variant of [`composed_input_grad`].
pub fn composed_input_grad_vec(
    outer: &Network,
    inner: &Network,
    z: &[f64],
    upstream: &[f64],
) -> Result<Vec<f64>> {
    if inner.out_dim() != outer.in_dim() {
        return Err(Error::Shape(format!(
            "inner out_dim {} does not match outer in_dim {}",
            inner.out_dim(),
            outer.in_dim()
        )));
    }
    let mid = inner.forward_vec(z)?;
    let mid_grad = outer.input_gradient(&mid, upstream)?;
    inner.input_gradient(z, &mid_grad)
}
