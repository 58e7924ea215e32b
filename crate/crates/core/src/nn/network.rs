use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, Error, Result};

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Leaky ReLU with negative slope 0.2. The derivative at exactly 0 is 1.
    LeakyRelu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, u: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if u >= 0.0 {
                    u
                } else {
                    LEAKY_SLOPE * u
                }
            }
            Activation::Sigmoid => sigmoid(u),
            Activation::Identity => u,
        }
    }

    #[inline]
    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if u >= 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(u);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }

    #[inline]
    fn second_derivative(self, u: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = sigmoid(u);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            Activation::LeakyRelu | Activation::Identity => 0.0,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::LeakyRelu => 0,
            Activation::Sigmoid => 1,
            Activation::Identity => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::LeakyRelu),
            1 => Some(Activation::Sigmoid),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[inline]
fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Glorot-uniform weights for an `out_dim x in_dim` matrix, row-major.
pub fn glorot_uniform<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Vec<f64> {
    let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
    (0..in_dim * out_dim).map(|_| rng.random_range(-limit..=limit)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self { in_dim, out_dim, weights: vec![0.0; in_dim * out_dim], bias: vec![0.0; out_dim], activation }
    }

    fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect()
    }

    /// `W^T v`.
    fn transpose_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.in_dim];
        for (row, &vi) in self.weights.chunks_exact(self.in_dim).zip(v) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * vi;
            }
        }
        out
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Per-layer parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
                .collect(),
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in w.iter_mut().zip(ow) {
                *x += scale * y;
            }
            for (x, y) in b.iter_mut().zip(ob) {
                *x += scale * y;
            }
        }
    }

    /// Flattened in the same order as [`DenseNetwork::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

static NEXT_REVISION: AtomicU64 = AtomicU64::new(1);

fn next_revision() -> u64 {
    NEXT_REVISION.fetch_add(1, Ordering::Relaxed)
}

/// Ordered stack of dense layers.
#[derive(Debug, Clone)]
pub struct DenseNetwork {
    layers: Vec<DenseLayer>,
    // Changes whenever parameters change; caches remember the revision they
    // were computed under.
    revision: u64,
}

impl PartialEq for DenseNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    revision: u64,
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl DenseNetwork {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        ensure_arg!(!layers.is_empty(), "network needs at least one layer");
        for (k, l) in layers.iter().enumerate() {
            ensure_arg!(l.in_dim >= 1 && l.out_dim >= 1, "layer {k} has a zero dimension");
            ensure_arg!(
                l.weights.len() == l.in_dim * l.out_dim && l.bias.len() == l.out_dim,
                "layer {k} parameter shapes do not match its dimensions"
            );
        }
        for (k, pair) in layers.windows(2).enumerate() {
            ensure_arg!(
                pair[0].out_dim == pair[1].in_dim,
                "layer {k} outputs {} values but layer {} expects {}",
                pair[0].out_dim,
                k + 1,
                pair[1].in_dim
            );
        }
        Ok(Self { layers, revision: next_revision() })
    }

    /// Zero-initialized network with `dims = [in, h1, ..., out]`.
    pub fn zeros(dims: &[usize], activations: &[Activation]) -> Result<Self> {
        ensure_arg!(dims.len() >= 2, "need at least input and output dimensions");
        ensure_arg!(
            activations.len() == dims.len() - 1,
            "{} activations for {} layers",
            activations.len(),
            dims.len() - 1
        );
        Self::from_layers(
            dims.windows(2).zip(activations).map(|(d, &a)| DenseLayer::zeros(d[0], d[1], a)).collect(),
        )
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(dims: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(dims, activations)?;
        for layer in &mut net.layers {
            layer.weights = glorot_uniform(layer.in_dim, layer.out_dim, rng);
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Mutable access to the layers; invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        self.revision = next_revision();
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.in_dim()).chain(self.layers.iter().map(|l| l.out_dim)).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// All parameters, layer by layer, weights (row-major) before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        ensure_arg!(
            params.len() == self.param_count(),
            "expected {} parameters, got {}",
            self.param_count(),
            params.len()
        );
        let mut rest = params;
        for l in &mut self.layers {
            let (w, tail) = rest.split_at(l.weights.len());
            let (b, tail) = tail.split_at(l.bias.len());
            l.weights.copy_from_slice(w);
            l.bias.copy_from_slice(b);
            rest = tail;
        }
        self.revision = next_revision();
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        ensure_arg!(x.len() == self.in_dim(), "network expects {} inputs, got {}", self.in_dim(), x.len());
        Ok(())
    }

    /// Output only.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        for l in &self.layers {
            a = l.pre_activation(&a).into_iter().map(|u| l.activation.apply(u)).collect();
        }
        Ok(a)
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_vec();
        for l in &self.layers {
            let u = l.pre_activation(&a);
            let next = u.iter().map(|&v| l.activation.apply(v)).collect();
            inputs.push(std::mem::replace(&mut a, next));
            pre.push(u);
        }
        Ok((a, ForwardCache { revision: self.revision, inputs, pre }))
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        if cache.revision != self.revision || cache.pre.len() != self.layers.len() {
            return Err(Error::contract("forward cache does not belong to this network state"));
        }
        Ok(())
    }

    /// Reverse-mode pass: returns parameter gradients and the input gradient
    /// of `upstream . output`.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        self.check_cache(cache)?;
        ensure_arg!(
            upstream.len() == self.out_dim(),
            "upstream gradient has length {}, network outputs {}",
            upstream.len(),
            self.out_dim()
        );
        let mut grads = Gradients::zeros_like(self);
        let mut adj = upstream.to_vec();
        for (k, l) in self.layers.iter().enumerate().rev() {
            let delta: Vec<f64> =
                adj.iter().zip(&cache.pre[k]).map(|(g, &u)| g * l.activation.derivative(u)).collect();
            accumulate_layer(&mut grads.layers[k], &delta, &cache.inputs[k]);
            adj = l.transpose_mul(&delta);
        }
        Ok((grads, adj))
    }

    /// Gradient of the scalar output with respect to the input.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_arg!(self.out_dim() == 1, "input gradient needs a scalar-output network");
        let (_, cache) = self.forward(x)?;
        Ok(self.backward(&cache, &[1.0])?.1)
    }

    /// `(||grad_x D(x)|| - target)^2` and its gradient with respect to every
    /// parameter.
    ///
    /// The penalty depends on the parameters through the input-gradient, so
    /// this differentiates the backward pass itself: the adjoint of the input
    /// gradient is pushed back through the backward recursion, and the
    /// resulting pre-activation adjoints are then propagated through the
    /// forward pass as in ordinary backpropagation.
    pub fn gradient_norm_penalty(&self, x: &[f64], target: f64) -> Result<(f64, Gradients)> {
        ensure_arg!(self.out_dim() == 1, "gradient penalty needs a scalar-output network");
        let (_, cache) = self.forward(x)?;
        let n = self.layers.len();

        // Backward pass for v = dD/dx, keeping every intermediate.
        // g[k] = dD/da_k (a_0 = x), delta[k] = dD/du_{k+1}.
        let mut g_out = vec![1.0];
        let mut deltas = vec![Vec::new(); n];
        let mut gs = vec![Vec::new(); n + 1];
        for k in (0..n).rev() {
            let l = &self.layers[k];
            let delta: Vec<f64> =
                g_out.iter().zip(&cache.pre[k]).map(|(g, &u)| g * l.activation.derivative(u)).collect();
            gs[k + 1] = std::mem::take(&mut g_out);
            g_out = l.transpose_mul(&delta);
            deltas[k] = delta;
        }
        gs[0] = g_out;
        let v = &gs[0];
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let penalty = (norm - target).powi(2);

        let mut grads = Gradients::zeros_like(self);
        // d penalty / d v; zero at the non-differentiable point v = 0.
        let mut adj_g: Vec<f64> = if norm > 0.0 {
            let s = 2.0 * (norm - target) / norm;
            v.iter().map(|x| s * x).collect()
        } else {
            vec![0.0; v.len()]
        };

        // Reverse of the backward recursion, from the input side upward.
        let mut injected: Vec<Vec<f64>> = vec![Vec::new(); n];
        for k in 0..n {
            let l = &self.layers[k];
            // g_k = W^T delta_k
            let adj_delta: Vec<f64> = l
                .weights
                .chunks_exact(l.in_dim)
                .map(|row| row.iter().zip(&adj_g).map(|(w, a)| w * a).sum())
                .collect();
            let (gw, _) = &mut grads.layers[k];
            for (i, &d) in deltas[k].iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (j, &a) in adj_g.iter().enumerate() {
                    gw[i * l.in_dim + j] += d * a;
                }
            }
            // delta_k = g_{k+1} * act'(u_k)
            let mut adj_u = vec![0.0; l.out_dim];
            let mut next_adj_g = vec![0.0; l.out_dim];
            for i in 0..l.out_dim {
                let u = cache.pre[k][i];
                next_adj_g[i] = adj_delta[i] * l.activation.derivative(u);
                adj_u[i] = adj_delta[i] * gs[k + 1][i] * l.activation.second_derivative(u);
            }
            injected[k] = adj_u;
            adj_g = next_adj_g;
        }

        // Ordinary backpropagation of the injected pre-activation adjoints.
        let mut adj_a = vec![0.0; self.out_dim()];
        for k in (0..n).rev() {
            let l = &self.layers[k];
            let adj_u: Vec<f64> = adj_a
                .iter()
                .zip(&cache.pre[k])
                .zip(&injected[k])
                .map(|((a, &u), inj)| a * l.activation.derivative(u) + inj)
                .collect();
            accumulate_layer(&mut grads.layers[k], &adj_u, &cache.inputs[k]);
            adj_a = l.transpose_mul(&adj_u);
        }
        Ok((penalty, grads))
    }
}

fn accumulate_layer(grad: &mut (Vec<f64>, Vec<f64>), delta: &[f64], input: &[f64]) {
    let in_dim = input.len();
    let (gw, gb) = grad;
    for (i, &d) in delta.iter().enumerate() {
        gb[i] += d;
        if d == 0.0 {
            continue;
        }
        for (j, &a) in input.iter().enumerate() {
            gw[i * in_dim + j] += d * a;
        }
    }
}
