//! Dense feed-forward network with explicit reverse-mode gradients.
//!
//! Everything is 64-bit. `backward` accumulates exact gradients of a scalar
//! loss given `dL/d(output)`, which keeps the finite-difference oracle simple.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn forward(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major (out_dim x in_dim).
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Per-layer parameter gradients, shaped like an [`Mlp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Post-activation outputs of every layer for one input.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    pub activations: Vec<Vec<f64>>,
}

/// Semi-orthogonal (out x in) matrix via Gram-Schmidt on Gaussian rows,
/// scaled by `gain`.
fn orthogonal<R: Rng>(out_dim: usize, in_dim: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let transpose = out_dim > in_dim;
    let (n, m) = if transpose { (in_dim, out_dim) } else { (out_dim, in_dim) };
    // n <= m: orthogonalize n rows of length m
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (x, c) in v.iter_mut().zip(b) {
                *x -= dot * c;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            for x in &mut v {
                *x /= norm;
            }
            basis.push(v);
        }
    }
    let mut w = vec![0.0; out_dim * in_dim];
    for r in 0..out_dim {
        for c in 0..in_dim {
            let v = if transpose { basis[c][r] } else { basis[r][c] };
            w[r * in_dim + c] = gain * v;
        }
    }
    w
}

impl Layer {
    fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(input.len(), self.in_dim);
        out.clear();
        out.reserve(self.out_dim);
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut z = self.biases[o];
            for (w, x) in row.iter().zip(input) {
                z += w * x;
            }
            out.push(self.activation.forward(z));
        }
    }
}

impl Mlp {
    /// Builds `dims[0] -> dims[1] -> ... -> dims.last()` with tanh hidden
    /// layers and an identity output layer. Hidden layers use orthogonal init
    /// with `hidden_gain`; the output layer uses `out_gain` (a small value
    /// keeps the initial policy near-uniform).
    pub fn new<R: Rng>(dims: &[usize], hidden_gain: f64, out_gain: f64, rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for i in 0..dims.len() - 1 {
            let last = i == dims.len() - 2;
            let (gain, activation) = if last {
                (out_gain, Activation::Identity)
            } else {
                (hidden_gain, Activation::Tanh)
            };
            layers.push(Layer {
                in_dim: dims[i],
                out_dim: dims[i + 1],
                weights: orthogonal(dims[i + 1], dims[i], gain, rng),
                biases: vec![0.0; dims[i + 1]],
                activation,
            });
        }
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().expect("non-empty mlp").in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty mlp").out_dim
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.out_dim));
        dims
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} entries, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Forward pass recording every layer output (needed by `backward`).
    pub fn forward_cached(&self, input: &[f64], cache: &mut ForwardCache) -> Result<()> {
        self.check_input(input)?;
        cache.activations.resize(self.layers.len(), Vec::new());
        for (i, layer) in self.layers.iter().enumerate() {
            let (done, rest) = cache.activations.split_at_mut(i);
            let src: &[f64] = if i == 0 { input } else { &done[i - 1] };
            layer.forward_into(src, &mut rest[0]);
        }
        Ok(())
    }

    /// Plain forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut cache = ForwardCache::default();
        self.forward_cached(input, &mut cache)?;
        Ok(cache.activations.pop().expect("non-empty mlp"))
    }

    /// Reverse pass: given `dL/d(output)` and the cache from
    /// `forward_cached`, accumulates parameter gradients into `grads` and
    /// returns `dL/d(input)`.
    pub fn backward(
        &self,
        input: &[f64],
        cache: &ForwardCache,
        d_output: &[f64],
        grads: &mut MlpGrads,
    ) -> Vec<f64> {
        debug_assert_eq!(d_output.len(), self.output_dim());
        let mut d_out = d_output.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let y = &cache.activations[i];
            // through the activation
            for (d, &out) in d_out.iter_mut().zip(y) {
                *d *= layer.activation.grad_from_output(out);
            }
            let x: &[f64] = if i == 0 { input } else { &cache.activations[i - 1] };
            let dw = &mut grads.weights[i];
            let db = &mut grads.biases[i];
            let mut d_in = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let g = d_out[o];
                db[o] += g;
                let row = &mut dw[o * layer.in_dim..(o + 1) * layer.in_dim];
                let wrow = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for c in 0..layer.in_dim {
                    row[c] += g * x[c];
                    d_in[c] += g * wrow[c];
                }
            }
            d_out = d_in;
        }
        d_out
    }
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: mlp.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn zero(&mut self) {
        for w in &mut self.weights {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            w.iter_mut().for_each(|v| *v *= factor);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn squared_norm(&self) -> f64 {
        let w: f64 = self
            .weights
            .iter()
            .flat_map(|v| v.iter())
            .map(|v| v * v)
            .sum();
        let b: f64 = self
            .biases
            .iter()
            .flat_map(|v| v.iter())
            .map(|v| v * v)
            .sum();
        w + b
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Adam state shaped like one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub m: MlpGrads,
    pub v: MlpGrads,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(mlp: &Mlp) -> Self {
        Self {
            m: MlpGrads::zeros_like(mlp),
            v: MlpGrads::zeros_like(mlp),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One descent step along `grads`.
    pub fn step(&mut self, mlp: &mut Mlp, grads: &MlpGrads, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, layer) in mlp.layers.iter_mut().enumerate() {
            adam_update(
                &mut layer.weights,
                &grads.weights[i],
                &mut self.m.weights[i],
                &mut self.v.weights[i],
                self.beta1,
                self.beta2,
                self.eps,
                lr,
                bc1,
                bc2,
            );
            adam_update(
                &mut layer.biases,
                &grads.biases[i],
                &mut self.m.biases[i],
                &mut self.v.biases[i],
                self.beta1,
                self.beta2,
                self.eps,
                lr,
                bc1,
                bc2,
            );
        }
    }
}

/// Adam over a bare parameter vector (used for the policy's log-std head).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VecAdam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl VecAdam {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        adam_update(
            params, grads, &mut self.m, &mut self.v, self.beta1, self.beta2, self.eps, lr, bc1,
            bc2,
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Clips a set of gradient blocks jointly by global L2 norm. Returns the
/// pre-clip norm.
pub fn clip_global_norm(blocks: &mut [&mut MlpGrads], extra: Option<&mut [f64]>, max_norm: f64) -> f64 {
    let mut sq: f64 = blocks.iter().map(|g| g.squared_norm()).sum();
    if let Some(ref extra) = extra {
        sq += extra.iter().map(|v| v * v).sum::<f64>();
    }
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let factor = max_norm / norm;
        for g in blocks.iter_mut() {
            g.scale(factor);
        }
        if let Some(extra) = extra {
            extra.iter_mut().for_each(|v| *v *= factor);
        }
    }
    norm
}
