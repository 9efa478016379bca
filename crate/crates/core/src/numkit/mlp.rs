//! Small dense feed-forward networks with analytically derived gradients.
//!
//! Every learned block in the simulator is one of these: a chain of affine
//! layers with tanh or identity activations, small enough that every
//! gradient stays hand-verifiable against finite differences. Forward
//! passes are pure; the caller keeps the returned cache and hands it back
//! to `backward`, so a backward-before-forward state error is
//! unrepresentable.

use super::linalg::{Mat64, Vec64};
use super::rng::SeededRng;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the post-activation value.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Dense multilayer perceptron.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    acts: Vec<Activation>,
    weights: Vec<Mat64>, // layer k: out_k × in_k
    biases: Vec<Vec64>,
}

/// Per-layer activations captured by `forward_cached`.
#[derive(Debug, Clone)]
pub struct MlpCache {
    input: Vec64,
    post: Vec<Vec64>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("cache of empty net")
    }
}

/// Parameter gradients, same shapes as the network.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub weights: Vec<Mat64>,
    pub biases: Vec<Vec64>,
}

impl MlpGrads {
    pub fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            w.scale(s);
        }
        for b in &mut self.biases {
            for x in b.iter_mut() {
                *x *= s;
            }
        }
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.weights.iter_mut().zip(other.weights.iter()) {
            a.add_assign(b);
        }
        for (a, b) in self.biases.iter_mut().zip(other.biases.iter()) {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += y;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.weights
            .iter()
            .all(|w| w.as_slice().iter().all(|&x| x == 0.0))
            && self.biases.iter().all(|b| b.iter().all(|&x| x == 0.0))
    }

    /// Sum of squared gradient entries, for global-norm clipping.
    pub fn norm_squared(&self) -> f64 {
        let w: f64 = self
            .weights
            .iter()
            .map(|m| m.as_slice().iter().map(|x| x * x).sum::<f64>())
            .sum();
        let b: f64 = self
            .biases
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum::<f64>())
            .sum();
        w + b
    }
}

impl Mlp {
    /// Builds a network with the given layer sizes and activations.
    /// `sizes` has one more entry than `acts`. Weights are initialized
    /// uniformly in `[-1/sqrt(fan_in), +1/sqrt(fan_in)]`, biases at zero.
    pub fn new(sizes: &[usize], acts: &[Activation], rng: &mut SeededRng) -> Self {
        assert!(sizes.len() >= 2, "Mlp needs at least one layer");
        assert_eq!(sizes.len(), acts.len() + 1, "one activation per layer");
        let mut weights = Vec::with_capacity(acts.len());
        let mut biases = Vec::with_capacity(acts.len());
        for k in 0..acts.len() {
            let fan_in = sizes[k];
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(Mat64::from_fn(sizes[k + 1], fan_in, |_, _| {
                rng.uniform(-bound, bound)
            }));
            biases.push(vec![0.0; sizes[k + 1]]);
        }
        Mlp {
            sizes: sizes.to_vec(),
            acts: acts.to_vec(),
            weights,
            biases,
        }
    }

    /// Single identity-activation layer with identity weights and zero bias.
    pub fn identity(dim: usize) -> Self {
        Mlp {
            sizes: vec![dim, dim],
            acts: vec![Activation::Identity],
            weights: vec![Mat64::identity(dim)],
            biases: vec![vec![0.0; dim]],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.acts
    }

    pub fn weights_mut(&mut self) -> &mut [Mat64] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vec64] {
        &mut self.biases
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Contract(format!(
                "mlp input dimension {} != expected {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Plain forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec64> {
        self.check_input(x)?;
        let mut a: Vec64 = x.to_vec();
        for (k, act) in self.acts.iter().enumerate() {
            let mut z = self.weights[k].matvec(&a);
            for (zi, bi) in z.iter_mut().zip(self.biases[k].iter()) {
                *zi = act.apply(*zi + bi);
            }
            a = z;
        }
        Ok(a)
    }

    /// Forward pass that captures per-layer activations for `backward`.
    pub fn forward_cached(&self, x: &[f64]) -> Result<(Vec64, MlpCache)> {
        self.check_input(x)?;
        let mut post = Vec::with_capacity(self.acts.len());
        let mut a: Vec64 = x.to_vec();
        for (k, act) in self.acts.iter().enumerate() {
            let mut z = self.weights[k].matvec(&a);
            for (zi, bi) in z.iter_mut().zip(self.biases[k].iter()) {
                *zi = act.apply(*zi + bi);
            }
            post.push(z.clone());
            a = z;
        }
        let cache = MlpCache {
            input: x.to_vec(),
            post,
        };
        Ok((a, cache))
    }

    /// Backpropagates `upstream = dL/d(output)` through the cached forward
    /// pass; returns parameter gradients and `dL/d(input)`.
    pub fn backward(&self, cache: &MlpCache, upstream: &[f64]) -> Result<(MlpGrads, Vec64)> {
        let mut grads = self.zero_grads();
        let input_grad = self.backward_into(cache, upstream, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Like `backward` but accumulates into existing gradient buffers.
    pub fn backward_into(
        &self,
        cache: &MlpCache,
        upstream: &[f64],
        grads: &mut MlpGrads,
    ) -> Result<Vec64> {
        if upstream.len() != self.output_dim() {
            return Err(Error::Contract(format!(
                "upstream gradient dimension {} != output {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let mut delta: Vec64 = upstream.to_vec();
        for k in (0..self.acts.len()).rev() {
            let post = &cache.post[k];
            for (d, y) in delta.iter_mut().zip(post.iter()) {
                *d *= self.acts[k].derivative_from_output(*y);
            }
            let layer_in: &[f64] = if k == 0 { &cache.input } else { &cache.post[k - 1] };
            grads.weights[k].add_outer(&delta, layer_in);
            for (g, d) in grads.biases[k].iter_mut().zip(delta.iter()) {
                *g += d;
            }
            delta = self.weights[k].tr_matvec(&delta);
        }
        Ok(delta)
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            weights: self
                .weights
                .iter()
                .map(|w| Mat64::zeros(w.rows(), w.cols()))
                .collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// `θ ← θ − lr·g`, elementwise.
    pub fn sgd(&mut self, grads: &MlpGrads, lr: f64) {
        assert!(lr > 0.0, "learning rate must be positive");
        for (w, g) in self.weights.iter_mut().zip(grads.weights.iter()) {
            sgd_step(w.as_mut_slice(), g.as_slice(), lr);
        }
        for (b, g) in self.biases.iter_mut().zip(grads.biases.iter()) {
            sgd_step(b, g, lr);
        }
    }

    pub fn param_count(&self) -> usize {
        self.acts
            .iter()
            .enumerate()
            .map(|(k, _)| self.sizes[k] * self.sizes[k + 1] + self.sizes[k + 1])
            .sum()
    }

    /// Flattens all parameters (per layer: weights row-major, then biases).
    pub fn params_flat(&self) -> Vec64 {
        let mut out = Vec::with_capacity(self.param_count());
        for k in 0..self.acts.len() {
            out.extend_from_slice(self.weights[k].as_slice());
            out.extend_from_slice(&self.biases[k]);
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "flat parameter mismatch");
        let mut off = 0;
        for k in 0..self.acts.len() {
            let wlen = self.sizes[k] * self.sizes[k + 1];
            self.weights[k]
                .as_mut_slice()
                .copy_from_slice(&flat[off..off + wlen]);
            off += wlen;
            let blen = self.sizes[k + 1];
            self.biases[k].copy_from_slice(&flat[off..off + blen]);
            off += blen;
        }
    }

    /// Flattened gradients in the same layout as `params_flat`.
    pub fn grads_flat(&self, grads: &MlpGrads) -> Vec64 {
        let mut out = Vec::with_capacity(self.param_count());
        for k in 0..self.acts.len() {
            out.extend_from_slice(grads.weights[k].as_slice());
            out.extend_from_slice(&grads.biases[k]);
        }
        out
    }
}

/// Residual wrapper `y = x + inner(x)`; input and output dimensions match.
/// Zeroing the inner network makes the map an exact identity, which is both
/// the natural initialization target for near-identity surrogates and the
/// identity configuration the contract tests use.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMlp {
    inner: Mlp,
}

impl ResidualMlp {
    pub fn new(dim: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let inner = Mlp::new(
            &[dim, hidden, dim],
            &[Activation::Tanh, Activation::Identity],
            rng,
        );
        ResidualMlp { inner }
    }

    /// Exact identity: inner network with all-zero weights and biases.
    pub fn identity(dim: usize, hidden: usize) -> Self {
        let mut rng = SeededRng::new(0);
        let mut inner = Mlp::new(
            &[dim, hidden, dim],
            &[Activation::Tanh, Activation::Identity],
            &mut rng,
        );
        let zeros = vec![0.0; inner.param_count()];
        inner.set_params_flat(&zeros);
        ResidualMlp { inner }
    }

    pub fn dim(&self) -> usize {
        self.inner.input_dim()
    }

    pub fn inner(&self) -> &Mlp {
        &self.inner
    }

    pub fn inner_mut(&mut self) -> &mut Mlp {
        &mut self.inner
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec64> {
        let mut y = self.inner.forward(x)?;
        for (yi, xi) in y.iter_mut().zip(x.iter()) {
            *yi += xi;
        }
        Ok(y)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<(Vec64, MlpCache)> {
        let (mut y, cache) = self.inner.forward_cached(x)?;
        for (yi, xi) in y.iter_mut().zip(x.iter()) {
            *yi += xi;
        }
        Ok((y, cache))
    }

    pub fn backward_into(
        &self,
        cache: &MlpCache,
        upstream: &[f64],
        grads: &mut MlpGrads,
    ) -> Result<Vec64> {
        let mut input_grad = self.inner.backward_into(cache, upstream, grads)?;
        for (g, u) in input_grad.iter_mut().zip(upstream.iter()) {
            *g += u;
        }
        Ok(input_grad)
    }

    pub fn zero_grads(&self) -> MlpGrads {
        self.inner.zero_grads()
    }

    pub fn sgd(&mut self, grads: &MlpGrads, lr: f64) {
        self.inner.sgd(grads, lr);
    }

    pub fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    pub fn params_flat(&self) -> Vec64 {
        self.inner.params_flat()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        self.inner.set_params_flat(flat);
    }
}

/// `θ ← θ − lr·g`, elementwise. Shapes must match.
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64) {
    assert_eq!(params.len(), grads.len(), "sgd_step shape mismatch");
    assert!(lr > 0.0, "learning rate must be positive");
    for (p, g) in params.iter_mut().zip(grads.iter()) {
        *p -= lr * g;
    }
}

/// Vector of i.i.d. normal entries; `std = 0` returns the constant mean.
pub fn sample_gaussian(rng: &mut SeededRng, dim: usize, mean: f64, std: f64) -> Result<Vec64> {
    if std < 0.0 {
        return Err(Error::contract("sample_gaussian: negative std"));
    }
    Ok((0..dim).map(|_| mean + std * rng.normal()).collect())
}
