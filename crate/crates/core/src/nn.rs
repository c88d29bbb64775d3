//! Small fully-connected networks with hand-written reverse mode and Adam.
//!
//! A network is a list of [`Dense`] layers. The generator chains its two
//! layers; the discriminator feeds one shared trunk into two heads (real/fake
//! sigmoid and K-way softmax), so layer order there is `[trunk, real, class]`.
//! Optimizer moments live next to the weights they belong to, which makes a
//! cloned individual resume training exactly where its parent stopped.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{matmul_into, matmul_nt_into, matmul_tn_into};
use crate::rng::RngStream;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu { slope: f64 },
    Tanh,
    Sigmoid,
    /// Row-wise softmax.
    Softmax,
}

impl Activation {
    fn apply(self, z: &mut Matrix) {
        match self {
            Activation::Identity => {}
            Activation::Relu => z.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::LeakyRelu { slope } => z
                .as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = if *v > 0.0 { *v } else { slope * *v }),
            Activation::Tanh => z.as_mut_slice().iter_mut().for_each(|v| *v = libm::tanh(*v)),
            Activation::Sigmoid => z.as_mut_slice().iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Softmax => {
                for r in 0..z.rows() {
                    softmax_in_place(z.row_mut(r));
                }
            }
        }
    }

    /// Turns the gradient w.r.t. the activation output into the gradient
    /// w.r.t. the pre-activation, using only the cached output `y`.
    fn backward(self, y: &Matrix, dy: &mut Matrix) {
        let ys = y.as_slice();
        match self {
            Activation::Identity => {}
            Activation::Relu => {
                for (g, &o) in dy.as_mut_slice().iter_mut().zip(ys) {
                    if o <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            Activation::LeakyRelu { slope } => {
                for (g, &o) in dy.as_mut_slice().iter_mut().zip(ys) {
                    if o <= 0.0 {
                        *g *= slope;
                    }
                }
            }
            Activation::Tanh => {
                for (g, &o) in dy.as_mut_slice().iter_mut().zip(ys) {
                    *g *= 1.0 - o * o;
                }
            }
            Activation::Sigmoid => {
                for (g, &o) in dy.as_mut_slice().iter_mut().zip(ys) {
                    *g *= o * (1.0 - o);
                }
            }
            Activation::Softmax => {
                for r in 0..y.rows() {
                    let p = y.row(r);
                    let g = dy.row_mut(r);
                    let dot: f64 = p.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
                    for (gi, &pi) in g.iter_mut().zip(p) {
                        *gi = pi * (*gi - dot);
                    }
                }
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.0003,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Argument("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Argument("Adam betas must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Argument("Adam epsilon must be positive"));
        }
        Ok(())
    }
}

/// One affine layer followed by an activation, plus its Adam moments.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dense {
    /// `inputs x outputs`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
    pub m_weights: Matrix,
    pub v_weights: Matrix,
    pub m_bias: Vec<f64>,
    pub v_bias: Vec<f64>,
}

impl Dense {
    /// Glorot-uniform for saturating outputs, He-uniform for rectifiers.
    pub fn init(inputs: usize, outputs: usize, activation: Activation, rng: &mut RngStream) -> Self {
        let bound = match activation {
            Activation::Relu | Activation::LeakyRelu { .. } => libm::sqrt(6.0 / inputs as f64),
            _ => libm::sqrt(6.0 / (inputs + outputs) as f64),
        };
        let mut weights = Matrix::zeros(inputs, outputs);
        for w in weights.as_mut_slice() {
            *w = rng.uniform(-bound, bound);
        }
        Self::from_weights(weights, vec![0.0; outputs], activation)
    }

    pub fn from_weights(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Self {
        let (i, o) = weights.shape();
        assert_eq!(bias.len(), o, "bias width must match weight columns");
        Self {
            weights,
            bias,
            activation,
            m_weights: Matrix::zeros(i, o),
            v_weights: Matrix::zeros(i, o),
            m_bias: vec![0.0; o],
            v_bias: vec![0.0; o],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.cols()
    }

    fn forward(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.outputs());
        matmul_into(x, &self.weights, &mut out);
        let o = self.outputs();
        for r in 0..out.rows() {
            for (v, b) in out.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        debug_assert_eq!(out.cols(), o);
        self.activation.apply(&mut out);
        out
    }

    /// Back-propagates `dy` (gradient w.r.t. this layer's output). Parameter
    /// gradients are accumulated into `grad` when given; the input gradient
    /// is returned when `want_input` is set.
    fn backward(
        &self,
        input: &Matrix,
        output: &Matrix,
        mut dy: Matrix,
        grad: Option<&mut LayerGrad>,
        want_input: bool,
    ) -> Option<Matrix> {
        self.activation.backward(output, &mut dy);
        if let Some(g) = grad {
            let mut dw = Matrix::zeros(self.inputs(), self.outputs());
            matmul_tn_into(input, &dy, &mut dw);
            for (acc, v) in g.weights.as_mut_slice().iter_mut().zip(dw.as_slice()) {
                *acc += v;
            }
            for r in 0..dy.rows() {
                for (acc, v) in g.bias.iter_mut().zip(dy.row(r)) {
                    *acc += v;
                }
            }
        }
        want_input.then(|| {
            let mut dx = Matrix::zeros(dy.rows(), self.inputs());
            matmul_nt_into(&dy, &self.weights, &mut dx);
            dx
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Parameter gradients, shape-congruent with a [`NetworkParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: Matrix::zeros(l.inputs(), l.outputs()),
                    bias: vec![0.0; l.outputs()],
                })
                .collect(),
        }
    }

    /// Gradient entry at a flat index (same order as [`NetworkParams::param`]).
    pub fn flat(&self, mut index: usize) -> f64 {
        for l in &self.layers {
            let nw = l.weights.as_slice().len();
            if index < nw {
                return l.weights.as_slice()[index];
            }
            index -= nw;
            if index < l.bias.len() {
                return l.bias[index];
            }
            index -= l.bias.len();
        }
        panic!("gradient index out of range");
    }

    /// Index of the first layer holding a non-finite entry.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| !l.weights.is_finite() || l.bias.iter().any(|v| !v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkParams {
    pub layers: Vec<Dense>,
    /// Adam steps taken so far.
    pub step: u64,
}

impl NetworkParams {
    pub fn new(layers: Vec<Dense>) -> Self {
        Self { layers, step: 0 }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.as_slice().len() + l.bias.len()).sum()
    }

    fn locate(&mut self, mut index: usize) -> &mut f64 {
        for l in &mut self.layers {
            let nw = l.weights.as_slice().len();
            if index < nw {
                return &mut l.weights.as_mut_slice()[index];
            }
            index -= nw;
            if index < l.bias.len() {
                return &mut l.bias[index];
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    /// Parameter at a flat index: layer by layer, weights (row-major) then bias.
    pub fn param(&self, index: usize) -> f64 {
        let mut index = index;
        for l in &self.layers {
            let nw = l.weights.as_slice().len();
            if index < nw {
                return l.weights.as_slice()[index];
            }
            index -= nw;
            if index < l.bias.len() {
                return l.bias[index];
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        *self.locate(index) = value;
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    /// One Adam update. Non-finite gradients are rejected before anything
    /// changes, reporting the offending layer.
    pub fn apply_adam(&mut self, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(Error::Argument("gradient does not match network"));
        }
        if let Some(layer) = grads.first_non_finite() {
            return Err(Error::Divergence { layer });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - libm::pow(cfg.beta1, t as f64);
        let c2 = 1.0 - libm::pow(cfg.beta2, t as f64);
        let update = |w: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *w -= cfg.learning_rate * mhat / (libm::sqrt(vhat) + cfg.epsilon);
        };
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (((w, m), v), &gw) in layer
                .weights
                .as_mut_slice()
                .iter_mut()
                .zip(layer.m_weights.as_mut_slice())
                .zip(layer.v_weights.as_mut_slice())
                .zip(g.weights.as_slice())
            {
                update(w, m, v, gw);
            }
            for (((b, m), v), &gb) in layer
                .bias
                .iter_mut()
                .zip(layer.m_bias.iter_mut())
                .zip(layer.v_bias.iter_mut())
                .zip(&g.bias)
            {
                update(b, m, v, gb);
            }
        }
        Ok(())
    }
}

/// Widths and slopes shared by every individual of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Architecture {
    pub latent_dim: usize,
    pub hidden: usize,
    pub data_dim: usize,
    pub classes: usize,
    pub leaky_slope: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            latent_dim: 16,
            hidden: 64,
            data_dim: 2,
            classes: 10,
            leaky_slope: 0.2,
        }
    }
}

fn shape_err(op: &'static str, x: &Matrix, want: usize) -> Error {
    Error::Shape {
        op,
        left: x.shape(),
        right: (x.rows(), want),
    }
}

/// `latent → hidden (ReLU) → data (tanh)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeneratorNet {
    pub params: NetworkParams,
}

pub struct GeneratorCache {
    z: Matrix,
    hidden: Matrix,
    out: Matrix,
}

impl GeneratorCache {
    pub fn output(&self) -> &Matrix {
        &self.out
    }
}

impl GeneratorNet {
    pub fn new(arch: &Architecture, rng: &mut RngStream) -> Self {
        Self::from_layers(
            Dense::init(arch.latent_dim, arch.hidden, Activation::Relu, rng),
            Dense::init(arch.hidden, arch.data_dim, Activation::Tanh, rng),
        )
    }

    pub fn from_layers(hidden: Dense, out: Dense) -> Self {
        assert_eq!(hidden.outputs(), out.inputs());
        Self {
            params: NetworkParams::new(vec![hidden, out]),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.params.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.params.layers[1].outputs()
    }

    pub fn forward(&self, z: &Matrix) -> Result<GeneratorCache> {
        if z.cols() != self.latent_dim() {
            return Err(shape_err("forward_generator", z, self.latent_dim()));
        }
        let hidden = self.params.layers[0].forward(z);
        let out = self.params.layers[1].forward(&hidden);
        Ok(GeneratorCache {
            z: z.clone(),
            hidden,
            out,
        })
    }

    pub fn generate(&self, z: &Matrix) -> Result<Matrix> {
        Ok(self.forward(z)?.out)
    }

    /// Parameter gradients given `d_out`, the loss gradient w.r.t. the samples.
    pub fn backward(&self, cache: &GeneratorCache, d_out: &Matrix) -> Result<Gradients> {
        if d_out.shape() != cache.out.shape() {
            return Err(Error::Shape {
                op: "backward_generator",
                left: d_out.shape(),
                right: cache.out.shape(),
            });
        }
        let mut grads = Gradients::zeros_like(&self.params);
        let (g0, g1) = grads.layers.split_at_mut(1);
        let layers = &self.params.layers;
        let dh = layers[1]
            .backward(&cache.hidden, &cache.out, d_out.clone(), Some(&mut g1[0]), true)
            .expect("input gradient requested");
        layers[0].backward(&cache.z, &cache.hidden, dh, Some(&mut g0[0]), false);
        Ok(grads)
    }

    pub fn backward_and_step(&mut self, cache: &GeneratorCache, d_out: &Matrix, adam: &AdamConfig) -> Result<()> {
        let grads = self.backward(cache, d_out)?;
        self.params.apply_adam(&grads, adam)
    }
}

/// Shared `data → hidden (LeakyReLU)` trunk feeding a sigmoid real/fake head
/// and a softmax class head.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscriminatorNet {
    pub params: NetworkParams,
}

pub struct DiscriminatorCache {
    x: Matrix,
    trunk: Matrix,
    real: Matrix,
    class: Matrix,
}

impl DiscriminatorCache {
    /// `D_real(x)` per row.
    pub fn real_probs(&self) -> &[f64] {
        self.real.as_slice()
    }

    pub fn class_probs(&self) -> &Matrix {
        &self.class
    }

    pub fn batch(&self) -> usize {
        self.x.rows()
    }
}

impl DiscriminatorNet {
    pub fn new(arch: &Architecture, rng: &mut RngStream) -> Self {
        Self::from_layers(
            Dense::init(
                arch.data_dim,
                arch.hidden,
                Activation::LeakyRelu {
                    slope: arch.leaky_slope,
                },
                rng,
            ),
            Dense::init(arch.hidden, 1, Activation::Sigmoid, rng),
            Dense::init(arch.hidden, arch.classes, Activation::Softmax, rng),
        )
    }

    pub fn from_layers(trunk: Dense, real: Dense, class: Dense) -> Self {
        assert_eq!(trunk.outputs(), real.inputs());
        assert_eq!(trunk.outputs(), class.inputs());
        assert_eq!(real.outputs(), 1);
        Self {
            params: NetworkParams::new(vec![trunk, real, class]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.params.layers[0].inputs()
    }

    pub fn classes(&self) -> usize {
        self.params.layers[2].outputs()
    }

    pub fn forward(&self, x: &Matrix) -> Result<DiscriminatorCache> {
        if x.cols() != self.input_dim() {
            return Err(shape_err("forward_discriminator", x, self.input_dim()));
        }
        let layers = &self.params.layers;
        let trunk = layers[0].forward(x);
        let real = layers[1].forward(&trunk);
        let class = layers[2].forward(&trunk);
        Ok(DiscriminatorCache {
            x: x.clone(),
            trunk,
            real,
            class,
        })
    }

    /// `(D_real, D_class)` for a batch.
    pub fn predict(&self, x: &Matrix) -> Result<(Vec<f64>, Matrix)> {
        let c = self.forward(x)?;
        Ok((c.real.into_vec(), c.class))
    }

    fn backprop(
        &self,
        cache: &DiscriminatorCache,
        d_real: Option<&[f64]>,
        d_class: Option<&Matrix>,
        mut grads: Option<&mut Gradients>,
        want_input: bool,
    ) -> Result<Option<Matrix>> {
        let n = cache.batch();
        let layers = &self.params.layers;
        let mut d_trunk = Matrix::zeros(n, layers[0].outputs());
        if let Some(dr) = d_real {
            if dr.len() != n {
                return Err(Error::Argument("real-head gradient length differs from batch"));
            }
            let dy = Matrix::column(dr).map_err(|_| Error::Divergence { layer: 1 })?;
            let g = grads.as_deref_mut().map(|g| &mut g.layers[1]);
            let dt = layers[1]
                .backward(&cache.trunk, &cache.real, dy, g, true)
                .expect("input gradient requested");
            add_into(&mut d_trunk, &dt);
        }
        if let Some(dc) = d_class {
            if dc.shape() != cache.class.shape() {
                return Err(Error::Shape {
                    op: "backward_discriminator",
                    left: dc.shape(),
                    right: cache.class.shape(),
                });
            }
            let g = grads.as_deref_mut().map(|g| &mut g.layers[2]);
            let dt = layers[2]
                .backward(&cache.trunk, &cache.class, dc.clone(), g, true)
                .expect("input gradient requested");
            add_into(&mut d_trunk, &dt);
        }
        let g = grads.map(|g| &mut g.layers[0]);
        Ok(layers[0].backward(&cache.x, &cache.trunk, d_trunk, g, want_input))
    }

    /// Accumulates parameter gradients for one forward batch into `grads`.
    pub fn accumulate_gradients(
        &self,
        cache: &DiscriminatorCache,
        d_real: Option<&[f64]>,
        d_class: Option<&Matrix>,
        grads: &mut Gradients,
    ) -> Result<()> {
        self.backprop(cache, d_real, d_class, Some(grads), false)?;
        Ok(())
    }

    /// Gradient w.r.t. the input samples, leaving parameters untouched.
    pub fn input_gradient(&self, cache: &DiscriminatorCache, d_real: Option<&[f64]>, d_class: Option<&Matrix>) -> Result<Matrix> {
        let dx = self
            .backprop(cache, d_real, d_class, None, true)?
            .expect("input gradient requested");
        if !dx.is_finite() {
            return Err(Error::Divergence { layer: 0 });
        }
        Ok(dx)
    }

    pub fn backward_and_step(
        &mut self,
        cache: &DiscriminatorCache,
        d_real: Option<&[f64]>,
        d_class: Option<&Matrix>,
        adam: &AdamConfig,
    ) -> Result<()> {
        let mut grads = Gradients::zeros_like(&self.params);
        self.accumulate_gradients(cache, d_real, d_class, &mut grads)?;
        self.params.apply_adam(&grads, adam)
    }
}

fn add_into(acc: &mut Matrix, v: &Matrix) {
    for (a, b) in acc.as_mut_slice().iter_mut().zip(v.as_slice()) {
        *a += b;
    }
}
