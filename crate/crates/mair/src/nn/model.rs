//! Dense feed-forward classifier with exact reverse-mode gradients.
//!
//! The network is a stack of dense layers with ReLU on every hidden layer and
//! a linear output layer producing `K` logits. `forward_trace` caches the
//! per-layer pre-activations so `backward_from_logit_grad` can run exact
//! backpropagation to both the parameters and the input. Every loss in this
//! crate reduces to a gradient with respect to logits at one or two forward
//! points, so this pair of primitives is the only differentiation machinery
//! needed.
//!
//! All arithmetic is 64-bit and strictly sequential, so results are bitwise
//! reproducible.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::loss::{softmax, ProbVector};
use super::Matrix;
use crate::error::{Error, Result};

/// Hidden-layer activation. Only ReLU is supported; the subgradient at 0 is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
        }
    }

    /// Derivative evaluated at the pre-activation `z`.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Activation::Relu),
            other => Err(Error::Config(format!("unknown activation code {other}"))),
        }
    }
}

/// One dense layer: `z = W a + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn in_dim(&self) -> usize {
        self.weights.cols
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows
    }
}

/// All parameters of the classifier.
///
/// Layer dimensions chain; the last layer's output width is the class count K.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<DenseLayer>,
    pub activation: Activation,
}

impl ModelParams {
    /// Builds a network from explicit layers, validating the dimension chain.
    pub fn new(layers: Vec<DenseLayer>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Config(format!(
                    "layer {} outputs {} values but layer {} expects {}",
                    i,
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::Config(format!(
                    "layer {i} bias length {} does not match output width {}",
                    layer.bias.len(),
                    layer.out_dim()
                )));
            }
        }
        if layers.last().unwrap().out_dim() < 2 {
            return Err(Error::Config("output width K must be at least 2".into()));
        }
        Ok(Self { layers, activation })
    }

    /// Random init with He-style uniform weights and zero biases.
    ///
    /// `dims` lists input width, hidden widths, and K, e.g. `[2, 16, 16, 2]`.
    pub fn random(dims: &[usize], rng: &mut ChaCha8Rng) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config(
                "need at least input and output dimensions".into(),
            ));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            if fan_in == 0 || fan_out == 0 {
                return Err(Error::Config("layer dimensions must be positive".into()));
            }
            let limit = (6.0 / fan_in as f64).sqrt();
            let data: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            layers.push(DenseLayer {
                weights: Matrix::new(fan_out, fan_in, data)?,
                bias: vec![0.0; fan_out],
            });
        }
        Self::new(layers, Activation::Relu)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    /// Number of classes K.
    pub fn num_classes(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    /// Layer widths including input and output, e.g. `[2, 16, 16, 2]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.out_dim()));
        dims
    }

    /// Forward pass returning logits and softmax probabilities.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ProbVector)> {
        let trace = self.forward_trace(x)?;
        let probs = trace.probs.clone();
        Ok((trace.logits, probs))
    }

    /// Forward pass keeping per-layer activations for backprop.
    pub fn forward_trace(&self, x: &[f64]) -> Result<ForwardTrace> {
        if x.len() != self.input_dim() {
            return Err(Error::Config(format!(
                "input has {} values but the first layer expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let n_layers = self.layers.len();
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        let mut preacts: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        activations.push(x.to_vec());

        for (l, layer) in self.layers.iter().enumerate() {
            let input = activations.last().unwrap();
            let mut z = layer.bias.clone();
            let mut lin = vec![0.0; layer.out_dim()];
            layer.weights.matvec(input, &mut lin);
            for (zi, li) in z.iter_mut().zip(&lin) {
                *zi += li;
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite activation in layer {l}"
                )));
            }
            if l + 1 < n_layers {
                let a: Vec<f64> = z.iter().map(|&v| self.activation.apply(v)).collect();
                preacts.push(z);
                activations.push(a);
            } else {
                preacts.push(z);
            }
        }

        let logits = preacts.last().unwrap().clone();
        let probs = softmax(&logits);
        Ok(ForwardTrace {
            activations,
            preacts,
            logits,
            probs,
        })
    }

    /// Prediction `h(x) = argmax_k p_k(x)`; ties break toward the lower index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let (logits, _) = self.forward(x)?;
        Ok(argmax(&logits))
    }

    /// Backpropagates a gradient with respect to the logits through the
    /// cached forward pass, producing exact parameter and input gradients.
    pub fn backward_from_logit_grad(&self, trace: &ForwardTrace, dlogits: &[f64]) -> GradBundle {
        debug_assert_eq!(dlogits.len(), self.num_classes());
        let n_layers = self.layers.len();
        let mut param_grads = ParamGrads::zeros_like(self);
        let mut dz = dlogits.to_vec();

        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let input = &trace.activations[l];
            let grad = &mut param_grads.layers[l];
            for (r, &dzr) in dz.iter().enumerate() {
                grad.bias[r] += dzr;
                let row = &mut grad.weights.data[r * layer.in_dim()..(r + 1) * layer.in_dim()];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += dzr * a;
                }
            }
            let mut da = vec![0.0; layer.in_dim()];
            layer.weights.matvec_transpose_add(&dz, &mut da);
            if l > 0 {
                let prev_z = &trace.preacts[l - 1];
                dz = da
                    .iter()
                    .zip(prev_z)
                    .map(|(d, &z)| d * self.activation.derivative(z))
                    .collect();
            } else {
                return GradBundle {
                    params: param_grads,
                    input: da,
                };
            }
        }
        unreachable!("network has at least one layer");
    }
}

/// Index of the maximum entry; ties break toward the lower index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Cached intermediate values from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `activations[0]` is the input, `activations[l]` the post-ReLU output of layer l.
    pub activations: Vec<Vec<f64>>,
    /// Pre-activations of every layer; the last entry equals the logits.
    pub preacts: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub probs: ProbVector,
}

/// Gradients of every layer's weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<LayerGrad>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl ParamGrads {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    /// `self += scale * other`, matching layer by layer.
    pub fn add_scaled(&mut self, other: &ParamGrads, scale: f64) {
        for (dst, src) in self.layers.iter_mut().zip(&other.layers) {
            for (d, s) in dst.weights.data.iter_mut().zip(&src.weights.data) {
                *d += scale * s;
            }
            for (d, s) in dst.bias.iter_mut().zip(&src.bias) {
                *d += scale * s;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.data.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite())
        })
    }
}

/// Parameter and input gradients of one scalar loss.
#[derive(Debug, Clone)]
pub struct GradBundle {
    pub params: ParamGrads,
    pub input: Vec<f64>,
}

impl GradBundle {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            params: ParamGrads::zeros_like(params),
            input: vec![0.0; params.input_dim()],
        }
    }

    pub fn add_scaled(&mut self, other: &GradBundle, scale: f64) {
        self.params.add_scaled(&other.params, scale);
        for (d, s) in self.input.iter_mut().zip(&other.input) {
            *d += scale * s;
        }
    }
}
