//! Softmax, cross-entropy, KL divergence, and per-point attack losses.
//!
//! Probabilities are clamped at `PROB_CLAMP` inside every logarithm because
//! attack loops drive them to extremes; the gradients below are consistent
//! with those clamps (a clamped entry contributes zero gradient).

use super::model::{GradBundle, ModelParams};
use crate::error::{Error, Result};

/// Lower clamp applied to probabilities inside logarithms.
pub const PROB_CLAMP: f64 = 1e-12;

/// Estimated class-posterior probabilities for one input.
///
/// Invariants: each entry lies in `[0, 1]` and entries sum to 1 within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    probs: Vec<f64>,
}

impl ProbVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Input("probabilities must lie in [0, 1]".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!(
                "probabilities sum to {sum}, expected 1 within 1e-9"
            )));
        }
        Ok(Self { probs })
    }

    pub(crate) fn from_softmax(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.probs[k]
    }
}

/// Numerically stable softmax with max-logit subtraction.
pub fn softmax(logits: &[f64]) -> ProbVector {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    ProbVector::from_softmax(exps.iter().map(|&e| e / sum).collect())
}

/// Vector-Jacobian product of softmax: maps `dL/dp` to `dL/dlogits`.
pub fn softmax_vjp(probs: &[f64], dprobs: &[f64]) -> Vec<f64> {
    debug_assert_eq!(probs.len(), dprobs.len());
    let s: f64 = probs.iter().zip(dprobs).map(|(p, d)| p * d).sum();
    probs.iter().zip(dprobs).map(|(p, d)| p * (d - s)).collect()
}

/// `-log p_y`, with `p_y` clamped at `PROB_CLAMP`.
pub fn cross_entropy(probs: &ProbVector, y: usize) -> Result<f64> {
    if y >= probs.len() {
        return Err(Error::Input(format!(
            "label {y} out of range for {} classes",
            probs.len()
        )));
    }
    Ok(-probs.get(y).max(PROB_CLAMP).ln())
}

/// `KL(p || q) = sum_k p_k log(p_k / q_k)`.
///
/// Entries of `q` are clamped at `PROB_CLAMP` inside the log; terms with
/// `p_k = 0` contribute zero. The result is non-negative.
pub fn kl_divergence(p: &ProbVector, q: &ProbVector) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Input(format!(
            "distribution lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let mut kl = 0.0;
    for (&pk, &qk) in p.as_slice().iter().zip(q.as_slice()) {
        if pk > 0.0 {
            kl += pk * (pk.ln() - qk.max(PROB_CLAMP).ln());
        }
    }
    // Clamping q can push the sum a hair below zero; the true divergence is >= 0.
    Ok(kl.max(0.0))
}

/// Scalar losses of a single input point, used as attack ascent objectives.
#[derive(Debug, Clone)]
pub enum PointLoss {
    /// Cross-entropy against the true label.
    CrossEntropy { y: usize },
    /// `KL(p(x) || reference)` against a fixed reference distribution.
    KlToFixed { reference: Vec<f64> },
    /// Logit margin `max_{k != y} z_k - z_y`; positive iff misclassified.
    CwMargin { y: usize },
    /// Boosted cross-entropy `-log p_y - log(1 - max_{k != y} p_k)`.
    Bce { y: usize },
}

/// Index of the largest entry excluding `y`; ties break toward the lower index.
pub(crate) fn runner_up(values: &[f64], y: usize) -> usize {
    let mut best = None;
    for (k, &v) in values.iter().enumerate() {
        if k == y {
            continue;
        }
        match best {
            None => best = Some(k),
            Some(b) if v > values[b] => best = Some(k),
            _ => {}
        }
    }
    best.expect("runner_up requires at least two classes")
}

fn check_label(k_classes: usize, y: usize) -> Result<()> {
    if y >= k_classes {
        return Err(Error::Input(format!(
            "label {y} out of range for {k_classes} classes"
        )));
    }
    Ok(())
}

/// Evaluates a point loss at `x`.
pub fn point_loss_value(params: &ModelParams, x: &[f64], loss: &PointLoss) -> Result<f64> {
    let (logits, probs) = params.forward(x)?;
    point_loss_from_outputs(&logits, &probs, loss)
}

pub(crate) fn point_loss_from_outputs(
    logits: &[f64],
    probs: &ProbVector,
    loss: &PointLoss,
) -> Result<f64> {
    match loss {
        PointLoss::CrossEntropy { y } => cross_entropy(probs, *y),
        PointLoss::KlToFixed { reference } => {
            let q = ProbVector::new(reference.clone())?;
            kl_divergence(probs, &q)
        }
        PointLoss::CwMargin { y } => {
            check_label(logits.len(), *y)?;
            let k = runner_up(logits, *y);
            Ok(logits[k] - logits[*y])
        }
        PointLoss::Bce { y } => {
            check_label(probs.len(), *y)?;
            let k = runner_up(probs.as_slice(), *y);
            Ok(-probs.get(*y).max(PROB_CLAMP).ln() - (1.0 - probs.get(k)).max(PROB_CLAMP).ln())
        }
    }
}

/// Exact analytic gradients of a point loss with respect to the parameters
/// and the input. Returns the loss value alongside the gradients.
pub fn backward(params: &ModelParams, x: &[f64], loss: &PointLoss) -> Result<(f64, GradBundle)> {
    let trace = params.forward_trace(x)?;
    let probs = trace.probs.as_slice();
    let k_classes = probs.len();
    let value = point_loss_from_outputs(&trace.logits, &trace.probs, loss)?;

    let dlogits: Vec<f64> = match loss {
        PointLoss::CrossEntropy { y } => {
            if probs[*y] >= PROB_CLAMP {
                let mut d = probs.to_vec();
                d[*y] -= 1.0;
                d
            } else {
                vec![0.0; k_classes] // clamp active: loss is locally constant
            }
        }
        PointLoss::KlToFixed { reference } => {
            let mut dprobs = vec![0.0; k_classes];
            for k in 0..k_classes {
                if probs[k] > 0.0 {
                    dprobs[k] = (probs[k].ln() - reference[k].max(PROB_CLAMP).ln()) + 1.0;
                }
            }
            softmax_vjp(probs, &dprobs)
        }
        PointLoss::CwMargin { y } => {
            let k = runner_up(&trace.logits, *y);
            let mut d = vec![0.0; k_classes];
            d[k] += 1.0;
            d[*y] -= 1.0;
            d
        }
        PointLoss::Bce { y } => {
            let k = runner_up(probs, *y);
            let mut dprobs = vec![0.0; k_classes];
            if probs[*y] >= PROB_CLAMP {
                dprobs[*y] -= 1.0 / probs[*y];
            }
            if 1.0 - probs[k] >= PROB_CLAMP {
                dprobs[k] += 1.0 / (1.0 - probs[k]);
            }
            softmax_vjp(probs, &dprobs)
        }
    };

    Ok((value, params.backward_from_logit_grad(&trace, &dlogits)))
}
