//! Scalar training objectives and their exact gradients.
//!
//! Three base losses (cross-entropy adversarial training, the KL-regularized
//! trade-off objective, and the misclassification-aware variant) each come in
//! a plain and an instance-reweighted form. The reweighted forms treat the
//! weights as constants during differentiation: weights are computed from
//! margins first, then one gradient step is taken.
//!
//! Totals are sums over the batch, not means; combined with mean-1 weight
//! normalization this keeps magnitudes comparable to unweighted training.
//!
//! The misclassification-aware objective is minimized as
//! `sum_i w_i BCE_i + tradeoff * sum_i MKL_i` with both terms positive.

use serde::{Deserialize, Serialize};

use crate::attack::GenerationKind;
use crate::error::{Error, Result};
use crate::nn::{self, softmax_vjp, GradBundle, ModelParams, ParamGrads, PointLoss, PROB_CLAMP};
use crate::weight::WeightVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    At,
    Trades,
    Mart,
    MailAt,
    MailTrades,
    MailMart,
}

impl ObjectiveKind {
    /// Reweighted objectives use the supplied weights; the plain baselines
    /// force every weight to 1.
    pub fn is_weighted(self) -> bool {
        matches!(
            self,
            ObjectiveKind::MailAt | ObjectiveKind::MailTrades | ObjectiveKind::MailMart
        )
    }

    /// Perturbation generation matched to the objective: KL ascent for the
    /// trade-off objectives, cross-entropy ascent otherwise.
    pub fn generation(self) -> GenerationKind {
        match self {
            ObjectiveKind::Trades | ObjectiveKind::MailTrades => GenerationKind::KlAscent,
            _ => GenerationKind::CeAscent,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::At => "at",
            ObjectiveKind::Trades => "trades",
            ObjectiveKind::Mart => "mart",
            ObjectiveKind::MailAt => "mail_at",
            ObjectiveKind::MailTrades => "mail_trades",
            ObjectiveKind::MailMart => "mail_mart",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub kind: ObjectiveKind,
    /// Regularization multiplier for the KL/MKL term.
    pub tradeoff: f64,
}

impl ObjectiveConfig {
    /// Reference trade-off values: 5 for the TRADES forms, 6 for MART.
    pub fn defaults_for(kind: ObjectiveKind) -> Self {
        let tradeoff = match kind {
            ObjectiveKind::Trades | ObjectiveKind::MailTrades => 5.0,
            ObjectiveKind::Mart | ObjectiveKind::MailMart => 6.0,
            _ => 1.0,
        };
        Self { kind, tradeoff }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ObjectiveKind::At | ObjectiveKind::MailAt => Ok(()),
            _ if self.tradeoff > 0.0 => Ok(()),
            _ => Err(Error::Config(format!(
                "tradeoff must be > 0, got {}",
                self.tradeoff
            ))),
        }
    }
}

/// Loss breakdown for one batch. `total` is exactly the sum of
/// `per_instance`, each entry being that instance's full (weighted)
/// contribution.
#[derive(Debug, Clone)]
pub struct BatchLossReport {
    pub total: f64,
    pub per_instance: Vec<f64>,
    pub weights_used: WeightVector,
}

fn perturbed(x: &[f64], delta: &[f64]) -> Vec<f64> {
    x.iter().zip(delta).map(|(a, b)| a + b).collect()
}

/// `KL(p(x+delta) || p(x))` with gradients flowing through both forward
/// passes. The input gradient is with respect to `x`, holding `delta` fixed.
pub fn trades_kl_term(params: &ModelParams, x: &[f64], delta: &[f64]) -> Result<(f64, GradBundle)> {
    let trace_nat = params.forward_trace(x)?;
    let trace_adv = params.forward_trace(&perturbed(x, delta))?;
    let p = trace_adv.probs.as_slice();
    let q = trace_nat.probs.as_slice();

    let value = nn::kl_divergence(&trace_adv.probs, &trace_nat.probs)?;

    let k = p.len();
    let mut dp = vec![0.0; k];
    let mut dq = vec![0.0; k];
    for i in 0..k {
        if p[i] > 0.0 {
            dp[i] = (p[i].ln() - q[i].max(PROB_CLAMP).ln()) + 1.0;
        }
        if q[i] >= PROB_CLAMP {
            dq[i] = -p[i] / q[i];
        }
    }
    let mut bundle = params.backward_from_logit_grad(&trace_adv, &softmax_vjp(p, &dp));
    let nat_bundle = params.backward_from_logit_grad(&trace_nat, &softmax_vjp(q, &dq));
    bundle.add_scaled(&nat_bundle, 1.0);
    Ok((value, bundle))
}

/// Misclassification-aware KL: `KL(p(x+delta) || p(x)) * (1 - p_y(x))`.
/// Unlike the instance weights, the `(1 - p_y)` factor is part of the loss
/// and is differentiated.
pub fn mkl_term(
    params: &ModelParams,
    x: &[f64],
    delta: &[f64],
    y: usize,
) -> Result<(f64, GradBundle)> {
    let trace_nat = params.forward_trace(x)?;
    let trace_adv = params.forward_trace(&perturbed(x, delta))?;
    let p = trace_adv.probs.as_slice();
    let q = trace_nat.probs.as_slice();
    if y >= q.len() {
        return Err(Error::Input(format!(
            "label {y} out of range for {} classes",
            q.len()
        )));
    }

    let kl = nn::kl_divergence(&trace_adv.probs, &trace_nat.probs)?;
    let factor = 1.0 - q[y];
    let value = kl * factor;

    let k = p.len();
    let mut dp = vec![0.0; k];
    let mut dq = vec![0.0; k];
    for i in 0..k {
        if p[i] > 0.0 {
            dp[i] = factor * ((p[i].ln() - q[i].max(PROB_CLAMP).ln()) + 1.0);
        }
        if q[i] >= PROB_CLAMP {
            dq[i] = -factor * p[i] / q[i];
        }
    }
    dq[y] -= kl; // d(1 - q_y)/dq_y = -1

    let mut bundle = params.backward_from_logit_grad(&trace_adv, &softmax_vjp(p, &dp));
    let nat_bundle = params.backward_from_logit_grad(&trace_nat, &softmax_vjp(q, &dq));
    bundle.add_scaled(&nat_bundle, 1.0);
    Ok((value, bundle))
}

/// One instance's contribution to the objective, with exact parameter and
/// input gradients. `weight` is ignored by the unweighted baselines.
pub fn instance_loss_and_grad(
    params: &ModelParams,
    x: &[f64],
    delta: &[f64],
    y: usize,
    weight: f64,
    cfg: &ObjectiveConfig,
) -> Result<(f64, GradBundle)> {
    cfg.validate()?;
    let w = if cfg.kind.is_weighted() { weight } else { 1.0 };
    let adv = perturbed(x, delta);

    match cfg.kind {
        ObjectiveKind::At | ObjectiveKind::MailAt => {
            let (ce, mut bundle) = nn::backward(params, &adv, &PointLoss::CrossEntropy { y })?;
            scale_bundle(&mut bundle, w);
            Ok((w * ce, bundle))
        }
        ObjectiveKind::Trades | ObjectiveKind::MailTrades => {
            let (kl, kl_bundle) = trades_kl_term(params, x, delta)?;
            let (ce, ce_bundle) = nn::backward(params, x, &PointLoss::CrossEntropy { y })?;
            let scale = cfg.tradeoff * w;
            let mut bundle = ce_bundle;
            bundle.add_scaled(&kl_bundle, scale);
            Ok((scale * kl + ce, bundle))
        }
        ObjectiveKind::Mart | ObjectiveKind::MailMart => {
            let (bce, mut bundle) = nn::backward(params, &adv, &PointLoss::Bce { y })?;
            scale_bundle(&mut bundle, w);
            let (mkl, mkl_bundle) = mkl_term(params, x, delta, y)?;
            bundle.add_scaled(&mkl_bundle, cfg.tradeoff);
            Ok((w * bce + cfg.tradeoff * mkl, bundle))
        }
    }
}

fn scale_bundle(bundle: &mut GradBundle, scale: f64) {
    if scale == 1.0 {
        return;
    }
    for layer in &mut bundle.params.layers {
        for v in &mut layer.weights.data {
            *v *= scale;
        }
        for v in &mut layer.bias {
            *v *= scale;
        }
    }
    for v in &mut bundle.input {
        *v *= scale;
    }
}

/// Value of one instance's contribution (no gradients).
pub fn instance_loss(
    params: &ModelParams,
    x: &[f64],
    delta: &[f64],
    y: usize,
    weight: f64,
    cfg: &ObjectiveConfig,
) -> Result<f64> {
    cfg.validate()?;
    let w = if cfg.kind.is_weighted() { weight } else { 1.0 };
    let adv = perturbed(x, delta);
    match cfg.kind {
        ObjectiveKind::At | ObjectiveKind::MailAt => {
            let (_, probs) = params.forward(&adv)?;
            Ok(w * nn::cross_entropy(&probs, y)?)
        }
        ObjectiveKind::Trades | ObjectiveKind::MailTrades => {
            let (_, nat) = params.forward(x)?;
            let (_, advp) = params.forward(&adv)?;
            Ok(cfg.tradeoff * w * nn::kl_divergence(&advp, &nat)? + nn::cross_entropy(&nat, y)?)
        }
        ObjectiveKind::Mart | ObjectiveKind::MailMart => {
            let (_, nat) = params.forward(x)?;
            let (logits, advp) = params.forward(&adv)?;
            if y >= nat.len() {
                return Err(Error::Input(format!(
                    "label {y} out of range for {} classes",
                    nat.len()
                )));
            }
            let bce = nn::point_loss_from_outputs(&logits, &advp, &PointLoss::Bce { y })?;
            let mkl = nn::kl_divergence(&advp, &nat)? * (1.0 - nat.get(y));
            Ok(w * bce + cfg.tradeoff * mkl)
        }
    }
}

fn check_batch(
    xs: &[Vec<f64>],
    deltas: &[Vec<f64>],
    ys: &[usize],
    weights: &WeightVector,
) -> Result<()> {
    if xs.len() != deltas.len() || xs.len() != ys.len() || xs.len() != weights.len() {
        return Err(Error::Input(format!(
            "batch length mismatch: {} inputs, {} deltas, {} labels, {} weights",
            xs.len(),
            deltas.len(),
            ys.len(),
            weights.len()
        )));
    }
    if xs.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    Ok(())
}

fn weights_used(cfg: &ObjectiveConfig, weights: &WeightVector) -> WeightVector {
    if cfg.kind.is_weighted() {
        weights.clone()
    } else {
        WeightVector::ones(weights.len())
    }
}

/// Batch objective value: the per-kind weighted sum over instances.
pub fn batch_loss(
    params: &ModelParams,
    xs: &[Vec<f64>],
    deltas: &[Vec<f64>],
    ys: &[usize],
    weights: &WeightVector,
    cfg: &ObjectiveConfig,
) -> Result<BatchLossReport> {
    check_batch(xs, deltas, ys, weights)?;
    let mut per_instance = Vec::with_capacity(xs.len());
    let mut total = 0.0;
    for i in 0..xs.len() {
        let v = instance_loss(params, &xs[i], &deltas[i], ys[i], weights.weights[i], cfg)?;
        per_instance.push(v);
        total += v;
    }
    Ok(BatchLossReport {
        total,
        per_instance,
        weights_used: weights_used(cfg, weights),
    })
}

/// Batch objective value plus the parameter gradient of the total,
/// accumulated in instance order.
pub fn batch_loss_and_grad(
    params: &ModelParams,
    xs: &[Vec<f64>],
    deltas: &[Vec<f64>],
    ys: &[usize],
    weights: &WeightVector,
    cfg: &ObjectiveConfig,
) -> Result<(BatchLossReport, ParamGrads)> {
    check_batch(xs, deltas, ys, weights)?;
    let mut per_instance = Vec::with_capacity(xs.len());
    let mut total = 0.0;
    let mut grads = ParamGrads::zeros_like(params);
    for i in 0..xs.len() {
        let (v, bundle) =
            instance_loss_and_grad(params, &xs[i], &deltas[i], ys[i], weights.weights[i], cfg)?;
        per_instance.push(v);
        total += v;
        grads.add_scaled(&bundle.params, 1.0);
    }
    Ok((
        BatchLossReport {
            total,
            per_instance,
            weights_used: weights_used(cfg, weights),
        },
        grads,
    ))
}
