//! Adversarial perturbation generation.
//!
//! All attacks are signed-gradient ascent on a per-point loss, projected back
//! into the threat model after every step. `pgd` is the plain fixed-step
//! variant with selectable ascent loss; `lm_pgd` adds momentum and a
//! line-searched step size, which is useful for exposing how step-count
//! measurements depend on the attack path.
//!
//! Attacks are pure per-instance: given identical inputs and config they
//! produce bitwise-identical [`Perturbation`]s. Random initialization draws
//! from a stream keyed by `cfg.seed`, so callers running instances in
//! parallel derive one seed per instance and still match serial execution.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{argmax, backward, ModelParams, PointLoss};
use crate::rng;
#[cfg(test)]
use rand_chacha::rand_core::SeedableRng;

/// The set of allowed perturbations: an L∞ ball of radius `epsilon`,
/// optionally intersected with a per-coordinate domain box `[lo, hi]`
/// containing `x + delta`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ThreatModel {
    pub epsilon: f64,
    pub clamp_domain: Option<(f64, f64)>,
}

impl ThreatModel {
    pub fn new(epsilon: f64, clamp_domain: Option<(f64, f64)>) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {epsilon}")));
        }
        if let Some((lo, hi)) = clamp_domain {
            if !(lo < hi) {
                return Err(Error::Config(format!(
                    "domain box [{lo}, {hi}] must have lo < hi"
                )));
            }
        }
        Ok(Self {
            epsilon,
            clamp_domain,
        })
    }

    /// L∞ ball of radius `epsilon` with no domain box.
    pub fn linf(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, None)
    }

    /// L∞ ball intersected with the unit box, for image-like data in [0, 1]^d.
    pub fn image(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, Some((0.0, 1.0)))
    }
}

/// Ascent objective driving the attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackLoss {
    /// Cross-entropy on the true label.
    Ce,
    /// Logit margin `max_{k != y} z_k - z_y`.
    CwMargin,
    /// KL divergence from the natural prediction, `KL(p(x+d) || p(x))`.
    Kl,
}

/// Configuration for plain PGD.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct AttackConfig {
    /// Maximum iterations T.
    pub steps: usize,
    /// Step size alpha.
    pub step_size: f64,
    pub loss_kind: AttackLoss,
    /// Draw the initial perturbation uniformly from [-eps, eps] per coordinate.
    pub rand_init: bool,
    pub seed: u64,
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::Config("attack needs at least one step".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Config(format!(
                "step size must be > 0, got {}",
                self.step_size
            )));
        }
        Ok(())
    }
}

/// Configuration for line-search & momentum PGD.
///
/// Each iteration updates a velocity `v <- momentum * v + alpha * sign(g)`
/// and steps `delta <- Proj[delta + v]`, where `alpha` maximizes the loss over
/// an evenly spaced grid of `line_search_points` candidates in
/// `[alpha_min(t), alpha_max]`. The lower bound drops to `alpha_min_late`
/// after `early_iters` iterations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct LmPgdConfig {
    pub momentum: f64,
    pub alpha_max: f64,
    pub alpha_min_early: f64,
    /// Iterations (1-based) during which `alpha_min_early` applies.
    pub early_iters: usize,
    pub alpha_min_late: f64,
    pub line_search_points: usize,
}

impl LmPgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.line_search_points == 0 {
            return Err(Error::Config("line search grid is empty".into()));
        }
        for (label, v) in [
            ("alpha_max", self.alpha_max),
            ("alpha_min_early", self.alpha_min_early),
            ("alpha_min_late", self.alpha_min_late),
        ] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{label} must be >= 0, got {v}")));
            }
        }
        if self.alpha_min_early > self.alpha_max || self.alpha_min_late > self.alpha_max {
            return Err(Error::Config("alpha_min must not exceed alpha_max".into()));
        }
        Ok(())
    }

    fn alpha_min(&self, iter: usize) -> f64 {
        if iter <= self.early_iters {
            self.alpha_min_early
        } else {
            self.alpha_min_late
        }
    }

    /// Scaled version of the reference demo schedule: momentum 0.8, step
    /// bounds 6/8 and 4/8 of epsilon (dropping to 0 after 15 iterations),
    /// 8 grid points. With epsilon = 8/255 this reproduces the 6/255 and
    /// 4/255 bounds exactly.
    pub fn demo_for_epsilon(epsilon: f64) -> Self {
        Self {
            momentum: 0.8,
            alpha_max: epsilon * 6.0 / 8.0,
            alpha_min_early: epsilon * 4.0 / 8.0,
            early_iters: 15,
            alpha_min_late: 0.0,
            line_search_points: 8,
        }
    }
}

/// One observed state of the attacked input.
///
/// Index 0 is the initial state (after init and projection, before any
/// ascent step); index t is the state after PGD iteration t.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    /// Value of the ascent objective at this state.
    pub loss: f64,
    pub predicted: usize,
    /// True when `predicted` differs from the attacked label.
    pub crossed: bool,
}

/// An L∞-bounded additive perturbation with its attack trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    /// Final perturbation after the last iteration.
    pub delta: Vec<f64>,
    /// States at iterations 0..=T; `trace[0]` is the initial state.
    pub trace: Vec<TraceStep>,
    /// First trace index whose prediction differs from the label; 0 means
    /// the instance was already misclassified before any ascent step.
    pub crossed_at: Option<usize>,
    /// Perturbation at the crossing index (None when no crossing happened).
    pub delta_at_crossing: Option<Vec<f64>>,
}

impl Perturbation {
    /// Number of ascent iterations recorded (trace length minus the initial state).
    pub fn steps(&self) -> usize {
        self.trace.len() - 1
    }
}

/// Per-coordinate projection onto the threat model around `x`.
///
/// Clamps to `[-eps, eps]` first; when a domain box is configured, clamps
/// further so `x + delta` stays inside it. Values already inside pass
/// through unchanged.
pub fn project(delta: &mut [f64], threat: &ThreatModel, x: &[f64]) {
    let eps = threat.epsilon;
    match threat.clamp_domain {
        None => {
            for d in delta.iter_mut() {
                *d = d.clamp(-eps, eps);
            }
        }
        Some((lo, hi)) => {
            for (d, &xi) in delta.iter_mut().zip(x) {
                *d = d.clamp(-eps, eps).clamp(lo - xi, hi - xi);
            }
        }
    }
}

/// Mathematical signum: 0 at 0 (unlike `f64::signum`).
#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

struct Observer<'a> {
    params: &'a ModelParams,
    x: &'a [f64],
    y: usize,
    loss: PointLoss,
}

impl<'a> Observer<'a> {
    fn new(params: &'a ModelParams, x: &'a [f64], y: usize, kind: AttackLoss) -> Result<Self> {
        let loss = match kind {
            AttackLoss::Ce => PointLoss::CrossEntropy { y },
            AttackLoss::CwMargin => PointLoss::CwMargin { y },
            AttackLoss::Kl => {
                let (_, nat_probs) = params.forward(x)?;
                PointLoss::KlToFixed {
                    reference: nat_probs.as_slice().to_vec(),
                }
            }
        };
        Ok(Self { params, x, y, loss })
    }

    fn perturbed(&self, delta: &[f64]) -> Vec<f64> {
        self.x.iter().zip(delta).map(|(a, b)| a + b).collect()
    }

    /// Loss value and input gradient at `x + delta`.
    fn loss_and_grad(&self, delta: &[f64], step: usize) -> Result<(f64, Vec<f64>)> {
        let point = self.perturbed(delta);
        let (value, grads) = backward(self.params, &point, &self.loss)?;
        if !value.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite attack loss at step {step}"
            )));
        }
        Ok((value, grads.input))
    }

    fn loss_only(&self, delta: &[f64], step: usize) -> Result<f64> {
        let point = self.perturbed(delta);
        let (logits, probs) = self.params.forward(&point)?;
        let value = crate::nn::point_loss_from_outputs(&logits, &probs, &self.loss)?;
        if !value.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite attack loss at step {step}"
            )));
        }
        Ok(value)
    }

    fn observe(&self, delta: &[f64], step: usize) -> Result<TraceStep> {
        let point = self.perturbed(delta);
        let (logits, probs) = self.params.forward(&point)?;
        let loss = crate::nn::point_loss_from_outputs(&logits, &probs, &self.loss)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite attack loss at step {step}"
            )));
        }
        let predicted = argmax(&logits);
        Ok(TraceStep {
            loss,
            predicted,
            crossed: predicted != self.y,
        })
    }
}

fn finish(delta: Vec<f64>, trace: Vec<TraceStep>, crossings: Vec<Vec<f64>>) -> Perturbation {
    let crossed_at = trace.iter().position(|s| s.crossed);
    let delta_at_crossing = crossed_at.map(|t| crossings[t].clone());
    Perturbation {
        delta,
        trace,
        crossed_at,
        delta_at_crossing,
    }
}

/// Plain projected-gradient ascent: `delta <- Proj[delta + alpha * sign(g)]`
/// for `cfg.steps` iterations, recording the full trace.
pub fn pgd(
    params: &ModelParams,
    x: &[f64],
    y: usize,
    threat: &ThreatModel,
    cfg: &AttackConfig,
) -> Result<Perturbation> {
    cfg.validate()?;
    let observer = Observer::new(params, x, y, cfg.loss_kind)?;

    let mut delta = vec![0.0; x.len()];
    if cfg.rand_init {
        let mut stream = rng::stream(cfg.seed, &[rng::tag::ATTACK]);
        for d in delta.iter_mut() {
            *d = stream.random_range(-threat.epsilon..=threat.epsilon);
        }
    }
    project(&mut delta, threat, x);

    let mut trace = Vec::with_capacity(cfg.steps + 1);
    let mut crossings = Vec::with_capacity(cfg.steps + 1);
    trace.push(observer.observe(&delta, 0)?);
    crossings.push(delta.clone());

    for step in 1..=cfg.steps {
        let (_, grad) = observer.loss_and_grad(&delta, step)?;
        for (d, g) in delta.iter_mut().zip(&grad) {
            *d += cfg.step_size * sign(*g);
        }
        project(&mut delta, threat, x);
        trace.push(observer.observe(&delta, step)?);
        crossings.push(delta.clone());
    }

    Ok(finish(delta, trace, crossings))
}

/// Momentum PGD with a line-searched step size.
///
/// The velocity update is `v <- momentum * v + alpha * sign(g)` followed by
/// `delta <- Proj[delta + v]`; `alpha` is chosen to maximize the loss over
/// the candidate grid, evaluated at the resulting projected point. Starts
/// deterministically from `delta = 0`. With zero momentum and a singleton
/// grid this reduces exactly to [`pgd`].
pub fn lm_pgd(
    params: &ModelParams,
    x: &[f64],
    y: usize,
    threat: &ThreatModel,
    cfg: &LmPgdConfig,
    max_steps: usize,
) -> Result<Perturbation> {
    cfg.validate()?;
    if max_steps < 1 {
        return Err(Error::Config("lm_pgd needs at least one step".into()));
    }
    let observer = Observer::new(params, x, y, AttackLoss::Ce)?;

    let mut delta = vec![0.0; x.len()];
    project(&mut delta, threat, x);
    let mut velocity = vec![0.0; x.len()];

    let mut trace = Vec::with_capacity(max_steps + 1);
    let mut crossings = Vec::with_capacity(max_steps + 1);
    trace.push(observer.observe(&delta, 0)?);
    crossings.push(delta.clone());

    for step in 1..=max_steps {
        let (_, grad) = observer.loss_and_grad(&delta, step)?;
        let signs: Vec<f64> = grad.iter().map(|&g| sign(g)).collect();

        let lo = cfg.alpha_min(step);
        let hi = cfg.alpha_max;
        let n = cfg.line_search_points;
        let mut best: Option<(f64, f64, Vec<f64>)> = None; // (loss, alpha, delta)
        for i in 0..n {
            let alpha = if n == 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            };
            let mut candidate: Vec<f64> = delta
                .iter()
                .zip(&velocity)
                .zip(&signs)
                .map(|((d, v), s)| d + cfg.momentum * v + alpha * s)
                .collect();
            project(&mut candidate, threat, x);
            let loss = observer.loss_only(&candidate, step)?;
            let better = match &best {
                None => true,
                Some((best_loss, _, _)) => loss > *best_loss,
            };
            if better {
                best = Some((loss, alpha, candidate));
            }
        }
        let (_, alpha, next_delta) = best.expect("grid validated non-empty");

        for (v, s) in velocity.iter_mut().zip(&signs) {
            *v = cfg.momentum * *v + alpha * s;
        }
        delta = next_delta;
        trace.push(observer.observe(&delta, step)?);
        crossings.push(delta.clone());
    }

    Ok(finish(delta, trace, crossings))
}

/// Perturbation-generation styles matched to training objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationKind {
    /// Cross-entropy ascent, as used by plain adversarial training.
    CeAscent,
    /// KL ascent against the natural prediction.
    KlAscent,
    /// Logit-margin ascent.
    CwAscent,
}

impl GenerationKind {
    pub fn loss(self) -> AttackLoss {
        match self {
            GenerationKind::CeAscent => AttackLoss::Ce,
            GenerationKind::KlAscent => AttackLoss::Kl,
            GenerationKind::CwAscent => AttackLoss::CwMargin,
        }
    }
}

/// Dispatches to [`pgd`] with the ascent loss matching `kind`, keeping the
/// rest of `cfg` unchanged.
pub fn generate_for_objective(
    params: &ModelParams,
    x: &[f64],
    y: usize,
    kind: GenerationKind,
    threat: &ThreatModel,
    cfg: &AttackConfig,
) -> Result<Perturbation> {
    let cfg = AttackConfig {
        loss_kind: kind.loss(),
        ..*cfg
    };
    pgd(params, x, y, threat, &cfg)
}

/// Renders attack traces as CSV rows `(instance_id, step, loss, predicted_class, crossed)`.
pub fn traces_to_csv(traces: &[(usize, &Perturbation)]) -> String {
    let mut out = String::from("instance_id,step,loss,predicted_class,crossed\n");
    for (id, p) in traces {
        for (step, s) in p.trace.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                id, step, s.loss, s.predicted, s.crossed as u8
            ));
        }
    }
    out
}
