//! Geometric measurements of per-instance vulnerability.
//!
//! The probabilistic margin `pm` is the true-class posterior minus the
//! largest other-class posterior; it is continuous in the model outputs and
//! depends only on the evaluation point, never on the attack path that
//! produced it. `mm` is the same quantity on raw logits. `lps` counts the
//! earliest attack iteration that flipped the prediction — discrete, and
//! dependent on the attack that generated the trace.

use serde::{Deserialize, Serialize};

use crate::attack::Perturbation;
use crate::error::{Error, Result};
use crate::nn::{runner_up, ModelParams, ProbVector};

/// Which measurement feeds downstream consumers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginKind {
    /// Probabilistic margin at the natural input.
    PmNat,
    /// Probabilistic margin at the attacked input.
    PmAdv,
    /// Drop in true-class probability from natural to attacked input.
    PmDif,
    /// Logit-space margin at the attacked input.
    Mm,
    /// Least attack iterations to a wrong prediction.
    Lps,
}

impl MarginKind {
    pub fn name(self) -> &'static str {
        match self {
            MarginKind::PmNat => "pm_nat",
            MarginKind::PmAdv => "pm_adv",
            MarginKind::PmDif => "pm_dif",
            MarginKind::Mm => "mm",
            MarginKind::Lps => "lps",
        }
    }
}

/// One measurement attached to an instance. LPS values are stored as
/// integer-valued reals.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginScore {
    pub kind: MarginKind,
    pub value: f64,
    pub instance_id: usize,
}

/// `p_y - max_{j != y} p_j`. Zero on the decision boundary, positive on the
/// true-label side, negative otherwise. Always in `[-1, 1]`.
pub fn pm(probs: &ProbVector, y: usize) -> Result<f64> {
    if probs.len() < 2 {
        return Err(Error::Config("pm needs at least two classes".into()));
    }
    if y >= probs.len() {
        return Err(Error::Input(format!(
            "label {y} out of range for {} classes",
            probs.len()
        )));
    }
    let j = runner_up(probs.as_slice(), y);
    Ok(probs.get(y) - probs.get(j))
}

/// `z_y - max_{j != y} z_j` on raw logits.
pub fn mm(logits: &[f64], y: usize) -> Result<f64> {
    if logits.len() < 2 {
        return Err(Error::Config("mm needs at least two classes".into()));
    }
    if y >= logits.len() {
        return Err(Error::Input(format!(
            "label {y} out of range for {} classes",
            logits.len()
        )));
    }
    let j = runner_up(logits, y);
    Ok(logits[y] - logits[j])
}

/// Probabilistic margin at the natural input.
pub fn pm_nat(params: &ModelParams, x: &[f64], y: usize) -> Result<f64> {
    let (_, probs) = params.forward(x)?;
    pm(&probs, y)
}

/// Probabilistic margin at `x + delta` for the final perturbation.
pub fn pm_adv(params: &ModelParams, x: &[f64], delta: &[f64], y: usize) -> Result<f64> {
    let point: Vec<f64> = x.iter().zip(delta).map(|(a, b)| a + b).collect();
    let (_, probs) = params.forward(&point)?;
    pm(&probs, y)
}

/// `p_y(x) - p_y(x + delta)` where `delta` is the perturbation at the
/// instance's least-crossing step (the final perturbation when the attack
/// never crossed).
pub fn pm_dif(params: &ModelParams, x: &[f64], delta_at_lps: &[f64], y: usize) -> Result<f64> {
    let (_, nat) = params.forward(x)?;
    if y >= nat.len() {
        return Err(Error::Input(format!(
            "label {y} out of range for {} classes",
            nat.len()
        )));
    }
    let point: Vec<f64> = x.iter().zip(delta_at_lps).map(|(a, b)| a + b).collect();
    let (_, adv) = params.forward(&point)?;
    Ok(nat.get(y) - adv.get(y))
}

/// Least attack iterations to a wrong prediction.
///
/// Iterations are 1-based; an instance misclassified already at the initial
/// state gets 0, and an attack that never crossed gets the maximum iteration
/// count of its trace.
pub fn lps(perturbation: &Perturbation) -> Result<usize> {
    if perturbation.trace.is_empty() {
        return Err(Error::Input("empty attack trace".into()));
    }
    Ok(perturbation.crossed_at.unwrap_or(perturbation.steps()))
}

/// Computes the requested measurement for one instance.
///
/// `Mm`, like `PmAdv`, is evaluated at the attacked input.
pub fn measure(
    params: &ModelParams,
    x: &[f64],
    y: usize,
    perturbation: &Perturbation,
    kind: MarginKind,
    instance_id: usize,
) -> Result<MarginScore> {
    let value = match kind {
        MarginKind::PmNat => pm_nat(params, x, y)?,
        MarginKind::PmAdv => pm_adv(params, x, &perturbation.delta, y)?,
        MarginKind::PmDif => {
            let delta = perturbation
                .delta_at_crossing
                .as_deref()
                .unwrap_or(&perturbation.delta);
            pm_dif(params, x, delta, y)?
        }
        MarginKind::Mm => {
            let point: Vec<f64> = x
                .iter()
                .zip(&perturbation.delta)
                .map(|(a, b)| a + b)
                .collect();
            let (logits, _) = params.forward(&point)?;
            mm(&logits, y)?
        }
        MarginKind::Lps => lps(perturbation)? as f64,
    };
    Ok(MarginScore {
        kind,
        value,
        instance_id,
    })
}

/// Margin dump rows `(instance_id, kind, value, epoch)`.
pub fn margins_to_csv(scores: &[MarginScore], epoch: u32) -> String {
    let mut out = String::from("instance_id,kind,value,epoch\n");
    for s in scores {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.instance_id,
            s.kind.name(),
            s.value,
            epoch
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{pgd, AttackConfig, AttackLoss, ThreatModel, TraceStep};
    use crate::nn::{argmax, Activation, DenseLayer, Matrix};
    use proptest::prelude::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn probs(v: Vec<f64>) -> ProbVector {
        ProbVector::new(v).unwrap()
    }

    #[test]
    fn pm_anchor_values() {
        // Boundary, true-label side, confusing side.
        assert_eq!(pm(&probs(vec![0.5, 0.5]), 0).unwrap(), 0.0);
        assert!((pm(&probs(vec![0.6, 0.4]), 0).unwrap() - 0.2).abs() < 1e-15);
        assert!((pm(&probs(vec![0.4, 0.6]), 0).unwrap() + 0.2).abs() < 1e-15);
    }

    #[test]
    fn mm_examples() {
        assert_eq!(mm(&[2.0, 1.0, 0.0], 0).unwrap(), 1.0);
        assert_eq!(mm(&[0.3, 0.3, 0.3], 1).unwrap(), 0.0);
        assert!(mm(&[1.0], 0).is_err());
    }

    fn two_layer_net(seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ModelParams::random(&[2, 6, 3], &mut rng).unwrap()
    }

    #[test]
    fn pm_adv_equals_pm_nat_for_zero_delta_bitwise() {
        let net = two_layer_net(4);
        let x = [0.3, -0.7];
        let nat = pm_nat(&net, &x, 1).unwrap();
        let adv = pm_adv(&net, &x, &[0.0, 0.0], 1).unwrap();
        assert_eq!(nat.to_bits(), adv.to_bits());
    }

    #[test]
    fn pm_adv_is_path_independent_bitwise() {
        // Two different trajectories with the same endpoint give the same value.
        let net = two_layer_net(9);
        let x = [0.1, 0.4];
        let endpoint = [0.05, -0.03];
        let a = pm_adv(&net, &x, &endpoint, 0).unwrap();
        let b = pm_adv(&net, &x, &endpoint.to_vec().clone(), 0).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn pm_dif_is_zero_for_zero_delta_and_bounded() {
        let net = two_layer_net(12);
        let x = [0.2, 0.9];
        assert_eq!(pm_dif(&net, &x, &[0.0, 0.0], 2).unwrap(), 0.0);
        let v = pm_dif(&net, &x, &[0.3, -0.2], 2).unwrap();
        assert!((-1.0..=1.0).contains(&v));
    }

    fn perturbation_with(trace: Vec<TraceStep>, crossed_at: Option<usize>) -> Perturbation {
        Perturbation {
            delta: vec![0.0],
            delta_at_crossing: crossed_at.map(|_| vec![0.0]),
            trace,
            crossed_at,
        }
    }

    fn step(crossed: bool) -> TraceStep {
        TraceStep {
            loss: 0.0,
            predicted: crossed as usize,
            crossed,
        }
    }

    #[test]
    fn lps_counting_convention() {
        // Misclassified before any step.
        let p = perturbation_with(vec![step(true), step(true)], Some(0));
        assert_eq!(lps(&p).unwrap(), 0);

        // Never crosses within T = 10: lands in the maximal bucket.
        let trace: Vec<TraceStep> = (0..11).map(|_| step(false)).collect();
        let p = perturbation_with(trace, None);
        assert_eq!(lps(&p).unwrap(), 10);

        // Crafted 2-D linear case from the attack module crosses at 2.
        let net = ModelParams::new(
            vec![DenseLayer {
                weights: Matrix::new(2, 2, vec![0.0, 0.0, 1.0, 0.0]).unwrap(),
                bias: vec![0.0, 0.0],
            }],
            Activation::Relu,
        )
        .unwrap();
        let threat = ThreatModel::linf(0.1).unwrap();
        let cfg = AttackConfig {
            steps: 10,
            step_size: 0.03,
            loss_kind: AttackLoss::Ce,
            rand_init: false,
            seed: 0,
        };
        let p = pgd(&net, &[0.05, 0.0], 1, &threat, &cfg).unwrap();
        assert_eq!(lps(&p).unwrap(), 2);

        let empty = perturbation_with(vec![], None);
        assert!(lps(&empty).is_err());
    }

    #[test]
    fn margin_csv_schema() {
        let scores = vec![
            MarginScore {
                kind: MarginKind::PmNat,
                value: 0.25,
                instance_id: 3,
            },
            MarginScore {
                kind: MarginKind::Lps,
                value: 4.0,
                instance_id: 3,
            },
        ];
        let csv = margins_to_csv(&scores, 17);
        assert_eq!(csv.lines().next().unwrap(), "instance_id,kind,value,epoch");
        assert!(csv.contains("3,pm_nat,0.25,17"));
        assert!(csv.contains("3,lps,4,17"));
    }

    proptest! {
        /// Softmax is order-preserving, so logit and probability margins agree in sign.
        #[test]
        fn mm_and_pm_share_sign(
            logits in proptest::collection::vec(-4.0f64..4.0, 3..6),
            y_raw in 0usize..6,
        ) {
            let y = y_raw % logits.len();
            let p = crate::nn::softmax(&logits);
            let mm_v = mm(&logits, y).unwrap();
            let pm_v = pm(&p, y).unwrap();
            prop_assert_eq!(mm_v.signum(), pm_v.signum());
        }

        /// pm > 0 exactly when the prediction matches the label (no ties in
        /// random draws), and pm is within [-1, 1].
        #[test]
        fn pm_matches_argmax_prediction(
            logits in proptest::collection::vec(-4.0f64..4.0, 2..6),
            y_raw in 0usize..6,
        ) {
            let y = y_raw % logits.len();
            let p = crate::nn::softmax(&logits);
            let value = pm(&p, y).unwrap();
            prop_assert!((-1.0..=1.0).contains(&value));
            let predicted = argmax(p.as_slice());
            if value > 0.0 {
                prop_assert_eq!(predicted, y);
            }
            if predicted == y && value != 0.0 {
                prop_assert!(value > 0.0);
            }
        }

        /// For a fixed runner-up probability, pm is strictly increasing in p_y.
        #[test]
        fn pm_monotone_in_true_class_probability(
            a in 0.41f64..0.60,
            gap in 0.001f64..0.19,
        ) {
            // Runner-up pinned at 0.2; the leftover mass stays below it.
            let runner = 0.2;
            let b = a + gap;
            let make = |p: f64| {
                let rest = (1.0 - p - runner) / 2.0;
                probs(vec![p, runner, rest, rest])
            };
            let lo = pm(&make(a), 0).unwrap();
            let hi = pm(&make(b), 0).unwrap();
            prop_assert!(hi > lo);
        }
    }
}
