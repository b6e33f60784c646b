//! Margin-to-weight assignment with burn-in gating.
//!
//! Unnormalized weights come from a sigmoid, hinge, or step function of the
//! margin; a batch is then rescaled to mean weight 1 so reweighted and plain
//! training stay on comparable loss scales. During the burn-in epochs every
//! weight is fixed to 1 regardless of the margins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::margin::MarginKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    /// `1 / (1 + exp(slope * (margin - bias)))`: large weights for small margins.
    Sigmoid,
    /// `max(0, slope * (margin - bias))`, taken exactly as written; note this
    /// direction rewards large margins and zeroes out everything below bias.
    Hinge,
    /// `step_alpha` above bias, `1 - step_alpha` at or below it.
    Step,
}

/// Assignment function plus burn-in schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub assignment: Assignment,
    /// Slope gamma of the sigmoid/hinge.
    pub slope: f64,
    /// Bias beta: the margin around which weights transition.
    pub bias: f64,
    /// Step-function level alpha in [0, 1].
    pub step_alpha: f64,
    /// Epochs (1-based, inclusive) during which all weights stay at 1.
    pub burn_in_epochs: u32,
    /// Which measurement feeds the assignment.
    pub margin_kind: MarginKind,
}

impl WeightConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.slope >= 0.0) {
            return Err(Error::Config(format!(
                "slope must be >= 0, got {}",
                self.slope
            )));
        }
        if !(0.0..=1.0).contains(&self.step_alpha) {
            return Err(Error::Config(format!(
                "step_alpha must be in [0, 1], got {}",
                self.step_alpha
            )));
        }
        Ok(())
    }

    /// Reference settings for reweighted cross-entropy training:
    /// slope 10, bias -0.5, sigmoid on the adversarial margin.
    pub fn mail_at_defaults(burn_in_epochs: u32) -> Self {
        Self {
            assignment: Assignment::Sigmoid,
            slope: 10.0,
            bias: -0.5,
            step_alpha: 0.2,
            burn_in_epochs,
            margin_kind: MarginKind::PmAdv,
        }
    }

    /// Reference settings for the TRADES/MART variants: slope 2, bias 0.
    pub fn mail_trades_defaults(burn_in_epochs: u32) -> Self {
        Self {
            slope: 2.0,
            bias: 0.0,
            ..Self::mail_at_defaults(burn_in_epochs)
        }
    }
}

/// Normalized per-instance weights for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub normalized: bool,
}

impl WeightVector {
    pub fn ones(m: usize) -> Self {
        Self {
            weights: vec![1.0; m],
            normalized: true,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Unnormalized weight for one margin value.
pub fn assign_unnormalized(margin: f64, cfg: &WeightConfig) -> f64 {
    let centered = cfg.slope * (margin - cfg.bias);
    match cfg.assignment {
        Assignment::Sigmoid => 1.0 / (1.0 + centered.exp()),
        Assignment::Hinge => centered.max(0.0),
        Assignment::Step => {
            if margin > cfg.bias {
                cfg.step_alpha
            } else {
                1.0 - cfg.step_alpha
            }
        }
    }
}

/// Rescales unnormalized weights so they sum to the batch size m
/// (mean weight 1). An all-zero batch, possible under the hinge, falls back
/// to uniform weights with a warning instead of failing the step.
pub fn normalize(unnormalized: &[f64]) -> Result<WeightVector> {
    if unnormalized.is_empty() {
        return Err(Error::Input("cannot normalize an empty batch".into()));
    }
    if let Some(w) = unnormalized.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::Numeric(format!("invalid unnormalized weight {w}")));
    }
    let m = unnormalized.len() as f64;
    let total: f64 = unnormalized.iter().sum();
    if total <= 0.0 {
        log::warn!("all unnormalized weights are zero; falling back to uniform");
        return Ok(WeightVector::ones(unnormalized.len()));
    }
    Ok(WeightVector {
        weights: unnormalized.iter().map(|w| m * w / total).collect(),
        normalized: true,
    })
}

/// Burn-in aware weights for one batch of margins.
///
/// Epochs are 1-based; every epoch up to and including `burn_in_epochs`
/// yields all-ones weights.
pub fn effective_weights(margins: &[f64], cfg: &WeightConfig, epoch: u32) -> Result<WeightVector> {
    cfg.validate()?;
    if epoch < 1 {
        return Err(Error::Input("epochs are 1-based".into()));
    }
    if epoch <= cfg.burn_in_epochs {
        return Ok(WeightVector::ones(margins.len()));
    }
    let unnormalized: Vec<f64> = margins
        .iter()
        .map(|&m| assign_unnormalized(m, cfg))
        .collect();
    normalize(&unnormalized)
}

/// Summary statistics appended to the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub std: f64,
}

impl WeightStats {
    pub fn of(weights: &[f64]) -> Self {
        let n = weights.len().max(1) as f64;
        let mean = weights.iter().sum::<f64>() / n;
        let var = weights.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / n;
        Self {
            min: weights.iter().cloned().fold(f64::INFINITY, f64::min),
            mean,
            max: weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            std: var.sqrt(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sigmoid_cfg(slope: f64, bias: f64) -> WeightConfig {
        WeightConfig {
            assignment: Assignment::Sigmoid,
            slope,
            bias,
            step_alpha: 0.2,
            burn_in_epochs: 0,
            margin_kind: MarginKind::PmAdv,
        }
    }

    #[test]
    fn sigmoid_is_half_at_bias() {
        let cfg = sigmoid_cfg(10.0, -0.5);
        assert_eq!(assign_unnormalized(-0.5, &cfg), 0.5);
    }

    #[test]
    fn sigmoid_closed_form_value() {
        // Oracle: 1 / (1 + e^{-5}) evaluated directly.
        let cfg = sigmoid_cfg(10.0, -0.5);
        let got = assign_unnormalized(-1.0, &cfg);
        assert!((got - 0.993_307_149_075_715_3).abs() < 1e-15);
    }

    #[test]
    fn step_matches_reference_ablation_setting() {
        let cfg = WeightConfig {
            assignment: Assignment::Step,
            ..sigmoid_cfg(2.0, 0.0)
        };
        assert_eq!(cfg.step_alpha, 0.2);
        assert_eq!(assign_unnormalized(0.4, &cfg), 0.2);
        assert_eq!(assign_unnormalized(-0.4, &cfg), 0.8);
        assert_eq!(assign_unnormalized(0.0, &cfg), 0.8); // at bias: low branch
    }

    #[test]
    fn hinge_is_implemented_as_written() {
        let cfg = WeightConfig {
            assignment: Assignment::Hinge,
            ..sigmoid_cfg(2.0, 0.0)
        };
        assert_eq!(assign_unnormalized(-0.3, &cfg), 0.0);
        assert_eq!(assign_unnormalized(0.3, &cfg), 0.6);
    }

    #[test]
    fn normalize_examples() {
        // Uniform input -> all ones.
        let w = normalize(&[0.7, 0.7, 0.7, 0.7]).unwrap();
        assert!(w.weights.iter().all(|&x| x == 1.0));

        // Oracle: 3 * w / 5 for (1, 1, 3).
        let w = normalize(&[1.0, 1.0, 3.0]).unwrap();
        assert_eq!(w.weights, vec![0.6, 0.6, 1.8]);

        // Slope zero -> sigmoid 0.5 everywhere -> exactly ones.
        let cfg = sigmoid_cfg(0.0, -0.5);
        let unn: Vec<f64> = [-0.9, 0.0, 0.4]
            .iter()
            .map(|&m| assign_unnormalized(m, &cfg))
            .collect();
        let w = normalize(&unn).unwrap();
        assert!(w.weights.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn all_zero_hinge_falls_back_to_uniform() {
        let w = normalize(&[0.0, 0.0]).unwrap();
        assert_eq!(w.weights, vec![1.0, 1.0]);
    }

    #[test]
    fn burn_in_gates_assignment() {
        let cfg = WeightConfig {
            burn_in_epochs: 74,
            ..sigmoid_cfg(10.0, -0.5)
        };
        assert_eq!(cfg.burn_in_epochs, 74);

        let margins = [-0.8, 0.1, 0.9];
        let during = effective_weights(&margins, &cfg, 1).unwrap();
        assert!(during.weights.iter().all(|&w| w == 1.0));
        let still = effective_weights(&margins, &cfg, 74).unwrap();
        assert!(still.weights.iter().all(|&w| w == 1.0));

        let after = effective_weights(&margins, &cfg, 75).unwrap();
        assert!(after.weights.windows(2).any(|p| p[0] != p[1]));
        // Riskier (smaller) margins get larger weights.
        assert!(after.weights[0] > after.weights[2]);
    }

    #[test]
    fn reference_defaults() {
        let at = WeightConfig::mail_at_defaults(74);
        assert_eq!((at.slope, at.bias), (10.0, -0.5));
        let tr = WeightConfig::mail_trades_defaults(74);
        assert_eq!((tr.slope, tr.bias), (2.0, 0.0));
    }

    proptest! {
        /// Sigmoid and step assignments never increase with the margin.
        #[test]
        fn assignment_non_increasing(
            a in -1.0f64..1.0,
            b in -1.0f64..1.0,
            slope in 0.0f64..20.0,
            bias in -0.6f64..0.6,
            use_step in proptest::bool::ANY,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let cfg = WeightConfig {
                assignment: if use_step { Assignment::Step } else { Assignment::Sigmoid },
                ..sigmoid_cfg(slope, bias)
            };
            prop_assert!(assign_unnormalized(lo, &cfg) >= assign_unnormalized(hi, &cfg));
        }

        /// Normalization preserves ordering, hits mean 1, and keeps weights >= 0.
        #[test]
        fn normalization_properties(
            margins in proptest::collection::vec(-1.0f64..1.0, 1..40),
        ) {
            let cfg = sigmoid_cfg(10.0, -0.5);
            let w = effective_weights(&margins, &cfg, 1 + cfg.burn_in_epochs).unwrap();
            let m = margins.len() as f64;
            let sum: f64 = w.weights.iter().sum();
            prop_assert!((sum - m).abs() <= 1e-9);
            prop_assert!(w.weights.iter().all(|&x| x >= 0.0));
            for i in 0..margins.len() {
                for j in 0..margins.len() {
                    if margins[i] < margins[j] {
                        prop_assert!(w.weights[i] >= w.weights[j]);
                    }
                }
            }
        }

        /// Weights depend on margins only through slope * (margin - bias):
        /// shifting both by c leaves every unnormalized weight bit-identical
        /// when the shifted arguments are exactly representable.
        #[test]
        fn shift_consistency_bitwise(
            margin_ticks in -512i32..512,
            slope in 0.0f64..10.0,
        ) {
            // Dyadic margin and shift keep margin + c and bias + c exact.
            let margin = margin_ticks as f64 / 1024.0;
            let c = 0.25;
            let base = sigmoid_cfg(slope, 0.125);
            let shifted = sigmoid_cfg(slope, base.bias + c);
            let w0 = assign_unnormalized(margin, &base);
            let w1 = assign_unnormalized(margin + c, &shifted);
            prop_assert_eq!(w0.to_bits(), w1.to_bits());
        }
    }
}
