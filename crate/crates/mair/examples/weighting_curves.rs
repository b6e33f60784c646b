//! Margin-to-weight assignment functions and batch normalization: the
//! sigmoid, hinge, and step curves over the margin range, and how a batch
//! of margins turns into mean-1 weights before and after burn-in.
//!
//! ```bash
//! cargo run --example weighting_curves
//! ```

use mair::margin::MarginKind;
use mair::weight::{assign_unnormalized, effective_weights, Assignment, WeightConfig};

fn main() -> mair::Result<()> {
    let base = WeightConfig {
        assignment: Assignment::Sigmoid,
        slope: 2.0,
        bias: 0.0,
        step_alpha: 0.2,
        burn_in_epochs: 15,
        margin_kind: MarginKind::PmAdv,
    };

    println!(
        "{:>8} {:>9} {:>9} {:>9}",
        "margin", "sigmoid", "hinge", "step"
    );
    for i in 0..=10 {
        let margin = -1.0 + 0.2 * i as f64;
        let s = assign_unnormalized(margin, &base);
        let h = assign_unnormalized(
            margin,
            &WeightConfig {
                assignment: Assignment::Hinge,
                ..base
            },
        );
        let t = assign_unnormalized(
            margin,
            &WeightConfig {
                assignment: Assignment::Step,
                ..base
            },
        );
        println!("{margin:>8.2} {s:>9.4} {h:>9.4} {t:>9.4}");
    }

    let margins = [-0.9, -0.4, 0.0, 0.3, 0.8, 0.95];
    println!("\nbatch margins: {margins:?}");
    let during = effective_weights(&margins, &base, 10)?;
    println!("epoch 10 (burn-in):  {:?}", during.weights);
    let after = effective_weights(&margins, &base, 16)?;
    let rounded: Vec<f64> = after
        .weights
        .iter()
        .map(|w| (w * 1e4).round() / 1e4)
        .collect();
    println!("epoch 16 (active):   {rounded:?}");
    println!(
        "sum = {} (mean weight 1)",
        after.weights.iter().sum::<f64>()
    );
    Ok(())
}
