//! The six training objectives evaluated on one batch: each reweighted
//! form collapses to its baseline when every weight is 1, and diverges from
//! it once the weights vary.
//!
//! ```bash
//! cargo run --example objectives_compare
//! ```

use mair::attack::{generate_for_objective, AttackConfig, AttackLoss, ThreatModel};
use mair::data::{generate, SyntheticKind, SyntheticSpec};
use mair::objective::{batch_loss, ObjectiveConfig, ObjectiveKind};
use mair::train::{TrainConfig, TrainState};
use mair::weight::WeightVector;

fn main() -> mair::Result<()> {
    let dataset = generate(&SyntheticSpec {
        kind: SyntheticKind::TwoMoons,
        n_per_class: 50,
        noise: 0.1,
        seed: 13,
    })?;
    let config = TrainConfig::desk_scale(ObjectiveKind::At, 13);
    let state = TrainState::init(&[2, 16, 2], &config)?;
    let threat = ThreatModel::linf(0.15)?;
    let attack = AttackConfig {
        steps: 5,
        step_size: 0.03,
        loss_kind: AttackLoss::Ce,
        rand_init: true,
        seed: 1,
    };

    let m = 8;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut deltas = Vec::new();
    for i in 0..m {
        let kind = ObjectiveKind::At.generation();
        let p = generate_for_objective(
            &state.params,
            dataset.row(i),
            dataset.labels[i],
            kind,
            &threat,
            &AttackConfig {
                seed: i as u64,
                ..attack
            },
        )?;
        xs.push(dataset.row(i).to_vec());
        ys.push(dataset.labels[i]);
        deltas.push(p.delta);
    }

    let ones = WeightVector::ones(m);
    let skewed = WeightVector {
        weights: (0..m).map(|i| 0.25 + 0.25 * i as f64).collect(),
        normalized: false,
    };

    println!(
        "{:<12} {:>14} {:>14}",
        "objective", "unit weights", "skewed weights"
    );
    for (mail, base) in [
        (ObjectiveKind::MailAt, ObjectiveKind::At),
        (ObjectiveKind::MailTrades, ObjectiveKind::Trades),
        (ObjectiveKind::MailMart, ObjectiveKind::Mart),
    ] {
        let cfg = ObjectiveConfig::defaults_for(mail);
        let base_cfg = ObjectiveConfig {
            kind: base,
            tradeoff: cfg.tradeoff,
        };
        let baseline = batch_loss(&state.params, &xs, &deltas, &ys, &ones, &base_cfg)?;
        let unit = batch_loss(&state.params, &xs, &deltas, &ys, &ones, &cfg)?;
        let skew = batch_loss(&state.params, &xs, &deltas, &ys, &skewed, &cfg)?;
        assert_eq!(baseline.total.to_bits(), unit.total.to_bits());
        println!(
            "{:<12} {:>14.6} {:>14.6}",
            mail.name(),
            unit.total,
            skew.total
        );
    }
    println!("\nunit-weight totals equal the unweighted baselines bit for bit");
    Ok(())
}
