//! One instance, three ascent objectives: cross-entropy, logit margin, and
//! KL against the natural prediction, each with its per-step loss trace and
//! projection back into the threat model.
//!
//! ```bash
//! cargo run --release --example attack_playground
//! ```

use mair::attack::{generate_for_objective, AttackConfig, AttackLoss, GenerationKind};
use mair::data::{generate, SyntheticKind, SyntheticSpec};
use mair::objective::ObjectiveKind;
use mair::train::{train, TrainConfig, TrainState};

fn main() -> mair::Result<()> {
    let dataset = generate(&SyntheticSpec {
        kind: SyntheticKind::TwoMoons,
        n_per_class: 200,
        noise: 0.1,
        seed: 8,
    })?;
    let mut config = TrainConfig::desk_scale(ObjectiveKind::At, 8);
    config.epochs = 8;
    let mut state = TrainState::init(&[2, 16, 16, 2], &config)?;
    train(&mut state, &config, &dataset)?;

    let x = dataset.row(0);
    let y = dataset.labels[0];
    let attack = AttackConfig {
        steps: 10,
        step_size: 0.03,
        loss_kind: AttackLoss::Ce,
        rand_init: true,
        seed: 21,
    };

    for (kind, label) in [
        (GenerationKind::CeAscent, "cross-entropy ascent"),
        (GenerationKind::CwAscent, "logit-margin ascent"),
        (GenerationKind::KlAscent, "kl ascent"),
    ] {
        let p = generate_for_objective(&state.params, x, y, kind, &config.threat, &attack)?;
        let losses: Vec<String> = p.trace.iter().map(|s| format!("{:.4}", s.loss)).collect();
        println!("{label}:");
        println!("  loss trace  {}", losses.join(" "));
        println!("  final delta {:?}", p.delta);
        println!(
            "  crossed at  {}",
            p.crossed_at
                .map(|t| t.to_string())
                .unwrap_or_else(|| "never".into())
        );
        for (d, &xi) in p.delta.iter().zip(x) {
            assert!(d.abs() <= config.threat.epsilon);
            let _ = xi;
        }
    }
    Ok(())
}
