//! Histogram of least-crossing attack steps on a lightly trained model,
//! with the per-bin count of instances whose adversarial margin is negative
//! (the population a step-count measurement cannot separate out in its
//! maximal bin).
//!
//! ```bash
//! cargo run --release --example lps_histogram
//! ```

use mair::attack::{AttackConfig, AttackLoss};
use mair::data::{generate, Split, SyntheticKind, SyntheticSpec};
use mair::experiment::lps_histogram;
use mair::objective::ObjectiveKind;
use mair::train::{train, TrainConfig, TrainState};

fn main() -> mair::Result<()> {
    let dataset = generate(&SyntheticSpec {
        kind: SyntheticKind::TwoMoons,
        n_per_class: 300,
        noise: 0.1,
        seed: 5,
    })?;
    let mut config = TrainConfig::desk_scale(ObjectiveKind::At, 5);
    config.epochs = 6; // an undertrained model keeps mass at low step counts
    let mut state = TrainState::init(&[2, 16, 16, 2], &config)?;
    train(&mut state, &config, &dataset)?;

    let attack = AttackConfig {
        steps: 10,
        step_size: 0.03,
        loss_kind: AttackLoss::Ce,
        rand_init: true,
        seed: 2,
    };
    let csv = lps_histogram(
        &state.params,
        &dataset,
        Split::Train,
        &config.threat,
        &attack,
    )?;
    print!("{csv}");
    println!("\n(the final bin mixes instances the attack never flipped with");
    println!("still-critical ones; see the critical_count column)");
    Ok(())
}
