//! Box-plot statistics of the natural probabilistic margin grouped by the
//! least-crossing step count: the continuous margin spreads widely inside
//! each discrete step bucket.
//!
//! ```bash
//! cargo run --release --example pm_vs_lps_boxplot
//! ```

use mair::attack::{AttackConfig, AttackLoss};
use mair::data::{generate, Split, SyntheticKind, SyntheticSpec};
use mair::experiment::pm_vs_lps_boxplot;
use mair::objective::ObjectiveKind;
use mair::train::{train, TrainConfig, TrainState};

fn main() -> mair::Result<()> {
    let dataset = generate(&SyntheticSpec {
        kind: SyntheticKind::TwoMoons,
        n_per_class: 400,
        noise: 0.1,
        seed: 11,
    })?;
    let mut config = TrainConfig::desk_scale(ObjectiveKind::At, 11);
    config.epochs = 15;
    let mut state = TrainState::init(&[2, 16, 16, 2], &config)?;
    train(&mut state, &config, &dataset)?;

    let attack = AttackConfig {
        steps: 10,
        step_size: 0.03,
        loss_kind: AttackLoss::Ce,
        rand_init: true,
        seed: 4,
    };
    let csv = pm_vs_lps_boxplot(
        &state.params,
        &dataset,
        Split::Train,
        &config.threat,
        &attack,
    )?;
    print!("{csv}");
    Ok(())
}
