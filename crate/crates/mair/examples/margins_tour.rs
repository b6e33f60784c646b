//! The margin family on one trained model: probabilistic margins at the
//! natural and attacked inputs, the drop variant, the logit margin, and the
//! least-crossing-step count, for a handful of instances.
//!
//! ```bash
//! cargo run --release --example margins_tour
//! ```

use mair::attack::{pgd, AttackConfig, AttackLoss};
use mair::data::{generate, SyntheticKind, SyntheticSpec};
use mair::margin::{lps, mm, pm_adv, pm_dif, pm_nat};
use mair::objective::ObjectiveKind;
use mair::train::{train, TrainConfig, TrainState};

fn main() -> mair::Result<()> {
    let dataset = generate(&SyntheticSpec {
        kind: SyntheticKind::TwoMoons,
        n_per_class: 200,
        noise: 0.1,
        seed: 3,
    })?;
    let mut config = TrainConfig::desk_scale(ObjectiveKind::At, 3);
    config.epochs = 10;
    let mut state = TrainState::init(&[2, 16, 16, 2], &config)?;
    train(&mut state, &config, &dataset)?;

    let attack = AttackConfig {
        steps: 10,
        step_size: 0.03,
        loss_kind: AttackLoss::Ce,
        rand_init: true,
        seed: 17,
    };

    println!(
        "{:>4} {:>9} {:>9} {:>9} {:>9} {:>5}",
        "id", "pm_nat", "pm_adv", "pm_dif", "mm_adv", "lps"
    );
    for id in (0..dataset.len()).step_by(33) {
        let x = dataset.row(id);
        let y = dataset.labels[id];
        let p = pgd(
            &state.params,
            x,
            y,
            &config.threat,
            &AttackConfig {
                seed: 17 + id as u64,
                ..attack
            },
        )?;
        let delta_at_lps = p.delta_at_crossing.as_deref().unwrap_or(&p.delta);
        let adv_point: Vec<f64> = x.iter().zip(&p.delta).map(|(a, b)| a + b).collect();
        let (adv_logits, _) = state.params.forward(&adv_point)?;
        println!(
            "{id:>4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>5}",
            pm_nat(&state.params, x, y)?,
            pm_adv(&state.params, x, &p.delta, y)?,
            pm_dif(&state.params, x, delta_at_lps, y)?,
            mm(&adv_logits, y)?,
            lps(&p)?,
        );
    }
    println!("\nsmall or negative margins mark instances the attack endangers;");
    println!("lps = 10 lumps together everything the attack never flipped");
    Ok(())
}
