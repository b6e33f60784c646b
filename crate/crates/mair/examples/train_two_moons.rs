//! Train a reweighted adversarial classifier on two-moons and evaluate its
//! clean and attacked accuracy.
//!
//! ```bash
//! cargo run --release --example train_two_moons
//! ```

use mair::data::{generate, Split, SyntheticKind, SyntheticSpec};
use mair::experiment::{eval_robustness, metric_rows_csv, EvalSuite};
use mair::objective::ObjectiveKind;
use mair::train::{history_csv, train, TrainConfig, TrainState};

fn main() -> mair::Result<()> {
    let dataset = generate(&SyntheticSpec {
        kind: SyntheticKind::TwoMoons,
        n_per_class: 500,
        noise: 0.1,
        seed: 7,
    })?;

    let config = TrainConfig::desk_scale(ObjectiveKind::MailAt, 7);
    let mut state = TrainState::init(&[2, 16, 16, 2], &config)?;
    train(&mut state, &config, &dataset)?;

    // Last few epochs of the training log.
    let log = history_csv(&state.history);
    let mut lines: Vec<&str> = log.lines().collect();
    println!("{}", lines.remove(0));
    for line in lines.iter().skip(lines.len().saturating_sub(5)) {
        println!("{line}");
    }

    let row = eval_robustness(
        &state.params,
        &dataset,
        Split::Test,
        &EvalSuite::full(20),
        &config.threat,
        config.threat.epsilon / 4.0,
        99,
        "mail_at",
    )?;
    println!("\ntest-split accuracy (%):");
    print!("{}", metric_rows_csv(&[row]));
    Ok(())
}
