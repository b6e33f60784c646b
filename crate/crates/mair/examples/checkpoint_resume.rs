//! Training is bitwise deterministic and checkpoint-resume is exact: a run
//! interrupted after two epochs and resumed matches the uninterrupted run
//! parameter-for-parameter and log-byte-for-log-byte.
//!
//! ```bash
//! cargo run --example checkpoint_resume
//! ```

use mair::data::{generate, SyntheticKind, SyntheticSpec};
use mair::objective::ObjectiveKind;
use mair::train::{checkpoint, history_csv, restore, train, train_epoch, TrainConfig, TrainState};

fn main() -> mair::Result<()> {
    let dataset = generate(&SyntheticSpec {
        kind: SyntheticKind::TwoMoons,
        n_per_class: 80,
        noise: 0.1,
        seed: 2,
    })?;
    let mut config = TrainConfig::desk_scale(ObjectiveKind::MailAt, 2);
    config.epochs = 5;
    config.weight.burn_in_epochs = 2;

    let mut uninterrupted = TrainState::init(&[2, 12, 2], &config)?;
    train(&mut uninterrupted, &config, &dataset)?;

    let mut partial = TrainState::init(&[2, 12, 2], &config)?;
    train_epoch(&mut partial, &config, &dataset)?;
    train_epoch(&mut partial, &config, &dataset)?;

    let dir = std::env::temp_dir().join("mair_checkpoint_example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("state.ckpt");
    checkpoint(&partial, &path)?;
    println!(
        "checkpointed after epoch {} to {}",
        partial.epoch,
        path.display()
    );

    let mut resumed = restore(&path)?;
    train(&mut resumed, &config, &dataset)?;

    println!(
        "parameters identical: {}",
        uninterrupted.params == resumed.params
    );
    println!(
        "training logs byte-identical: {}",
        history_csv(&uninterrupted.history) == history_csv(&resumed.history)
    );
    print!("{}", history_csv(&resumed.history));
    Ok(())
}
