//! A compact ablation run over the three comparison axes — margin kind,
//! weight assignment function, and perturbation generation — printing one
//! accuracy table per axis.
//!
//! ```bash
//! cargo run --release --example ablation_tables
//! ```

use mair::data::{generate, SyntheticKind, SyntheticSpec};
use mair::experiment::{ablation_suite, AblationAxes, AblationConfig};

fn main() -> mair::Result<()> {
    let dataset = generate(&SyntheticSpec {
        kind: SyntheticKind::TwoMoons,
        n_per_class: 250,
        noise: 0.1,
        seed: 1,
    })?;

    // One shared seed and a short schedule keep this quick; pass more seeds
    // for averaged tables.
    let mut config = AblationConfig::desk_default(vec![1]);
    config.base.epochs = 8;
    config.base.weight.burn_in_epochs = 4;
    config.eval_steps = 10;

    let tables = ablation_suite(&config, &dataset, AblationAxes::default())?;
    for table in &tables {
        println!("== {} ==", table.name);
        print!("{}", table.to_csv());
        println!();
    }
    Ok(())
}
