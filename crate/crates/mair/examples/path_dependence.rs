//! The step-count measurement is attack-path dependent: on a crafted
//! instance, plain signed-gradient ascent oscillates below a local loss
//! peak for all 50 iterations while the momentum/line-search attack crosses
//! within a few steps. Both loss traces are printed side by side.
//!
//! ```bash
//! cargo run --example path_dependence
//! ```

use mair::attack::{lm_pgd, pgd, AttackConfig, AttackLoss, LmPgdConfig};
use mair::experiment::stuck_pgd_scenario;
use mair::margin::lps;

fn main() -> mair::Result<()> {
    let (params, x, y, threat) = stuck_pgd_scenario();

    let plain_cfg = AttackConfig {
        steps: 50,
        step_size: threat.epsilon / 4.0,
        loss_kind: AttackLoss::Ce,
        rand_init: false,
        seed: 0,
    };
    let plain = pgd(&params, &x, y, &threat, &plain_cfg)?;

    let lm_cfg = LmPgdConfig::demo_for_epsilon(threat.epsilon);
    let lm = lm_pgd(&params, &x, y, &threat, &lm_cfg, 50)?;

    println!(
        "least crossing steps: plain = {}, momentum/line-search = {}",
        lps(&plain)?,
        lps(&lm)?
    );
    println!(
        "\n{:>5} {:>14} {:>9} {:>14} {:>9}",
        "step", "plain loss", "crossed", "lm loss", "crossed"
    );
    for step in 0..=10 {
        let p = &plain.trace[step];
        let l = &lm.trace[step];
        println!(
            "{step:>5} {:>14.6} {:>9} {:>14.6} {:>9}",
            p.loss, p.crossed, l.loss, l.crossed
        );
    }
    println!("... the plain trace repeats the same two states through step 50");
    Ok(())
}
