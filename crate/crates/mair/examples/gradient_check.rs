//! Compare analytic gradients against central finite differences for the
//! cross-entropy loss on a random network.
//!
//! ```bash
//! cargo run --example gradient_check
//! ```

use mair::nn::{backward, point_loss_value, ModelParams, PointLoss};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mair::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let net = ModelParams::random(&[4, 8, 6, 3], &mut rng)?;
    let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let loss = PointLoss::CrossEntropy { y: 1 };

    let (value, grads) = backward(&net, &x, &loss)?;
    println!("loss value: {value:.6}");

    let h = 1e-5;
    println!(
        "{:>4} {:>14} {:>14} {:>10}",
        "i", "analytic", "numeric", "rel err"
    );
    let mut worst: f64 = 0.0;
    let mut xv = x.clone();
    for i in 0..x.len() {
        let orig = xv[i];
        xv[i] = orig + h;
        let up = point_loss_value(&net, &xv, &loss)?;
        xv[i] = orig - h;
        let down = point_loss_value(&net, &xv, &loss)?;
        xv[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let analytic = grads.input[i];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-2);
        worst = worst.max(rel);
        println!("{i:>4} {analytic:>14.8} {numeric:>14.8} {rel:>10.2e}");
    }
    println!("worst relative error over input coordinates: {worst:.2e}");
    Ok(())
}
