//! Training loop: batch sampling, attack generation, margin measurement,
//! weight assignment, and SGD with momentum, weight decay, and a step
//! learning-rate schedule.
//!
//! Determinism contract: one logical thread owns the [`TrainState`]; every
//! random draw comes from a stream derived from `(config.seed, epoch,
//! instance index)`, so two runs with the same config produce bitwise
//! identical histories and a checkpoint-resume continues exactly where the
//! uninterrupted run would have been.

use std::fmt::Write as _;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};
use serde::{Deserialize, Serialize};

use crate::attack::{self, AttackConfig, ThreatModel};
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::margin;
use crate::nn::{self, ModelParams, ParamGrads};
use crate::objective::{self, ObjectiveConfig, ObjectiveKind};
use crate::rng::{self, tag};
use crate::weight::{self, WeightConfig, WeightStats, WeightVector};

/// All hyperparameters of one training run. Serializes field-for-field to
/// the JSON config document used by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: u32,
    pub batch_size: usize,
    /// Initial learning rate.
    pub lr: f64,
    /// `(epoch, divisor)` pairs; from each epoch on, the rate is divided.
    pub lr_drops: Vec<(u32, f64)>,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub threat: ThreatModel,
    pub attack: AttackConfig,
    pub weight: WeightConfig,
    pub objective: ObjectiveConfig,
}

impl TrainConfig {
    /// Reference full-scale schedule: 100 epochs, batch 128, learning rate
    /// 0.01 divided by 10 at epochs 75 and 90, momentum 0.9, 74 burn-in
    /// epochs, pixel-space threat 8/255 attacked for 10 steps of 2/255.
    pub fn reference_defaults(kind: ObjectiveKind, seed: u64) -> Self {
        let weight = match kind {
            ObjectiveKind::MailAt | ObjectiveKind::At => WeightConfig::mail_at_defaults(74),
            _ => WeightConfig::mail_trades_defaults(74),
        };
        Self {
            epochs: 100,
            batch_size: 128,
            lr: 0.01,
            lr_drops: vec![(75, 10.0), (90, 10.0)],
            momentum: 0.9,
            weight_decay: 3.5e-3,
            seed,
            threat: ThreatModel::image(8.0 / 255.0).expect("valid threat"),
            attack: AttackConfig {
                steps: 10,
                step_size: 2.0 / 255.0,
                loss_kind: kind.generation().loss(),
                rand_init: true,
                seed,
            },
            weight,
            objective: ObjectiveConfig::defaults_for(kind),
        }
    }

    /// Desk-scale schedule for 2-D synthetic data: 30 epochs with drops at
    /// 23 and 27 and a 15-epoch burn-in (the 100-epoch schedule scaled
    /// proportionally), threat radius 0.15 attacked for 10 steps of 0.03.
    ///
    /// Weight assignment uses slope 2 and bias 0 for every objective: the
    /// steeper full-scale settings concentrate nearly all weight on a
    /// handful of instances when margins are bimodal, which small dense
    /// models cannot absorb.
    pub fn desk_scale(kind: ObjectiveKind, seed: u64) -> Self {
        let weight = WeightConfig::mail_trades_defaults(15);
        Self {
            epochs: 30,
            batch_size: 128,
            lr: 2e-3,
            lr_drops: vec![(23, 10.0), (27, 10.0)],
            momentum: 0.9,
            weight_decay: 5e-4,
            seed,
            threat: ThreatModel::linf(0.15).expect("valid threat"),
            attack: AttackConfig {
                steps: 10,
                step_size: 0.03,
                loss_kind: kind.generation().loss(),
                rand_init: true,
                seed,
            },
            weight,
            objective: ObjectiveConfig::defaults_for(kind),
        }
    }

    /// Standard (non-adversarial) training expressed in the same loop: a
    /// vanishing threat radius and a single attack step leave the inputs
    /// effectively untouched.
    pub fn desk_scale_standard(seed: u64) -> Self {
        let mut cfg = Self::desk_scale(ObjectiveKind::At, seed);
        cfg.threat = ThreatModel::linf(1e-12).expect("valid threat");
        cfg.attack.steps = 1;
        cfg.attack.rand_init = false;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        for &(epoch, divisor) in &self.lr_drops {
            if epoch < 1 || !(divisor > 0.0) {
                return Err(Error::Config(format!("bad lr drop ({epoch}, {divisor})")));
            }
        }
        self.attack.validate()?;
        self.weight.validate()?;
        self.objective.validate()?;
        Ok(())
    }

    /// Piecewise-constant learning rate for a 1-based epoch.
    pub fn lr_for_epoch(&self, epoch: u32) -> f64 {
        let mut lr = self.lr;
        for &(drop_epoch, divisor) in &self.lr_drops {
            if epoch >= drop_epoch {
                lr /= divisor;
            }
        }
        lr
    }
}

/// One row of the per-epoch training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: u32,
    pub lr: f64,
    pub mean_loss: f64,
    /// Accuracy on the natural training inputs seen this epoch.
    pub nat_acc: f64,
    /// Accuracy on the attacked training inputs seen this epoch.
    pub rob_acc: f64,
    pub weights: WeightStats,
    /// 1 when every weight this epoch was pinned to 1 (burn-in or an
    /// unweighted objective), 0 otherwise.
    pub burn_in_frac: f64,
}

pub const LOG_HEADER: &str =
    "epoch,lr,mean_loss,nat_acc,rob_acc,w_min,w_mean,w_max,w_std,burn_frac";

impl EpochStats {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.epoch,
            self.lr,
            self.mean_loss,
            self.nat_acc,
            self.rob_acc,
            self.weights.min,
            self.weights.mean,
            self.weights.max,
            self.weights.std,
            self.burn_in_frac
        )
    }
}

/// Renders a training log as CSV, one row per epoch.
pub fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for row in history {
        writeln!(out, "{}", row.csv_row()).expect("string write");
    }
    out
}

/// Mutable state of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ModelParams,
    /// Momentum buffers, shaped like the parameters.
    pub velocity: ParamGrads,
    /// Completed epochs (0 before training starts).
    pub epoch: u32,
    /// Base seed; all RNG streams derive from it, so it is the only RNG
    /// state a checkpoint needs.
    pub seed: u64,
    pub history: Vec<EpochStats>,
}

impl TrainState {
    pub fn new(params: ModelParams, config: &TrainConfig) -> Self {
        let velocity = ParamGrads::zeros_like(&params);
        Self {
            params,
            velocity,
            epoch: 0,
            seed: config.seed,
            history: Vec::new(),
        }
    }

    /// Fresh state with randomly initialized parameters derived from the
    /// config seed.
    pub fn init(dims: &[usize], config: &TrainConfig) -> Result<Self> {
        let mut stream = rng::stream(config.seed, &[tag::INIT]);
        let params = ModelParams::random(dims, &mut stream)?;
        Ok(Self::new(params, config))
    }
}

/// One SGD update: `v <- momentum * v + g + weight_decay * theta` followed by
/// `theta <- theta - lr * v`. Weight decay applies to biases as well.
pub fn sgd_step(state: &mut TrainState, grads: &ParamGrads, lr: f64, config: &TrainConfig) {
    let mu = config.momentum;
    let wd = config.weight_decay;
    for (l, layer) in state.params.layers.iter_mut().enumerate() {
        let v = &mut state.velocity.layers[l];
        let g = &grads.layers[l];
        for i in 0..layer.weights.data.len() {
            let vel = mu * v.weights.data[i] + g.weights.data[i] + wd * layer.weights.data[i];
            v.weights.data[i] = vel;
            layer.weights.data[i] -= lr * vel;
        }
        for i in 0..layer.bias.len() {
            let vel = mu * v.bias[i] + g.bias[i] + wd * layer.bias[i];
            v.bias[i] = vel;
            layer.bias[i] -= lr * vel;
        }
    }
}

fn assert_threat_invariant(x: &[f64], delta: &[f64], threat: &ThreatModel) {
    for (d, &xi) in delta.iter().zip(x) {
        assert!(
            d.abs() <= threat.epsilon,
            "perturbation {d} exceeds epsilon {}",
            threat.epsilon
        );
        if let Some((lo, hi)) = threat.clamp_domain {
            let v = xi + d;
            assert!(
                (lo..=hi).contains(&v),
                "perturbed value {v} escapes domain [{lo}, {hi}]"
            );
        }
    }
}

/// Runs one epoch: per batch, generate perturbations with the configured
/// attack, measure margins, assign burn-in-aware weights, and take one SGD
/// step on the objective. Appends an [`EpochStats`] row to the history.
pub fn train_epoch(state: &mut TrainState, config: &TrainConfig, dataset: &Dataset) -> Result<()> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Input("dataset is empty".into()));
    }
    let epoch = state.epoch + 1;
    let lr = config.lr_for_epoch(epoch);

    let mut order = dataset.indices_of(Split::Train);
    if order.is_empty() {
        return Err(Error::Input("dataset has no training rows".into()));
    }
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng::stream(config.seed, &[tag::SHUFFLE, epoch as u64]));

    let weighted = config.objective.kind.is_weighted();
    let in_burn_in = epoch <= config.weight.burn_in_epochs;

    let mut loss_sum = 0.0;
    let mut nat_correct = 0usize;
    let mut rob_correct = 0usize;
    let mut seen = 0usize;
    let mut all_weights: Vec<f64> = Vec::with_capacity(order.len());

    for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
        let m = batch.len();
        let mut xs: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut ys: Vec<usize> = Vec::with_capacity(m);
        let mut deltas: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut perturbations = Vec::with_capacity(m);

        for &idx in batch {
            let x = dataset.row(idx);
            let y = dataset.labels[idx];
            let cfg = AttackConfig {
                seed: rng::derive_seed(config.seed, &[epoch as u64, idx as u64]),
                ..config.attack
            };
            let p = attack::pgd(&state.params, x, y, &config.threat, &cfg)?;
            assert_threat_invariant(x, &p.delta, &config.threat);
            xs.push(x.to_vec());
            ys.push(y);
            deltas.push(p.delta.clone());
            perturbations.push(p);
        }

        let weights = if !weighted || in_burn_in {
            WeightVector::ones(m)
        } else {
            let mut margins = Vec::with_capacity(m);
            for i in 0..m {
                let score = margin::measure(
                    &state.params,
                    &xs[i],
                    ys[i],
                    &perturbations[i],
                    config.weight.margin_kind,
                    batch[i],
                )?;
                margins.push(score.value);
            }
            weight::effective_weights(&margins, &config.weight, epoch)?
        };

        let (report, grads) = objective::batch_loss_and_grad(
            &state.params,
            &xs,
            &deltas,
            &ys,
            &weights,
            &config.objective,
        )?;
        if !report.total.is_finite() || !grads.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss {} in epoch {epoch}, batch {batch_no} \
                 (first instance {}); aborting epoch",
                report.total, batch[0]
            )));
        }

        for i in 0..m {
            if state.params.predict(&xs[i])? == ys[i] {
                nat_correct += 1;
            }
            let adv: Vec<f64> = xs[i].iter().zip(&deltas[i]).map(|(a, b)| a + b).collect();
            if state.params.predict(&adv)? == ys[i] {
                rob_correct += 1;
            }
        }
        loss_sum += report.total;
        seen += m;
        all_weights.extend_from_slice(&report.weights_used.weights);

        sgd_step(state, &grads, lr, config);
    }

    state.epoch = epoch;
    state.history.push(EpochStats {
        epoch,
        lr,
        mean_loss: loss_sum / seen as f64,
        nat_acc: nat_correct as f64 / seen as f64,
        rob_acc: rob_correct as f64 / seen as f64,
        weights: WeightStats::of(&all_weights),
        burn_in_frac: if !weighted || in_burn_in { 1.0 } else { 0.0 },
    });
    Ok(())
}

/// Trains until `config.epochs` epochs have completed.
pub fn train(state: &mut TrainState, config: &TrainConfig, dataset: &Dataset) -> Result<()> {
    while state.epoch < config.epochs {
        train_epoch(state, config, dataset)?;
    }
    Ok(())
}

const STATE_MAGIC: &[u8; 8] = b"MAIRCKP1";

/// Serialized alongside a state checkpoint for human inspection.
#[derive(Debug, Serialize, Deserialize)]
struct StateSidecar {
    model: nn::ModelHeader,
    epoch: u32,
    seed: u64,
}

/// Writes a full training checkpoint (parameters, momentum buffers, epoch,
/// RNG seed, history) atomically, with a JSON sidecar.
pub fn checkpoint(state: &TrainState, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(STATE_MAGIC);
    nn::write_header(&mut out, &state.params);

    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    LittleEndian::write_u32(&mut b4, state.epoch);
    out.extend_from_slice(&b4);
    LittleEndian::write_u64(&mut b8, state.seed);
    out.extend_from_slice(&b8);

    nn::write_param_values(&mut out, &state.params);
    for layer in &state.velocity.layers {
        nn::write_f64s(&mut out, &layer.weights.data);
        nn::write_f64s(&mut out, &layer.bias);
    }

    LittleEndian::write_u32(&mut b4, state.history.len() as u32);
    out.extend_from_slice(&b4);
    for row in &state.history {
        LittleEndian::write_u32(&mut b4, row.epoch);
        out.extend_from_slice(&b4);
        nn::write_f64s(
            &mut out,
            &[
                row.lr,
                row.mean_loss,
                row.nat_acc,
                row.rob_acc,
                row.weights.min,
                row.weights.mean,
                row.weights.max,
                row.weights.std,
                row.burn_in_frac,
            ],
        );
    }

    nn::write_atomic(path, &out)?;
    let sidecar = serde_json::to_string_pretty(&StateSidecar {
        model: nn::ModelHeader::of(&state.params),
        epoch: state.epoch,
        seed: state.seed,
    })?;
    nn::write_atomic(&nn::sidecar_path(path), sidecar.as_bytes())?;
    Ok(())
}

/// Restores a checkpoint written by [`checkpoint`]. The round trip is
/// bitwise: resumed training matches uninterrupted training exactly.
pub fn restore(path: &Path) -> Result<TrainState> {
    let buf = std::fs::read(path)?;
    let mut r = nn::Reader::new(&buf);
    r.magic(STATE_MAGIC)?;
    let (dims, activation) = nn::read_header(&mut r)?;
    let epoch = r.u32("epoch")?;
    let seed = r.u64("seed")?;
    let params = nn::read_param_values(&mut r, &dims, activation)?;

    let mut velocity = ParamGrads::zeros_like(&params);
    for layer in &mut velocity.layers {
        let n = layer.weights.data.len();
        layer.weights.data = r.f64_vec(n, "velocity weights")?;
        layer.bias = r.f64_vec(layer.bias.len(), "velocity bias")?;
    }

    let n_rows = r.u32("history length")? as usize;
    let mut history = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let row_epoch = r.u32("history epoch")?;
        let vals = r.f64_vec(9, "history row")?;
        history.push(EpochStats {
            epoch: row_epoch,
            lr: vals[0],
            mean_loss: vals[1],
            nat_acc: vals[2],
            rob_acc: vals[3],
            weights: WeightStats {
                min: vals[4],
                mean: vals[5],
                max: vals[6],
                std: vals[7],
            },
            burn_in_frac: vals[8],
        });
    }
    if r.offset() != buf.len() as u64 {
        return Err(Error::Parse {
            offset: r.offset(),
            message: format!("{} trailing bytes", buf.len() as u64 - r.offset()),
        });
    }

    Ok(TrainState {
        params,
        velocity,
        epoch,
        seed,
        history,
    })
}

/// Rejects a restored state whose architecture differs from `dims`.
pub fn ensure_architecture(state: &TrainState, dims: &[usize]) -> Result<()> {
    if state.params.dims() != dims {
        return Err(Error::Config(format!(
            "checkpoint architecture {:?} does not match requested {:?}",
            state.params.dims(),
            dims
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, SyntheticKind, SyntheticSpec};

    fn moons(n: usize, seed: u64) -> Dataset {
        generate(&SyntheticSpec {
            kind: SyntheticKind::TwoMoons,
            n_per_class: n,
            noise: 0.1,
            seed,
        })
        .unwrap()
    }

    fn quick_config(kind: ObjectiveKind, epochs: u32, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig::desk_scale(kind, seed);
        cfg.epochs = epochs;
        cfg.attack.steps = 3;
        cfg
    }

    #[test]
    fn reference_schedule_values() {
        let cfg = TrainConfig::reference_defaults(ObjectiveKind::MailAt, 1);
        assert_eq!(cfg.lr_drops, vec![(75, 10.0), (90, 10.0)]);
        assert_eq!(cfg.momentum, 0.9);
        assert_eq!(cfg.batch_size, 128);
        assert_eq!(cfg.lr, 0.01);
        assert_eq!(cfg.weight.burn_in_epochs, 74);
        assert_eq!(cfg.attack.steps, 10);
        assert_eq!(cfg.threat.epsilon, 8.0 / 255.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn lr_schedule_is_piecewise_constant() {
        let cfg = TrainConfig::desk_scale(ObjectiveKind::At, 0);
        assert_eq!(cfg.lr_for_epoch(1), 2e-3);
        assert_eq!(cfg.lr_for_epoch(22), 2e-3);
        assert_eq!(cfg.lr_for_epoch(23), 2e-4);
        assert_eq!(cfg.lr_for_epoch(26), 2e-4);
        assert!((cfg.lr_for_epoch(27) - 2e-5).abs() < 1e-18);
        assert!((cfg.lr_for_epoch(30) - 2e-5).abs() < 1e-18);
    }

    #[test]
    fn sgd_step_degenerations() {
        let cfg = TrainConfig {
            momentum: 0.0,
            weight_decay: 0.0,
            ..quick_config(ObjectiveKind::At, 1, 1)
        };
        let mut state = TrainState::init(&[2, 4, 2], &cfg).unwrap();
        let before = state.params.clone();

        // Zero gradient and zero decay: parameters unchanged.
        let zero = ParamGrads::zeros_like(&state.params);
        sgd_step(&mut state, &zero, 0.1, &cfg);
        assert_eq!(state.params, before);

        // Plain gradient descent: theta -= lr * g.
        let mut grads = ParamGrads::zeros_like(&state.params);
        grads.layers[0].weights.data[0] = 2.0;
        sgd_step(&mut state, &grads, 0.1, &cfg);
        assert!(
            (state.params.layers[0].weights.data[0] - (before.layers[0].weights.data[0] - 0.2))
                .abs()
                < 1e-15
        );
    }

    #[test]
    fn momentum_recurrence_matches_hand_unroll() {
        // Two steps with mu = 0.9 on a scalar parameter, constant gradient g:
        // v1 = g, theta1 = theta0 - lr g
        // v2 = 0.9 g + g, theta2 = theta1 - lr (1.9 g)
        let cfg = TrainConfig {
            momentum: 0.9,
            weight_decay: 0.0,
            ..quick_config(ObjectiveKind::At, 1, 2)
        };
        let mut state = TrainState::init(&[2, 2], &cfg).unwrap();
        let theta0 = state.params.layers[0].weights.data[0];
        let g = 0.5;
        let mut grads = ParamGrads::zeros_like(&state.params);
        grads.layers[0].weights.data[0] = g;
        let lr = 0.1;
        sgd_step(&mut state, &grads, lr, &cfg);
        sgd_step(&mut state, &grads, lr, &cfg);
        let expected = theta0 - lr * g - lr * (0.9 * g + g);
        assert!((state.params.layers[0].weights.data[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn single_step_matches_hand_oracle() {
        // One batch, one step, zero momentum and decay: theta' = theta - lr * grad.
        let ds = moons(4, 3);
        let mut cfg = quick_config(ObjectiveKind::At, 1, 3);
        cfg.momentum = 0.0;
        cfg.weight_decay = 0.0;
        cfg.batch_size = ds.indices_of(Split::Train).len();
        cfg.attack.rand_init = false;
        let mut state = TrainState::init(&[2, 4, 2], &cfg).unwrap();
        let before = state.params.clone();

        // Oracle: recompute the batch gradient independently.
        let order = {
            let mut idx = ds.indices_of(Split::Train);
            use rand::seq::SliceRandom;
            idx.shuffle(&mut rng::stream(cfg.seed, &[tag::SHUFFLE, 1]));
            idx
        };
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut deltas = Vec::new();
        for &i in &order {
            let p = attack::pgd(
                &before,
                ds.row(i),
                ds.labels[i],
                &cfg.threat,
                &AttackConfig {
                    seed: rng::derive_seed(cfg.seed, &[1, i as u64]),
                    ..cfg.attack
                },
            )
            .unwrap();
            xs.push(ds.row(i).to_vec());
            ys.push(ds.labels[i]);
            deltas.push(p.delta);
        }
        let (_, grads) = objective::batch_loss_and_grad(
            &before,
            &xs,
            &deltas,
            &ys,
            &WeightVector::ones(xs.len()),
            &cfg.objective,
        )
        .unwrap();

        train_epoch(&mut state, &cfg, &ds).unwrap();
        let lr = cfg.lr_for_epoch(1);
        for (l, layer) in state.params.layers.iter().enumerate() {
            for (i, &v) in layer.weights.data.iter().enumerate() {
                let expected =
                    before.layers[l].weights.data[i] - lr * grads.layers[l].weights.data[i];
                assert!((v - expected).abs() < 1e-12, "layer {l} w[{i}]");
            }
        }
    }

    #[test]
    fn fixed_seed_runs_are_bitwise_identical() {
        let ds = moons(40, 5);
        let cfg = quick_config(ObjectiveKind::MailAt, 3, 9);
        let mut a = TrainState::init(&[2, 8, 2], &cfg).unwrap();
        let mut b = TrainState::init(&[2, 8, 2], &cfg).unwrap();
        train(&mut a, &cfg, &ds).unwrap();
        train(&mut b, &cfg, &ds).unwrap();
        assert_eq!(a, b);
        assert_eq!(history_csv(&a.history), history_csv(&b.history));
    }

    #[test]
    fn unit_weight_variants_match_baselines_bitwise() {
        // Weight degeneration: slope 0 and infinite burn-in both reproduce
        // the unweighted trajectory exactly.
        let ds = moons(30, 6);
        let base_cfg = quick_config(ObjectiveKind::At, 2, 11);
        let mut base = TrainState::init(&[2, 6, 2], &base_cfg).unwrap();
        train(&mut base, &base_cfg, &ds).unwrap();

        let mut mail_cfg = quick_config(ObjectiveKind::MailAt, 2, 11);
        mail_cfg.weight.burn_in_epochs = u32::MAX;
        let mut mail = TrainState::init(&[2, 6, 2], &mail_cfg).unwrap();
        train(&mut mail, &mail_cfg, &ds).unwrap();
        assert_eq!(base.params, mail.params);
        assert_eq!(base.history, mail.history);

        let mut slope_cfg = quick_config(ObjectiveKind::MailAt, 2, 11);
        slope_cfg.weight.burn_in_epochs = 0;
        slope_cfg.weight.slope = 0.0;
        let mut slope = TrainState::init(&[2, 6, 2], &slope_cfg).unwrap();
        train(&mut slope, &slope_cfg, &ds).unwrap();
        assert_eq!(base.params, slope.params);
    }

    #[test]
    fn burn_in_boundary_shows_in_weight_stats() {
        let ds = moons(40, 7);
        let mut cfg = quick_config(ObjectiveKind::MailAt, 4, 13);
        cfg.weight.burn_in_epochs = 2;
        let mut state = TrainState::init(&[2, 8, 2], &cfg).unwrap();
        train(&mut state, &cfg, &ds).unwrap();
        for row in &state.history[..2] {
            assert_eq!(row.weights.min, 1.0);
            assert_eq!(row.weights.max, 1.0);
            assert_eq!(row.burn_in_frac, 1.0);
        }
        for row in &state.history[2..] {
            assert_eq!(row.burn_in_frac, 0.0);
            assert!(
                row.weights.std > 0.0,
                "epoch {} weights constant",
                row.epoch
            );
        }
    }

    #[test]
    fn checkpoint_roundtrip_and_resume_match_uninterrupted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.ckpt");
        let ds = moons(30, 8);
        let cfg = quick_config(ObjectiveKind::MailAt, 4, 17);

        let mut full = TrainState::init(&[2, 6, 2], &cfg).unwrap();
        train(&mut full, &cfg, &ds).unwrap();

        let mut partial = TrainState::init(&[2, 6, 2], &cfg).unwrap();
        train_epoch(&mut partial, &cfg, &ds).unwrap();
        train_epoch(&mut partial, &cfg, &ds).unwrap();
        checkpoint(&partial, &path).unwrap();

        let mut resumed = restore(&path).unwrap();
        assert_eq!(resumed, partial);
        train(&mut resumed, &cfg, &ds).unwrap();
        assert_eq!(resumed.params, full.params);
        assert_eq!(resumed.velocity, full.velocity);
        assert_eq!(history_csv(&resumed.history), history_csv(&full.history));
    }

    #[test]
    fn restore_rejects_wrong_architecture_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.ckpt");
        let cfg = quick_config(ObjectiveKind::At, 1, 19);
        let state = TrainState::init(&[2, 6, 2], &cfg).unwrap();
        checkpoint(&state, &path).unwrap();

        let restored = restore(&path).unwrap();
        ensure_architecture(&restored, &[2, 6, 2]).unwrap();
        assert!(ensure_architecture(&restored, &[2, 16, 16, 2]).is_err());

        // A model file is not a state checkpoint.
        let model_path = dir.path().join("model.bin");
        nn::save_model(&state.params, &model_path).unwrap();
        match restore(&model_path) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("magic")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn config_json_roundtrip_mirrors_fields() {
        let cfg = TrainConfig::desk_scale(ObjectiveKind::MailTrades, 23);
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: TrainConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
        for key in [
            "epochs",
            "batch_size",
            "lr",
            "lr_drops",
            "momentum",
            "weight_decay",
            "seed",
            "threat",
            "attack",
            "weight",
            "objective",
        ] {
            assert!(json.contains(&format!("\"{key}\"")), "missing {key}");
        }
    }
}
