//! Measurement studies and ablations.
//!
//! Everything here emits plot-ready CSV rather than rendered figures:
//! robustness metric rows, step-count histograms, margin-vs-step-count box
//! plots, attack-path comparisons, and the three ablation tables (margin
//! kind, assignment function, perturbation generation). All outputs are
//! reproducible bitwise from `(config, seed)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::attack::{
    self, AttackConfig, AttackLoss, GenerationKind, LmPgdConfig, Perturbation, ThreatModel,
};
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::margin::{self, MarginKind};
use crate::nn::{Activation, DenseLayer, Matrix, ModelParams};
use crate::objective::ObjectiveKind;
use crate::rng;
use crate::train::{self, TrainConfig, TrainState};
use crate::weight::Assignment;

/// Which evaluations to run; `PGD-k` is cross-entropy ascent, `CW` is
/// logit-margin ascent with the same step count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalSuite {
    pub nat: bool,
    pub pgd: bool,
    pub cw: bool,
    /// Attack iterations k for the PGD/CW columns.
    pub steps: usize,
}

impl EvalSuite {
    pub fn full(steps: usize) -> Self {
        Self {
            nat: true,
            pgd: true,
            cw: true,
            steps,
        }
    }
}

/// One table row of accuracies, in percent. Entries are `None` when the
/// corresponding evaluation was not requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    pub nat: Option<f64>,
    pub pgd: Option<f64>,
    pub cw: Option<f64>,
}

/// A config snapshot, a metric table, and the artifact files written.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_json: String,
    pub rows: Vec<MetricRow>,
    pub artifacts: Vec<String>,
}

fn accuracy_nat(params: &ModelParams, dataset: &Dataset, idx: &[usize]) -> Result<f64> {
    let mut correct = 0usize;
    for &i in idx {
        if params.predict(dataset.row(i))? == dataset.labels[i] {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / idx.len() as f64)
}

fn accuracy_under_attack(
    params: &ModelParams,
    dataset: &Dataset,
    idx: &[usize],
    threat: &ThreatModel,
    base: &AttackConfig,
    loss: AttackLoss,
    eval_seed: u64,
) -> Result<f64> {
    let mut correct = 0usize;
    for &i in idx {
        let cfg = AttackConfig {
            loss_kind: loss,
            seed: rng::derive_seed(eval_seed, &[loss as u64, i as u64]),
            ..*base
        };
        let p = attack::pgd(params, dataset.row(i), dataset.labels[i], threat, &cfg)?;
        if !p.trace.last().expect("non-empty trace").crossed {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / idx.len() as f64)
}

/// Clean and attacked accuracy (percent) over the given split.
#[allow(clippy::too_many_arguments)]
pub fn eval_robustness(
    params: &ModelParams,
    dataset: &Dataset,
    split: Split,
    suite: &EvalSuite,
    threat: &ThreatModel,
    step_size: f64,
    eval_seed: u64,
    method: &str,
) -> Result<MetricRow> {
    let idx = dataset.indices_of(split);
    if idx.is_empty() {
        return Err(Error::Input("no instances in the requested split".into()));
    }
    let base = AttackConfig {
        steps: suite.steps,
        step_size,
        loss_kind: AttackLoss::Ce,
        rand_init: true,
        seed: eval_seed,
    };
    Ok(MetricRow {
        method: method.to_string(),
        nat: if suite.nat {
            Some(accuracy_nat(params, dataset, &idx)?)
        } else {
            None
        },
        pgd: if suite.pgd {
            Some(accuracy_under_attack(
                params,
                dataset,
                &idx,
                threat,
                &base,
                AttackLoss::Ce,
                eval_seed,
            )?)
        } else {
            None
        },
        cw: if suite.cw {
            Some(accuracy_under_attack(
                params,
                dataset,
                &idx,
                threat,
                &base,
                AttackLoss::CwMargin,
                eval_seed,
            )?)
        } else {
            None
        },
    })
}

/// Renders metric rows as CSV.
pub fn metric_rows_csv(rows: &[MetricRow]) -> String {
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from("method,nat,pgd,cw\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.method,
            fmt(r.nat),
            fmt(r.pgd),
            fmt(r.cw)
        )
        .expect("string write");
    }
    out
}

/// Histogram of least-crossing steps over a dataset split, with the
/// sub-population whose adversarial margin is negative counted per bin.
///
/// CSV columns: `lps,count,critical_count`; bins are `0..=steps` and the
/// counts sum to the number of instances.
pub fn lps_histogram(
    params: &ModelParams,
    dataset: &Dataset,
    split: Split,
    threat: &ThreatModel,
    cfg: &AttackConfig,
) -> Result<String> {
    let idx = dataset.indices_of(split);
    if idx.is_empty() {
        return Err(Error::Input("no instances in the requested split".into()));
    }
    let mut counts = vec![0usize; cfg.steps + 1];
    let mut critical = vec![0usize; cfg.steps + 1];
    for &i in &idx {
        let per_instance = AttackConfig {
            seed: rng::derive_seed(cfg.seed, &[i as u64]),
            ..*cfg
        };
        let p = attack::pgd(
            params,
            dataset.row(i),
            dataset.labels[i],
            threat,
            &per_instance,
        )?;
        let steps = margin::lps(&p)?;
        counts[steps] += 1;
        let pm_adv = margin::pm_adv(params, dataset.row(i), &p.delta, dataset.labels[i])?;
        if pm_adv < 0.0 {
            critical[steps] += 1;
        }
    }
    let mut out = String::from("lps,count,critical_count\n");
    for (bin, (&c, &k)) in counts.iter().zip(&critical).enumerate() {
        writeln!(out, "{bin},{c},{k}").expect("string write");
    }
    Ok(out)
}

/// Quantile with linear interpolation on the sorted sample.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Groups instances by their step count and summarizes the natural margin
/// per group: quartiles, 5%/95% whiskers, and the outliers beyond them.
///
/// CSV columns: `lps,n,whisker_lo,q1,median,q3,whisker_hi,outliers`
/// (outliers `;`-separated). Empty groups are omitted.
pub fn pm_vs_lps_boxplot(
    params: &ModelParams,
    dataset: &Dataset,
    split: Split,
    threat: &ThreatModel,
    cfg: &AttackConfig,
) -> Result<String> {
    let idx = dataset.indices_of(split);
    if idx.is_empty() {
        return Err(Error::Input("no instances in the requested split".into()));
    }
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); cfg.steps + 1];
    for &i in &idx {
        let per_instance = AttackConfig {
            seed: rng::derive_seed(cfg.seed, &[i as u64]),
            ..*cfg
        };
        let p = attack::pgd(
            params,
            dataset.row(i),
            dataset.labels[i],
            threat,
            &per_instance,
        )?;
        let steps = margin::lps(&p)?;
        let pm_nat = margin::pm_nat(params, dataset.row(i), dataset.labels[i])?;
        groups[steps].push(pm_nat);
    }

    let mut out = String::from("lps,n,whisker_lo,q1,median,q3,whisker_hi,outliers\n");
    for (bin, group) in groups.iter_mut().enumerate() {
        if group.is_empty() {
            continue;
        }
        group.sort_by(|a, b| a.partial_cmp(b).expect("finite margins"));
        let w_lo = quantile(group, 0.05);
        let w_hi = quantile(group, 0.95);
        let outliers: Vec<String> = group
            .iter()
            .filter(|&&v| v < w_lo || v > w_hi)
            .map(|v| v.to_string())
            .collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            bin,
            group.len(),
            w_lo,
            quantile(group, 0.25),
            quantile(group, 0.5),
            quantile(group, 0.75),
            w_hi,
            outliers.join(";")
        )
        .expect("string write");
    }
    Ok(out)
}

/// Outcome of the attack-path comparison for one instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathExemplar {
    pub instance_id: usize,
    pub pgd_lps: usize,
    pub lm_lps: usize,
}

/// Report of the path-dependence search: either the best exemplar where the
/// plain attack stalls but the momentum/line-search attack crosses, or an
/// exhaustive statement that none exists for this model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathDependenceReport {
    pub searched: usize,
    pub max_steps: usize,
    pub exemplar: Option<PathExemplar>,
    /// Loss traces of both attacks for the exemplar, as trace CSV.
    pub traces_csv: Option<String>,
}

impl PathDependenceReport {
    pub fn summary(&self) -> String {
        match &self.exemplar {
            Some(e) => format!(
                "instance {}: plain attack never crossed in {} steps, \
                 momentum/line-search crossed at step {}",
                e.instance_id, self.max_steps, e.lm_lps
            ),
            None => format!(
                "no stuck instance among {} searched: wherever the \
                 momentum/line-search attack crossed, plain ascent did too",
                self.searched
            ),
        }
    }
}

/// Searches a dataset for instances where plain ascent never crosses within
/// `max_steps` but the momentum/line-search variant does. The exemplar with
/// the earliest momentum crossing (ties toward the lower instance id) is
/// reported with both traces.
pub fn path_dependence_demo(
    params: &ModelParams,
    dataset: &Dataset,
    split: Split,
    threat: &ThreatModel,
    max_steps: usize,
) -> Result<PathDependenceReport> {
    let idx = dataset.indices_of(split);
    if idx.is_empty() {
        return Err(Error::Input("no instances in the requested split".into()));
    }
    // Deterministic zero-init on both sides so the paths share a start point.
    let pgd_cfg = AttackConfig {
        steps: max_steps,
        step_size: threat.epsilon / 4.0,
        loss_kind: AttackLoss::Ce,
        rand_init: false,
        seed: 0,
    };
    let lm_cfg = LmPgdConfig::demo_for_epsilon(threat.epsilon);

    let mut best: Option<(PathExemplar, Perturbation, Perturbation)> = None;
    for &i in &idx {
        let x = dataset.row(i);
        let y = dataset.labels[i];
        let plain = attack::pgd(params, x, y, threat, &pgd_cfg)?;
        let plain_lps = margin::lps(&plain)?;
        if plain_lps < max_steps {
            continue;
        }
        let lm = attack::lm_pgd(params, x, y, threat, &lm_cfg, max_steps)?;
        let lm_lps = margin::lps(&lm)?;
        if lm_lps < max_steps {
            let candidate = PathExemplar {
                instance_id: i,
                pgd_lps: plain_lps,
                lm_lps,
            };
            let better = match &best {
                None => true,
                Some((cur, _, _)) => lm_lps < cur.lm_lps,
            };
            if better {
                best = Some((candidate, plain, lm));
            }
        }
    }

    Ok(match best {
        Some((exemplar, plain, lm)) => {
            let csv = attack::traces_to_csv(&[
                (exemplar.instance_id, &plain),
                (exemplar.instance_id, &lm),
            ]);
            PathDependenceReport {
                searched: idx.len(),
                max_steps,
                exemplar: Some(exemplar),
                traces_csv: Some(csv),
            }
        }
        None => PathDependenceReport {
            searched: idx.len(),
            max_steps,
            exemplar: None,
            traces_csv: None,
        },
    })
}

/// A hand-built one-dimensional instance on which plain sign-ascent
/// oscillates below a local loss peak forever while the momentum
/// line-search attack punches through the dip and crosses.
///
/// The class-1 logit as a function of the input u is piecewise linear:
/// slope +1 up to u = 0.9, slope -0.5 to u = 2.1, slope +2 beyond, with
/// g(0) = -3. Plain ascent from u = 0 with step 1 bounces between u = 0
/// and u = 1; momentum accumulated on the first rise carries the other
/// attack across the dip to the crossing near u = 3.45.
pub fn stuck_pgd_scenario() -> (ModelParams, Vec<f64>, usize, ThreatModel) {
    let params = ModelParams::new(
        vec![
            DenseLayer {
                weights: Matrix::new(3, 1, vec![1.0, 1.0, 1.0]).expect("static weights"),
                bias: vec![4.0, -0.9, -2.1],
            },
            DenseLayer {
                weights: Matrix::new(2, 3, vec![0.0, 0.0, 0.0, 1.0, -1.5, 2.5])
                    .expect("static weights"),
                bias: vec![0.0, -7.0],
            },
        ],
        Activation::Relu,
    )
    .expect("static network");
    let threat = ThreatModel::linf(4.0).expect("static threat");
    (params, vec![0.0], 0, threat)
}

/// Axes of the ablation cross-product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationAxes {
    pub margin: bool,
    pub assignment: bool,
    pub generation: bool,
}

impl Default for AblationAxes {
    fn default() -> Self {
        Self {
            margin: true,
            assignment: true,
            generation: true,
        }
    }
}

/// One emitted ablation table: named columns of metric rows (NAT/PGD/CW),
/// averaged over the shared seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationTable {
    pub name: String,
    pub columns: Vec<String>,
    /// `values[metric][column]`, metrics ordered NAT, PGD, CW.
    pub values: Vec<Vec<f64>>,
}

impl AblationTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric");
        for c in &self.columns {
            write!(out, ",{c}").expect("string write");
        }
        out.push('\n');
        for (metric, row) in ["nat", "pgd", "cw"].iter().zip(&self.values) {
            write!(out, "{metric}").expect("string write");
            for v in row {
                write!(out, ",{v}").expect("string write");
            }
            out.push('\n');
        }
        out
    }
}

/// Desk-scale ablation setup: the base training config is cloned per cell
/// with exactly one knob changed, and every cell shares the same seeds.
#[derive(Debug, Clone)]
pub struct AblationConfig {
    pub base: TrainConfig,
    pub dims: Vec<usize>,
    pub seeds: Vec<u64>,
    pub eval_steps: usize,
}

impl AblationConfig {
    /// Quick two-moons setup used by the CLI defaults.
    pub fn desk_default(seeds: Vec<u64>) -> Self {
        let mut base = TrainConfig::desk_scale(ObjectiveKind::MailTrades, 0);
        base.epochs = 10;
        base.lr_drops = vec![(8, 10.0), (9, 10.0)];
        base.weight.burn_in_epochs = 5;
        Self {
            base,
            dims: vec![2, 16, 16, 2],
            seeds,
            eval_steps: 20,
        }
    }
}

fn train_and_eval(
    cfg: &TrainConfig,
    dims: &[usize],
    dataset: &Dataset,
    eval_steps: usize,
    method: &str,
) -> Result<MetricRow> {
    let mut state = TrainState::init(dims, cfg)?;
    train::train(&mut state, cfg, dataset)?;
    eval_robustness(
        &state.params,
        dataset,
        Split::Test,
        &EvalSuite::full(eval_steps),
        &cfg.threat,
        cfg.threat.epsilon / 4.0,
        rng::derive_seed(cfg.seed, &[0xEAA1]),
        method,
    )
}

fn mean_rows(rows: &[MetricRow], method: &str) -> MetricRow {
    let n = rows.len() as f64;
    let mean = |f: fn(&MetricRow) -> Option<f64>| {
        let sum: f64 = rows.iter().filter_map(f).sum();
        Some(sum / n)
    };
    MetricRow {
        method: method.to_string(),
        nat: mean(|r| r.nat),
        pgd: mean(|r| r.pgd),
        cw: mean(|r| r.cw),
    }
}

/// Runs the requested ablation axes on one dataset and returns one table
/// per axis:
///
/// - margin kind: logit margin vs probabilistic margin feeding the weights;
/// - assignment function: hinge vs step vs sigmoid;
/// - perturbation generation: CE vs CW vs KL ascent, under both the plain
///   and the trade-off objective.
pub fn ablation_suite(
    cfg: &AblationConfig,
    dataset: &Dataset,
    axes: AblationAxes,
) -> Result<Vec<AblationTable>> {
    let mut tables = Vec::new();

    let cell = |mutate: &dyn Fn(&mut TrainConfig), method: &str| -> Result<MetricRow> {
        let mut rows = Vec::new();
        for &seed in &cfg.seeds {
            let mut c = cfg.base.clone();
            c.seed = seed;
            c.attack.seed = seed;
            mutate(&mut c);
            rows.push(train_and_eval(
                &c,
                &cfg.dims,
                dataset,
                cfg.eval_steps,
                method,
            )?);
        }
        Ok(mean_rows(&rows, method))
    };

    let to_table = |name: &str, rows: Vec<MetricRow>| AblationTable {
        name: name.to_string(),
        columns: rows.iter().map(|r| r.method.clone()).collect(),
        values: vec![
            rows.iter().map(|r| r.nat.unwrap_or(f64::NAN)).collect(),
            rows.iter().map(|r| r.pgd.unwrap_or(f64::NAN)).collect(),
            rows.iter().map(|r| r.cw.unwrap_or(f64::NAN)).collect(),
        ],
    };

    if axes.margin {
        let rows = vec![
            cell(&|c| c.weight.margin_kind = MarginKind::Mm, "mm")?,
            cell(&|c| c.weight.margin_kind = MarginKind::PmAdv, "pm")?,
        ];
        tables.push(to_table("margin_kind", rows));
    }

    if axes.assignment {
        let rows = vec![
            cell(&|c| c.weight.assignment = Assignment::Hinge, "hinge")?,
            cell(&|c| c.weight.assignment = Assignment::Step, "step")?,
            cell(&|c| c.weight.assignment = Assignment::Sigmoid, "sigmoid")?,
        ];
        tables.push(to_table("assignment", rows));
    }

    if axes.generation {
        let mut rows = Vec::new();
        for (gen, gen_name) in [
            (GenerationKind::CeAscent, "pgd"),
            (GenerationKind::CwAscent, "cw"),
            (GenerationKind::KlAscent, "kl"),
        ] {
            for (kind, obj_name) in [
                (ObjectiveKind::MailAt, "at"),
                (ObjectiveKind::MailTrades, "trades"),
            ] {
                rows.push(cell(
                    &move |c: &mut TrainConfig| {
                        c.objective = crate::objective::ObjectiveConfig::defaults_for(kind);
                        c.attack.loss_kind = gen.loss();
                    },
                    &format!("{gen_name}_{obj_name}"),
                )?);
            }
        }
        tables.push(to_table("generation", rows));
    }

    Ok(tables)
}
