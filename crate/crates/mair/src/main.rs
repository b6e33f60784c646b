//! Command-line harness around the library: training, robustness
//! evaluation, and the measurement studies, all emitting CSV/JSON artifacts
//! into an output directory.
//!
//! Exit codes: 0 on success, 2 on configuration/input errors, 3 on numeric
//! failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mair::attack::{AttackConfig, AttackLoss};
use mair::data::{self, CsvSchema, Dataset, Split, SyntheticKind, SyntheticSpec};
use mair::error::{Error, Result};
use mair::experiment::{self, AblationAxes, AblationConfig, EvalSuite, ExperimentReport};
use mair::margin::{self, MarginKind};
use mair::nn::{self, ModelParams};
use mair::objective::{ObjectiveConfig, ObjectiveKind};
use mair::train::{self, TrainConfig, TrainState};
use mair::weight::Assignment;

#[derive(Parser)]
#[command(
    name = "mair",
    about = "Margin-aware instance-reweighted adversarial training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a classifier; writes config.json, train_log.csv, state.ckpt,
    /// and model.bin into --out.
    Train(TrainArgs),
    /// Evaluate clean and attacked accuracy of a saved model.
    Eval(EvalArgs),
    /// Histogram of least-crossing attack steps (plus critical counts).
    MeasureLps(MeasureArgs),
    /// Box-plot statistics of the natural margin grouped by crossing step.
    MeasureBoxplot(MeasureArgs),
    /// Search for instances where plain ascent stalls but the
    /// momentum/line-search attack crosses.
    DemoPath(DemoPathArgs),
    /// Run the measurement and objective ablation tables.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct DataArg {
    /// Dataset spec: `two-moons[:n=500,noise=0.1,seed=S]`,
    /// `blobs[:...]`, `rings[:...]`, `csv:PATH[:features=2,classes=2]`,
    /// or `idx:IMAGES,LABELS`.
    #[arg(long, default_value = "two-moons")]
    data: String,
    /// Re-split a loaded dataset with this test fraction (file datasets
    /// load with every row tagged train).
    #[arg(long)]
    resplit: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArg,
    /// JSON training config; flags below override individual fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hidden layer widths, e.g. `16,16`.
    #[arg(long, default_value = "16,16")]
    hidden: String,
    #[arg(long)]
    epochs: Option<u32>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// at | trades | mart | mail_at | mail_trades | mail_mart
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    tradeoff: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    attack_steps: Option<usize>,
    #[arg(long)]
    attack_step_size: Option<f64>,
    #[arg(long)]
    burn_in: Option<u32>,
    #[arg(long)]
    slope: Option<f64>,
    #[arg(long)]
    bias: Option<f64>,
    /// pm_nat | pm_adv | pm_dif | mm | lps
    #[arg(long)]
    margin: Option<String>,
    /// sigmoid | hinge | step
    #[arg(long)]
    assignment: Option<String>,
    /// Resume from a state checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArg,
    /// Model checkpoint (state.ckpt or model.bin).
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated subset of nat,pgd,cw.
    #[arg(long, default_value = "nat,pgd,cw")]
    suite: String,
    /// Attack iterations for the PGD/CW columns.
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long, default_value_t = 0.15)]
    epsilon: f64,
    /// train | test
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct MeasureArgs {
    #[command(flatten)]
    data: DataArg,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 10)]
    steps: usize,
    #[arg(long, default_value_t = 0.15)]
    epsilon: f64,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long, default_value = "train")]
    split: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct DemoPathArgs {
    #[command(flatten)]
    data: DataArg,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 50)]
    max_steps: usize,
    #[arg(long, default_value_t = 0.15)]
    epsilon: f64,
    #[arg(long, default_value = "train")]
    split: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    data: DataArg,
    /// Comma-separated seeds shared across every cell.
    #[arg(long, default_value = "1")]
    seeds: String,
    /// Comma-separated subset of margin,assignment,generation.
    #[arg(long, default_value = "margin,assignment,generation")]
    axes: String,
    #[arg(long)]
    epochs: Option<u32>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::MeasureLps(args) => cmd_measure(args, Measurement::LpsHistogram),
        Command::MeasureBoxplot(args) => cmd_measure(args, Measurement::Boxplot),
        Command::DemoPath(args) => cmd_demo_path(args),
        Command::Ablate(args) => cmd_ablate(args),
    }
}

fn parse_kv(spec: &str) -> Result<Vec<(String, String)>> {
    spec.split(',')
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (k, v) = pair.split_once('=').ok_or_else(|| {
                Error::Config(format!("expected key=value in data spec, got '{pair}'"))
            })?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn parse_data(arg: &DataArg, default_seed: u64) -> Result<Dataset> {
    let spec = &arg.data;
    let (head, rest) = match spec.split_once(':') {
        Some((h, r)) => (h, Some(r)),
        None => (spec.as_str(), None),
    };
    let mut dataset = match head {
        "two-moons" | "blobs" | "rings" => {
            let kind = match head {
                "two-moons" => SyntheticKind::TwoMoons,
                "blobs" => SyntheticKind::GaussianBlobs,
                _ => SyntheticKind::ConcentricRings,
            };
            let mut synth = SyntheticSpec {
                kind,
                n_per_class: 500,
                noise: 0.1,
                seed: default_seed,
            };
            for (k, v) in parse_kv(rest.unwrap_or(""))? {
                match k.as_str() {
                    "n" => synth.n_per_class = parse_num(&v, "n")?,
                    "noise" => synth.noise = parse_num(&v, "noise")?,
                    "seed" => synth.seed = parse_num(&v, "seed")?,
                    other => return Err(Error::Config(format!("unknown data key '{other}'"))),
                }
            }
            data::generate(&synth)?
        }
        "csv" => {
            let rest =
                rest.ok_or_else(|| Error::Config("csv spec needs a path: csv:PATH".into()))?;
            let (path, opts) = match rest.split_once(':') {
                Some((p, o)) => (p, o),
                None => (rest, ""),
            };
            let mut schema = CsvSchema {
                features: 2,
                classes: 2,
            };
            for (k, v) in parse_kv(opts)? {
                match k.as_str() {
                    "features" => schema.features = parse_num(&v, "features")?,
                    "classes" => schema.classes = parse_num(&v, "classes")?,
                    other => return Err(Error::Config(format!("unknown csv key '{other}'"))),
                }
            }
            data::load_csv(Path::new(path), &schema)?
        }
        "idx" => {
            let rest = rest.ok_or_else(|| {
                Error::Config("idx spec needs two paths: idx:IMAGES,LABELS".into())
            })?;
            let (images, labels) = rest.split_once(',').ok_or_else(|| {
                Error::Config("idx spec needs two paths: idx:IMAGES,LABELS".into())
            })?;
            data::load_idx(Path::new(images), Path::new(labels))?
        }
        other => return Err(Error::Config(format!("unknown dataset kind '{other}'"))),
    };
    if let Some(fraction) = arg.resplit {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::Config(format!(
                "resplit fraction must be in [0, 1), got {fraction}"
            )));
        }
        dataset.resplit(default_seed, fraction);
    }
    Ok(dataset)
}

fn parse_num<T: std::str::FromStr>(v: &str, what: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("cannot parse {what} from '{v}'")))
}

fn parse_split(s: &str) -> Result<Split> {
    match s {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        other => Err(Error::Config(format!(
            "split must be train or test, got '{other}'"
        ))),
    }
}

fn parse_objective(s: &str) -> Result<ObjectiveKind> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::Config(format!("unknown objective '{s}'")))
}

fn parse_margin(s: &str) -> Result<MarginKind> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::Config(format!("unknown margin kind '{s}'")))
}

fn parse_assignment(s: &str) -> Result<Assignment> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::Config(format!("unknown assignment '{s}'")))
}

/// Loads either a full state checkpoint or a bare model file.
fn load_model(path: &Path) -> Result<ModelParams> {
    match train::restore(path) {
        Ok(state) => Ok(state.params),
        Err(_) => nn::load_model(path),
    }
}

fn ensure_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<String> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path.display().to_string())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => serde_json::from_str::<TrainConfig>(&fs::read_to_string(path)?)?,
        None => TrainConfig::desk_scale(ObjectiveKind::MailAt, 0),
    };
    if let Some(kind) = args.objective.as_deref() {
        let kind = parse_objective(kind)?;
        config.objective = ObjectiveConfig {
            kind,
            tradeoff: ObjectiveConfig::defaults_for(kind).tradeoff,
        };
        config.attack.loss_kind = kind.generation().loss();
    }
    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.lr {
        config.lr = v;
    }
    if let Some(v) = args.momentum {
        config.momentum = v;
    }
    if let Some(v) = args.weight_decay {
        config.weight_decay = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
        config.attack.seed = v;
    }
    if let Some(v) = args.tradeoff {
        config.objective.tradeoff = v;
    }
    if let Some(v) = args.epsilon {
        config.threat = mair::attack::ThreatModel::new(v, config.threat.clamp_domain)?;
    }
    if let Some(v) = args.attack_steps {
        config.attack.steps = v;
    }
    if let Some(v) = args.attack_step_size {
        config.attack.step_size = v;
    }
    if let Some(v) = args.burn_in {
        config.weight.burn_in_epochs = v;
    }
    if let Some(v) = args.slope {
        config.weight.slope = v;
    }
    if let Some(v) = args.bias {
        config.weight.bias = v;
    }
    if let Some(v) = args.margin.as_deref() {
        config.weight.margin_kind = parse_margin(v)?;
    }
    if let Some(v) = args.assignment.as_deref() {
        config.weight.assignment = parse_assignment(v)?;
    }
    config.validate()?;

    let dataset = parse_data(&args.data, config.seed)?;
    let dims = model_dims(&args.hidden, dataset.dim(), dataset.classes)?;

    let mut state = match &args.resume {
        Some(path) => {
            let state = train::restore(path)?;
            train::ensure_architecture(&state, &dims)?;
            state
        }
        None => TrainState::init(&dims, &config)?,
    };

    ensure_out(&args.out)?;
    train::train(&mut state, &config, &dataset)?;

    let mut artifacts = Vec::new();
    artifacts.push(write_artifact(
        &args.out,
        "config.json",
        &serde_json::to_string_pretty(&config)?,
    )?);
    artifacts.push(write_artifact(
        &args.out,
        "train_log.csv",
        &train::history_csv(&state.history),
    )?);
    let ckpt = args.out.join("state.ckpt");
    train::checkpoint(&state, &ckpt)?;
    artifacts.push(ckpt.display().to_string());
    let model = args.out.join("model.bin");
    nn::save_model(&state.params, &model)?;
    artifacts.push(model.display().to_string());

    if let Some(last) = state.history.last() {
        println!(
            "epoch {}: loss {:.4}, natural acc {:.3}, robust acc {:.3}",
            last.epoch, last.mean_loss, last.nat_acc, last.rob_acc
        );
    }
    for a in &artifacts {
        println!("wrote {a}");
    }
    Ok(())
}

fn model_dims(hidden: &str, input: usize, classes: usize) -> Result<Vec<usize>> {
    let mut dims = vec![input];
    for part in hidden.split(',').filter(|s| !s.is_empty()) {
        dims.push(parse_num(part.trim(), "hidden width")?);
    }
    dims.push(classes);
    Ok(dims)
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let params = load_model(&args.model)?;
    let dataset = parse_data(&args.data, args.seed)?;
    let split = parse_split(&args.split)?;
    let mut suite = EvalSuite {
        nat: false,
        pgd: false,
        cw: false,
        steps: args.steps,
    };
    for part in args.suite.split(',') {
        match part.trim() {
            "nat" => suite.nat = true,
            "pgd" => suite.pgd = true,
            "cw" => suite.cw = true,
            "" => {}
            other => return Err(Error::Config(format!("unknown suite entry '{other}'"))),
        }
    }
    let threat = mair::attack::ThreatModel::linf(args.epsilon)?;
    let row = experiment::eval_robustness(
        &params,
        &dataset,
        split,
        &suite,
        &threat,
        args.epsilon / 4.0,
        args.seed,
        "model",
    )?;
    let csv = experiment::metric_rows_csv(std::slice::from_ref(&row));
    print!("{csv}");
    ensure_out(&args.out)?;
    let report = ExperimentReport {
        config_json: serde_json::to_string(&suite)?,
        rows: vec![row],
        artifacts: vec![write_artifact(&args.out, "metrics.csv", &csv)?],
    };
    write_artifact(
        &args.out,
        "report.json",
        &serde_json::to_string_pretty(&report)?,
    )?;
    Ok(())
}

enum Measurement {
    LpsHistogram,
    Boxplot,
}

fn cmd_measure(args: MeasureArgs, what: Measurement) -> Result<()> {
    let params = load_model(&args.model)?;
    let dataset = parse_data(&args.data, args.seed)?;
    let split = parse_split(&args.split)?;
    let threat = mair::attack::ThreatModel::linf(args.epsilon)?;
    let cfg = AttackConfig {
        steps: args.steps,
        step_size: args.step_size.unwrap_or(args.epsilon / 4.0),
        loss_kind: AttackLoss::Ce,
        rand_init: true,
        seed: args.seed,
    };
    ensure_out(&args.out)?;
    let (name, csv) = match what {
        Measurement::LpsHistogram => (
            "lps_histogram.csv",
            experiment::lps_histogram(&params, &dataset, split, &threat, &cfg)?,
        ),
        Measurement::Boxplot => (
            "pm_vs_lps.csv",
            experiment::pm_vs_lps_boxplot(&params, &dataset, split, &threat, &cfg)?,
        ),
    };
    print!("{csv}");
    write_artifact(&args.out, name, &csv)?;

    // Margin dump in the shared (instance_id, kind, value, epoch) format.
    let mut scores = Vec::new();
    for &i in &dataset.indices_of(split) {
        let per_instance = AttackConfig {
            seed: mair::rng::derive_seed(cfg.seed, &[i as u64]),
            ..cfg
        };
        let p = mair::attack::pgd(
            &params,
            dataset.row(i),
            dataset.labels[i],
            &threat,
            &per_instance,
        )?;
        for kind in [MarginKind::PmNat, MarginKind::PmAdv, MarginKind::Lps] {
            scores.push(margin::measure(
                &params,
                dataset.row(i),
                dataset.labels[i],
                &p,
                kind,
                i,
            )?);
        }
    }
    write_artifact(
        &args.out,
        "margins.csv",
        &margin::margins_to_csv(&scores, 0),
    )?;
    Ok(())
}

fn cmd_demo_path(args: DemoPathArgs) -> Result<()> {
    let params = load_model(&args.model)?;
    let dataset = parse_data(&args.data, 0)?;
    let split = parse_split(&args.split)?;
    let threat = mair::attack::ThreatModel::linf(args.epsilon)?;
    let report =
        experiment::path_dependence_demo(&params, &dataset, split, &threat, args.max_steps)?;
    println!("{}", report.summary());
    ensure_out(&args.out)?;
    if let Some(csv) = &report.traces_csv {
        write_artifact(&args.out, "path_traces.csv", csv)?;
    }
    write_artifact(
        &args.out,
        "path_report.json",
        &serde_json::to_string_pretty(&report)?,
    )?;
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> Result<()> {
    let mut seeds = Vec::new();
    for part in args.seeds.split(',').filter(|s| !s.is_empty()) {
        seeds.push(parse_num(part.trim(), "seed")?);
    }
    if seeds.is_empty() {
        return Err(Error::Config("need at least one seed".into()));
    }
    let mut axes = AblationAxes {
        margin: false,
        assignment: false,
        generation: false,
    };
    for part in args.axes.split(',').filter(|s| !s.is_empty()) {
        match part.trim() {
            "margin" => axes.margin = true,
            "assignment" => axes.assignment = true,
            "generation" => axes.generation = true,
            other => return Err(Error::Config(format!("unknown axis '{other}'"))),
        }
    }
    let mut cfg = AblationConfig::desk_default(seeds);
    if let Some(epochs) = args.epochs {
        cfg.base.epochs = epochs;
    }
    let dataset = parse_data(&args.data, cfg.base.seed)?;

    ensure_out(&args.out)?;
    let tables = experiment::ablation_suite(&cfg, &dataset, axes)?;
    for table in &tables {
        let csv = table.to_csv();
        println!("== {} ==\n{csv}", table.name);
        write_artifact(&args.out, &format!("ablation_{}.csv", table.name), &csv)?;
    }
    Ok(())
}
