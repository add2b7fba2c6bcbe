use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gauge_dispatch::data_io::{build_dataset, parse_case, sample_loads, Checkpoint, Dataset};
use gauge_dispatch::dispatch::Partition;
use gauge_dispatch::gauge::GaugeLayer;
use gauge_dispatch::mapviz::{density_ratio, map_grid, to_csv, PlanarSet, PRESETS};
use gauge_dispatch::neural::{train, Method, OptimizerKind, Pipeline, TrainConfig, DEFAULT_HIDDEN};
use gauge_dispatch::report::{evaluate, Evaluated, TimingConfig};
use gauge_dispatch::Error;

#[derive(Parser)]
#[command(
    name = "gauge-dispatch",
    version,
    about = "Neural economic dispatch with feasible-by-construction outputs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample perturbed loads from a MATPOWER case and label them exactly.
    GenData(GenDataArgs),
    /// Train one method on a dataset and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate checkpoints, the projection baseline and the exact solver on the test split.
    Eval(EvalArgs),
    /// Map a uniform grid through a layer onto a 2-D set and write the point cloud.
    Mapviz(MapvizArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// MATPOWER case file
    #[arg(long)]
    case: PathBuf,
    #[arg(long, default_value_t = 200)]
    count: usize,
    /// Relative load fluctuation f; each load is scaled by U[1-f, 1+f]
    #[arg(long, default_value_t = 0.10)]
    fluct: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    train_fraction: f64,
    /// Tolerance of the exact labelling solver
    #[arg(long, default_value_t = 1e-10)]
    label_tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// penalty, traditional-gauge, generalized-gauge or variant:<name>
    #[arg(long)]
    method: String,
    /// Penalty weight; only used by the penalty method
    #[arg(long, default_value_t = 1e-6)]
    rho: f64,
    /// Train one penalty model per listed weight, e.g. 1e-6,1e-2,10
    #[arg(long, value_delimiter = ',', conflicts_with = "rho")]
    rho_sweep: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    optimizer: OptimizerArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dependent generator: first, widest or an index
    #[arg(long, default_value = "first")]
    dep: DepArg,
    #[arg(long, default_value_t = DEFAULT_HIDDEN)]
    hidden: usize,
    /// Per-generator weights moving the interior anchor away from the intuitive solution
    #[arg(long, value_delimiter = ',')]
    center_weights: Option<Vec<f64>>,
    /// Checkpoint path
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch loss trace CSV
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug)]
enum DepArg {
    First,
    Widest,
    Index(usize),
}

impl std::str::FromStr for DepArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "first" => Ok(DepArg::First),
            "widest" => Ok(DepArg::Widest),
            _ => s
                .parse()
                .map(DepArg::Index)
                .map_err(|_| format!("expected first, widest or an index, got '{s}'")),
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Checkpoint to evaluate; repeat for several. Penalty models also get a projection row.
    #[arg(long = "model", required = true)]
    models: Vec<PathBuf>,
    /// Report JSON
    #[arg(long)]
    out: PathBuf,
    /// Markdown table; printed to stdout when omitted
    #[arg(long)]
    markdown: Option<PathBuf>,
    /// Compute gap columns concurrently
    #[arg(long)]
    parallel: bool,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 10)]
    warmup: usize,
}

#[derive(Args)]
struct MapvizArgs {
    /// Preset name (triangle, dispatch3) or a JSON file {"a", "b", "center"}
    #[arg(long, default_value = "triangle")]
    set: String,
    /// traditional, generalized or variant:<name>
    #[arg(long)]
    layer: String,
    #[arg(long, default_value_t = 51)]
    resolution: usize,
    /// Bins per axis for the reported density ratio
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    let missing_input = matches!(e, Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound);
    if e.is_validation() || missing_input {
        2
    } else {
        3
    }
}

fn invalid(message: String) -> Failure {
    Failure { code: 2, message }
}

/// Attach the path to any error raised while handling it.
fn at<T>(path: &Path, r: gauge_dispatch::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure {
        code: exit_code(&e),
        message: format!("{}: {e}", path.display()),
    })
}

fn gen_data(a: GenDataArgs) -> Result<(), Failure> {
    if a.count == 0 {
        return Err(invalid("--count must be positive".into()));
    }
    if !(0.0..1.0).contains(&a.fluct) {
        return Err(invalid(format!(
            "--fluct must be in [0, 1), got {}",
            a.fluct
        )));
    }
    if !(0.0..=1.0).contains(&a.train_fraction) {
        return Err(invalid(format!(
            "--train-fraction must be in [0, 1], got {}",
            a.train_fraction
        )));
    }
    let text = at(
        &a.case,
        std::fs::read_to_string(&a.case).map_err(Error::from),
    )?;
    let case = at(
        &a.case,
        parse_case(&text).and_then(|c| c.to_dispatch_case()),
    )?;
    let name = a
        .case
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let loads = sample_loads(&case, a.count, a.fluct, a.seed)?;
    let ds = build_dataset(
        &case,
        &name,
        loads,
        a.train_fraction,
        a.label_tol,
        a.seed,
        a.fluct,
    )?;
    at(&a.out, ds.save(&a.out))?;
    println!(
        "wrote {} samples ({} train, {} test) to {}",
        ds.samples.len(),
        ds.train.len(),
        ds.test.len(),
        a.out.display()
    );
    Ok(())
}

/// `model.json` with weight 10 becomes `model.rho10.json`.
fn with_rho_suffix(path: &Path, rho: f64) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.rho{rho}.{}", ext.to_string_lossy()),
        None => format!("{stem}.rho{rho}"),
    };
    path.with_file_name(name)
}

fn train_cmd(a: TrainArgs) -> Result<(), Failure> {
    let method: Method = a.method.parse()?;
    let ds = at(&a.dataset, Dataset::load(&a.dataset))?;
    let hash = ds.hash()?;
    let partition = match a.dep {
        DepArg::First => Partition::first(ds.case.generators())?,
        DepArg::Widest => Partition::widest(&ds.case)?,
        DepArg::Index(i) => Partition::new(i, ds.case.generators())?,
    };
    let runs: Vec<(f64, Option<f64>)> = match &a.rho_sweep {
        Some(list) => {
            if method != Method::Penalty {
                return Err(invalid(
                    "--rho-sweep applies to the penalty method only".into(),
                ));
            }
            list.iter().map(|&r| (r, Some(r))).collect()
        }
        None => vec![(a.rho, None)],
    };
    let samples = ds.train_samples();
    for (rho, suffix) in runs {
        let config = TrainConfig {
            seed: a.seed,
            epochs: a.epochs,
            learning_rate: a.lr,
            batch_size: a.batch_size,
            penalty_rho: if method == Method::Penalty { rho } else { 0.0 },
            optimizer: match a.optimizer {
                OptimizerArg::Adam => OptimizerKind::Adam,
                OptimizerArg::Sgd => OptimizerKind::Sgd,
            },
        };
        config.validate()?;
        let mut pipeline = Pipeline::new(&ds.case, partition.clone(), method, a.hidden, a.seed)?;
        if let Some(w) = &a.center_weights {
            pipeline = pipeline.with_center_weights(w.clone())?;
        }
        let trace = train(&mut pipeline, &samples, &config)?;
        let out = suffix.map_or_else(|| a.out.clone(), |r| with_rho_suffix(&a.out, r));
        at(
            &out,
            Checkpoint::from_pipeline(&pipeline, &hash, &config).save(&out),
        )?;
        if let Some(t) = &a.trace {
            let t_out = suffix.map_or_else(|| t.clone(), |r| with_rho_suffix(t, r));
            at(
                &t_out,
                std::fs::write(&t_out, trace.to_csv()).map_err(Error::from),
            )?;
        }
        println!(
            "{method}: final loss {:.6e} after {} epochs, checkpoint {}",
            trace.losses.last().copied().unwrap_or(f64::NAN),
            config.epochs,
            out.display()
        );
    }
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Result<(), Failure> {
    let ds = at(&a.dataset, Dataset::load(&a.dataset))?;
    let hash = ds.hash()?;
    let mut pipelines = Vec::with_capacity(a.models.len());
    for path in &a.models {
        let ckpt = at(path, Checkpoint::load(path))?;
        if ckpt.dataset_hash != hash {
            let mismatch = Error::HashMismatch {
                expected: ckpt.dataset_hash,
                actual: hash,
            };
            return at(path, Err(mismatch));
        }
        pipelines.push(at(path, ckpt.to_pipeline(&ds.case))?);
    }
    let mut items: Vec<Evaluated<'_>> = pipelines.iter().map(Evaluated::Pipeline).collect();
    items.extend(
        pipelines
            .iter()
            .filter(|p| p.method() == Method::Penalty)
            .map(Evaluated::Projection),
    );
    items.push(Evaluated::Oracle { tol: ds.label_tol });
    let timing = TimingConfig {
        repetitions: a.reps,
        warmup: a.warmup,
    };
    let report = evaluate(&items, &ds, &timing, a.parallel)?;
    at(
        &a.out,
        std::fs::write(&a.out, report.to_json()?).map_err(Error::from),
    )?;
    let md = report.to_markdown();
    match &a.markdown {
        Some(path) => at(path, std::fs::write(path, &md).map_err(Error::from))?,
        None => print!("{md}"),
    }
    Ok(())
}

fn mapviz_cmd(a: MapvizArgs) -> Result<(), Failure> {
    let layer: GaugeLayer = a.layer.parse()?;
    let set = if PRESETS.contains(&a.set.as_str()) {
        PlanarSet::preset(&a.set)?
    } else {
        let path = Path::new(&a.set);
        let text = at(path, std::fs::read_to_string(path).map_err(Error::from))?;
        at(path, PlanarSet::from_json(&text))?
    };
    let points = map_grid(&layer, &set, a.resolution)?;
    at(
        &a.out,
        std::fs::write(&a.out, to_csv(&points)).map_err(Error::from),
    )?;
    let ratio = density_ratio(&points, &set, a.bins)?;
    println!("{} points, density ratio {ratio}", points.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Mapviz(a) => mapviz_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
