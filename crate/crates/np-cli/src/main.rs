//! `np`: neural persistence of weight snapshots, convolution filters,
//! early-stopping simulations, and the desk-scale trainer.
//!
//! Exit codes: 0 success, 1 usage error, 2 input format error,
//! 3 degenerate network (all weights zero).

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use neural_persistence::conv::{
    conv_np_approx, conv_np_exact, ConvFilter, ConvGeometry,
};
use neural_persistence::earlystop::{simulate_grid, summarize, GridSummary, StopGrid};
use neural_persistence::error::Error;
use neural_persistence::io::{
    load_metric_trace, load_snapshot, save_snapshot, save_traces, write_text_atomic, MetricName,
};
use neural_persistence::trainer::experiments::{quantile, regime_experiment};
use neural_persistence::trainer::{
    train_with_init, InitScheme, MlpSpec, Optimizer, SyntheticDataset, TrainConfig,
};
use neural_persistence::{
    compute_diagram, empirical_bounds, neural_persistence as persistence_norm,
    normalized_neural_persistence, theoretical_upper_bound, transform_weights, EssentialPolicy,
};

#[derive(Parser)]
#[command(name = "np", version, about = "Neural persistence toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Neural persistence of a weight snapshot file.
    Compute(ComputeArgs),
    /// Exact and approximate neural persistence of a convolution filter.
    Conv(ConvArgs),
    /// Compare two early-stopping criteria over a burn-in x patience grid.
    Simulate(SimulateArgs),
    /// Train a small MLP on a synthetic preset, writing snapshots and traces.
    Train(TrainArgs),
    /// Neural persistence distributions of trained, diverging, and random nets.
    Regimes(RegimesArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EssentialArg {
    Skip,
    Zero,
}

impl From<EssentialArg> for EssentialPolicy {
    fn from(value: EssentialArg) -> Self {
        match value {
            EssentialArg::Skip => EssentialPolicy::Skip,
            EssentialArg::Zero => EssentialPolicy::DeathZero,
        }
    }
}

#[derive(Args)]
struct ComputeArgs {
    /// Snapshot file (np-snapshot-v1 JSON).
    #[arg(long)]
    snapshot: PathBuf,
    /// Norm exponent.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Essential-component policy.
    #[arg(long, value_enum, default_value_t = EssentialArg::Skip)]
    essential: EssentialArg,
    /// Include per-layer values.
    #[arg(long)]
    per_layer: bool,
    /// Include per-layer range and order-statistic bounds.
    #[arg(long)]
    bounds: bool,
}

#[derive(Args)]
struct ConvArgs {
    /// Filter file: JSON {"rows": p, "cols": q, "values": [...]}.
    #[arg(long)]
    filter: PathBuf,
    /// Input map size as HxW, e.g. 28x28.
    #[arg(long)]
    input: String,
    /// Symmetric zero padding.
    #[arg(long, default_value_t = 0)]
    pad: usize,
    /// Computation path.
    #[arg(long, value_enum, default_value_t = MethodArg::Both)]
    method: MethodArg,
    /// Norm exponent.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum MethodArg {
    Exact,
    Approx,
    Both,
}

#[derive(Args)]
struct SimulateArgs {
    /// Trace file carrying np_mean_normalized.
    #[arg(long)]
    np: PathBuf,
    /// Trace file carrying val_loss.
    #[arg(long)]
    val_loss: PathBuf,
    /// Trace file carrying test_accuracy.
    #[arg(long)]
    accuracy: PathBuf,
    /// Grid extent: burn-in 0..G, patience 1..=G.
    #[arg(long)]
    epochs: u32,
    /// Samples per epoch on the step axis.
    #[arg(long, default_value_t = 4)]
    steps_per_epoch: u32,
    /// Directory for grid.csv and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Blobs,
    Rings,
    Xor,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Xavier,
    Beta,
    Gaussian,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Args)]
struct TrainArgs {
    /// Synthetic dataset preset.
    #[arg(long, value_enum)]
    preset: PresetArg,
    /// Hidden layer sizes, comma separated (empty for a perceptron).
    #[arg(long, default_value = "20,20")]
    arch: String,
    /// Weight initialization.
    #[arg(long, value_enum, default_value_t = InitArg::Xavier)]
    init: InitArg,
    /// Learning rate.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 5)]
    epochs: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Sgd)]
    optimizer: OptimizerArg,
    /// Dataset size.
    #[arg(long, default_value_t = 600)]
    samples: usize,
    /// Feature dimension (blobs preset only).
    #[arg(long, default_value_t = 16)]
    dim: usize,
    /// Class count (blobs preset only).
    #[arg(long, default_value_t = 3)]
    classes: usize,
    /// Output directory for snapshots and trace.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RegimesArgs {
    #[arg(long, default_value_t = 50)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for regimes.csv.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version are successful exits; everything else is usage.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Compute(args) => run_compute(args),
        Command::Conv(args) => run_conv(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Train(args) => run_train(args),
        Command::Regimes(args) => run_regimes(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err {
                Error::DegenerateNetwork => 3,
                Error::Parse { .. } | Error::Io(_) => 2,
                Error::InvalidArgument(_) => 1,
            })
        }
    }
}

fn print_json<T: Serialize>(value: &T) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).expect("serializable output");
    let mut stdout = std::io::stdout().lock();
    if writeln!(stdout, "{text}").is_err() || stdout.flush().is_err() {
        // Downstream consumer closed the pipe; the work itself succeeded.
        std::process::exit(0);
    }
}

#[derive(Serialize)]
struct LayerReport {
    index: usize,
    rows: usize,
    cols: usize,
    np: f64,
    normalized_np: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    theoretical_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    empirical_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    empirical_upper: Option<f64>,
}

#[derive(Serialize)]
struct ComputeReport {
    snapshot: String,
    step: u64,
    p: f64,
    essential: &'static str,
    global_max: f64,
    mean_normalized_np: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    layers: Option<Vec<LayerReport>>,
}

fn run_compute(args: ComputeArgs) -> Result<(), Error> {
    let snapshot = load_snapshot(&args.snapshot)?;
    let policy: EssentialPolicy = args.essential.into();
    let global_max = snapshot.global_max_abs_weight();
    if global_max == 0.0 {
        return Err(Error::DegenerateNetwork);
    }
    let mut mean = 0.0;
    let mut layers = Vec::with_capacity(snapshot.layer_count());
    for (index, layer) in snapshot.layers().iter().enumerate() {
        let diagram = compute_diagram(layer, global_max, policy)?;
        let np = persistence_norm(&diagram, args.p)?.value;
        let normalized = normalized_neural_persistence(layer, global_max, args.p, policy)?;
        mean += normalized;
        if args.per_layer || args.bounds {
            let (theoretical_upper, empirical_lower, empirical_upper) = if args.bounds {
                let mut sorted = transform_weights(layer, global_max)?;
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let finite_points = layer.vertex_count() - diagram.essential_count();
                let bounds = empirical_bounds(&sorted, finite_points, args.p)?;
                (
                    Some(theoretical_upper_bound(layer, global_max, args.p)?),
                    Some(bounds.lower),
                    Some(bounds.upper),
                )
            } else {
                (None, None, None)
            };
            layers.push(LayerReport {
                index,
                rows: layer.out_count(),
                cols: layer.in_count(),
                np,
                normalized_np: normalized,
                theoretical_upper,
                empirical_lower,
                empirical_upper,
            });
        }
    }
    let report = ComputeReport {
        snapshot: args.snapshot.display().to_string(),
        step: snapshot.step(),
        p: args.p,
        essential: match policy {
            EssentialPolicy::Skip => "skip",
            EssentialPolicy::DeathZero => "zero",
        },
        global_max,
        mean_normalized_np: mean / snapshot.layer_count() as f64,
        layers: (args.per_layer || args.bounds).then_some(layers),
    };
    print_json(&report);
    Ok(())
}

#[derive(Deserialize)]
struct FilterFile {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct MethodReport {
    value: f64,
    seconds: f64,
}

#[derive(Serialize)]
struct ConvReport {
    filter: String,
    rows: usize,
    cols: usize,
    input: String,
    padding: usize,
    p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<MethodReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    approx: Option<MethodReport>,
}

fn parse_dims(text: &str) -> Result<(usize, usize), Error> {
    let (h, w) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::invalid(format!("expected HxW, got {text:?}")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::invalid(format!("bad dimension {s:?}")))
    };
    Ok((parse(h)?, parse(w)?))
}

fn run_conv(args: ConvArgs) -> Result<(), Error> {
    let display = args.filter.display().to_string();
    let text = std::fs::read_to_string(&args.filter)?;
    let parsed: FilterFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: display.clone(),
        detail: format!("invalid JSON at line {}, column {}: {e}", e.line(), e.column()),
    })?;
    let filter = ConvFilter::new(parsed.rows, parsed.cols, parsed.values)
        .map_err(|e| Error::Parse { path: display.clone(), detail: e.to_string() })?;
    let (height, width) = parse_dims(&args.input)?;
    let geo = ConvGeometry::new(height, width, args.pad)?;

    let timed = |f: &dyn Fn() -> Result<f64, Error>| -> Result<MethodReport, Error> {
        let start = Instant::now();
        let value = f()?;
        Ok(MethodReport { value, seconds: start.elapsed().as_secs_f64() })
    };
    let exact = (args.method != MethodArg::Approx)
        .then(|| timed(&|| conv_np_exact(&filter, &geo, args.p)))
        .transpose()?;
    let approx = (args.method != MethodArg::Exact)
        .then(|| timed(&|| conv_np_approx(&filter, &geo, args.p)))
        .transpose()?;

    print_json(&ConvReport {
        filter: display,
        rows: filter.rows(),
        cols: filter.cols(),
        input: format!("{height}x{width}"),
        padding: args.pad,
        p: args.p,
        exact,
        approx,
    });
    Ok(())
}

#[derive(Serialize)]
struct SimulateReport {
    epochs: u32,
    steps_per_epoch: u32,
    summary: GridSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary_json: Option<String>,
}

fn grid_to_csv(grid: &StopGrid) -> String {
    let mut out = String::from(
        "burn_in,patience,np_stop_step,np_accuracy,np_triggered,baseline_stop_step,\
         baseline_accuracy,baseline_triggered,delta_epochs,delta_accuracy\n",
    );
    for cell in &grid.cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            cell.burn_in,
            cell.patience,
            cell.monitored.stop_step,
            cell.monitored.accuracy,
            cell.monitored.triggered,
            cell.baseline.stop_step,
            cell.baseline.accuracy,
            cell.baseline.triggered,
            cell.delta_epochs,
            cell.delta_accuracy,
        ));
    }
    out
}

fn run_simulate(args: SimulateArgs) -> Result<(), Error> {
    let monitored = load_metric_trace(&args.np, MetricName::NpMeanNormalized)?;
    let baseline = load_metric_trace(&args.val_loss, MetricName::ValLoss)?;
    let accuracy = load_metric_trace(&args.accuracy, MetricName::TestAccuracy)?;
    let grid = simulate_grid(&monitored, &baseline, &accuracy, args.epochs, args.steps_per_epoch)?;
    let summary = summarize(&grid);

    let (grid_csv, summary_json) = match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let grid_path = dir.join("grid.csv");
            let summary_path = dir.join("summary.json");
            write_text_atomic(&grid_path, &grid_to_csv(&grid))?;
            write_text_atomic(
                &summary_path,
                &serde_json::to_string_pretty(&summary).expect("serializable summary"),
            )?;
            (
                Some(grid_path.display().to_string()),
                Some(summary_path.display().to_string()),
            )
        }
        None => (None, None),
    };

    print_json(&SimulateReport {
        epochs: args.epochs,
        steps_per_epoch: args.steps_per_epoch,
        summary,
        grid_csv,
        summary_json,
    });
    Ok(())
}

#[derive(Serialize)]
struct TrainReport {
    preset: &'static str,
    arch: Vec<usize>,
    epochs: u32,
    seed: u64,
    diverged: bool,
    final_val_accuracy: f64,
    final_test_accuracy: f64,
    final_np_mean_normalized: f64,
    snapshots_written: usize,
    trace_file: String,
}

fn run_train(args: TrainArgs) -> Result<(), Error> {
    let dataset = match args.preset {
        PresetArg::Blobs => SyntheticDataset::blobs(args.samples, args.dim, args.classes, args.seed)?,
        PresetArg::Rings => SyntheticDataset::rings(args.samples, args.seed)?,
        PresetArg::Xor => SyntheticDataset::xor_grid(args.samples, 0.1, args.seed)?,
    };
    let hidden: Vec<usize> = if args.arch.trim().is_empty() {
        Vec::new()
    } else {
        args.arch
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad hidden size {s:?} in --arch")))
            })
            .collect::<Result<_, _>>()?
    };
    let spec = MlpSpec::with_hidden(dataset.n_features(), &hidden, dataset.n_classes())?;
    let scheme = match args.init {
        InitArg::Xavier => InitScheme::Xavier,
        InitArg::Beta => InitScheme::Beta { alpha: 0.005, beta: 0.5 },
        InitArg::Gaussian => InitScheme::Gaussian { std: 1.0 },
        InitArg::Uniform => InitScheme::Uniform { low: -1.0, high: 1.0 },
    };
    let config = TrainConfig {
        learning_rate: args.eta,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
        snapshot_interval: 1,
        optimizer: match args.optimizer {
            OptimizerArg::Sgd => Optimizer::Sgd,
            OptimizerArg::Adam => Optimizer::adam(),
        },
    };
    let output = train_with_init(&spec, &dataset, &config, scheme)?;

    std::fs::create_dir_all(&args.out)?;
    for snapshot in &output.snapshots {
        save_snapshot(snapshot, args.out.join(format!("snapshot_{:05}.json", snapshot.step())))?;
    }
    let trace_path = args.out.join("trace.csv");
    let traces = &output.traces;
    let series = |values: &[f64]| -> Vec<(u64, f64)> {
        traces.steps.iter().cloned().zip(values.iter().cloned()).collect()
    };
    let np = series(&traces.np_mean_normalized);
    let val_loss = series(&traces.val_loss);
    let test_acc = series(&traces.test_accuracy);
    let train_loss = series(&traces.train_loss);
    let pnorm = series(&traces.weight_pnorm);
    save_traces(
        &trace_path,
        &[
            (MetricName::NpMeanNormalized, &np),
            (MetricName::ValLoss, &val_loss),
            (MetricName::TestAccuracy, &test_acc),
            (MetricName::TrainLoss, &train_loss),
            (MetricName::WeightPnorm, &pnorm),
        ],
    )?;

    print_json(&TrainReport {
        preset: match args.preset {
            PresetArg::Blobs => "blobs",
            PresetArg::Rings => "rings",
            PresetArg::Xor => "xor",
        },
        arch: spec.layer_sizes().to_vec(),
        epochs: args.epochs,
        seed: args.seed,
        diverged: output.diverged,
        final_val_accuracy: *traces.val_accuracy.last().expect("non-empty"),
        final_test_accuracy: *traces.test_accuracy.last().expect("non-empty"),
        final_np_mean_normalized: *traces.np_mean_normalized.last().expect("non-empty"),
        snapshots_written: output.snapshots.len(),
        trace_file: trace_path.display().to_string(),
    });
    Ok(())
}

#[derive(Serialize)]
struct RegimeRow {
    label: &'static str,
    median_np: f64,
    q1: f64,
    q3: f64,
    min: f64,
    max: f64,
}

#[derive(Serialize)]
struct RegimesReport {
    runs: usize,
    seed: u64,
    table: String,
    regimes: Vec<RegimeRow>,
}

fn run_regimes(args: RegimesArgs) -> Result<(), Error> {
    let samples = regime_experiment(args.runs, args.seed)?;
    std::fs::create_dir_all(&args.out)?;
    let mut csv = String::from("label,run,np,lower_bound\n");
    for sample in &samples {
        for (run, (np, lower)) in sample.np.iter().zip(&sample.lower_bound).enumerate() {
            csv.push_str(&format!("{},{run},{np},{lower}\n", sample.label.as_str()));
        }
    }
    let table_path = args.out.join("regimes.csv");
    write_text_atomic(&table_path, &csv)?;

    let regimes = samples
        .iter()
        .map(|sample| {
            let mut sorted = sample.np.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            RegimeRow {
                label: sample.label.as_str(),
                median_np: quantile(&sorted, 0.5),
                q1: quantile(&sorted, 0.25),
                q3: quantile(&sorted, 0.75),
                min: sorted[0],
                max: sorted[sorted.len() - 1],
            }
        })
        .collect();
    print_json(&RegimesReport {
        runs: args.runs,
        seed: args.seed,
        table: table_path.display().to_string(),
        regimes,
    });
    Ok(())
}
