use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use phl_core::control::TerminalMode;
use phl_core::harness::{self, Experiment, ExperimentConfig};
use phl_core::predictors::{fit_multi_step_ridge, fit_single_step_ridge, fit_structured_gd, GdOptions};
use phl_core::system::simulate;
use phl_core::{LtiModel, Matrix, Trajectory};

#[derive(Parser)]
#[command(name = "phl", version, about = "Single-step vs multi-step linear predictors for LTI systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic bias of both predictors across horizons.
    Fig1(SweepArgs),
    /// Reducible-error rate sweep with the state observed.
    Fig2(SweepArgs),
    /// Loss convergence under partial observation.
    Fig3(SweepArgs),
    /// Direct, single-step and multi-step-loss fits.
    Fig4(SweepArgs),
    /// MPC closed-loop cost and stability.
    Fig5(SweepArgs),
    /// Print every closed-form quantity for one model.
    Theory(TheoryArgs),
    /// Simulate a model and write the trajectory as CSV.
    Simulate(SimulateArgs),
    /// Fit a predictor to a trajectory CSV and write it as JSON.
    Fit(FitArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// JSON experiment config; keys left out keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination (default: config `output`, else stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Worker threads; PHL_THREADS takes precedence.
    #[arg(long)]
    threads: Option<usize>,
    /// Score fits on a fresh rollout instead of the exact loss.
    #[arg(long)]
    empirical_eval: bool,
    #[arg(long)]
    ridge: Option<f64>,
    /// Resolve rank-deficient terminal constraints by pseudo-inverse.
    #[arg(long)]
    min_norm: bool,
}

#[derive(Args)]
struct TheoryArgs {
    /// Model JSON with keys A, B (optional), B_w, C, D_v. Defaults to the built-in `example1` system.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    horizon: usize,
}

#[derive(Args)]
struct SimulateArgs {
    /// Model JSON. Defaults to the built-in `example1` system.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PredictorArg {
    SingleStep,
    MultiStep,
    StructuredGd,
}

#[derive(Args)]
struct FitArgs {
    /// Trajectory CSV with columns y0.. then u0.., as written by `simulate`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 5)]
    horizon: usize,
    #[arg(long, value_enum, default_value = "multi-step")]
    predictor: PredictorArg,
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    #[arg(long)]
    gd_step: Option<f64>,
    #[arg(long)]
    gd_iters: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failures that are the caller's fault and exit with status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn read_config(path: &Path) -> anyhow::Result<String> {
    if !path.is_file() {
        return Err(UsageError(format!("config file not found: {}", path.display())).into());
    }
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_model(path: Option<&Path>) -> anyhow::Result<LtiModel> {
    match path {
        Some(p) => Ok(LtiModel::from_json(&read_config(p)?).with_context(|| format!("model in {}", p.display()))?),
        None => Ok(LtiModel::example1()),
    }
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run_sweep(exp: Experiment, args: SweepArgs) -> anyhow::Result<()> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::from_json(&read_config(p)?, Some(exp))?,
        None => ExperimentConfig::defaults(exp),
    };
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    if let Some(r) = args.reps {
        cfg.reps = r;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    if args.empirical_eval {
        cfg.empirical_eval = true;
    }
    if let Some(r) = args.ridge {
        cfg.ridge = r;
    }
    if args.min_norm {
        cfg.terminal_mode = TerminalMode::MinNorm;
    }
    if let Some(o) = args.out {
        cfg.output = Some(o);
    }
    cfg.validate()?;
    let records = harness::run(&cfg)?;
    harness::write_csv(&records, output(cfg.output.as_deref())?)?;
    Ok(())
}

fn run_theory(args: TheoryArgs) -> anyhow::Result<()> {
    let model = load_model(args.config.as_deref())?;
    let rows = harness::theory_table(&model, args.horizon)?;
    let mut out = io::stdout().lock();
    writeln!(out, "regime = {}, H = {}", model.regime().as_str(), args.horizon)?;
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in rows {
        writeln!(out, "{k:<width$}  {v:.6}")?;
    }
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let model = load_model(args.config.as_deref())?;
    let tr = simulate(&model, args.n, args.seed);
    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    let header: Vec<String> = (0..tr.output_dim())
        .map(|i| format!("y{i}"))
        .chain((0..tr.input_dim()).map(|i| format!("u{i}")))
        .collect();
    w.write_record(&header)?;
    for t in 0..tr.len() {
        w.write_record(tr.y.row(t).iter().chain(tr.u.row(t)).map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}

fn read_trajectory(path: &Path) -> anyhow::Result<Trajectory> {
    if !path.is_file() {
        return Err(UsageError(format!("data file not found: {}", path.display())).into());
    }
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let dy = header.iter().filter(|h| h.starts_with('y')).count();
    let du = header.iter().filter(|h| h.starts_with('u')).count();
    if dy == 0 || dy + du != header.len() {
        bail!("expected columns y0.. followed by u0..");
    }
    let (mut ys, mut us) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let vals: Vec<f64> = rec?.iter().map(str::parse).collect::<Result<_, _>>()?;
        ys.push(vals[..dy].to_vec());
        us.push(vals[dy..].to_vec());
    }
    let n = ys.len();
    let y = Matrix::from_fn(n, dy, |t, i| ys[t][i]);
    let u = Matrix::from_fn(n, du, |t, i| us[t][i]);
    Ok(Trajectory::new(y, u)?)
}

fn run_fit(args: FitArgs) -> anyhow::Result<()> {
    let data = read_trajectory(&args.data)?;
    let h = args.horizon;
    let p = match args.predictor {
        PredictorArg::SingleStep => {
            let (gy, gu) = fit_single_step_ridge(&data, args.ridge)?;
            phl_core::predictors::compose_rollout(&gy, &gu, h)
        }
        PredictorArg::MultiStep => fit_multi_step_ridge(&data, h, args.ridge)?,
        PredictorArg::StructuredGd => {
            let (gy, gu) = fit_single_step_ridge(&data, args.ridge)?;
            let d = GdOptions::default();
            let opts = GdOptions { step: args.gd_step.unwrap_or(d.step), iters: args.gd_iters.unwrap_or(d.iters) };
            fit_structured_gd(&data, h, (&gy, &gu), opts)?.predictor
        }
    };
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "{}", p.to_json()?)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fig1(a) => run_sweep(Experiment::Fig1Bias, a),
        Command::Fig2(a) => run_sweep(Experiment::Fig2WellspecRate, a),
        Command::Fig3(a) => run_sweep(Experiment::Fig3MisspecBias, a),
        Command::Fig4(a) => run_sweep(Experiment::Fig4MultistepLoss, a),
        Command::Fig5(a) => run_sweep(Experiment::Fig5Control, a),
        Command::Theory(a) => run_theory(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Fit(a) => run_fit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
